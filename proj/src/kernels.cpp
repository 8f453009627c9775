#include "nlb/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nlb/quadrature.hpp"

namespace nlb::kernels {

std::string family_name(Family f) {
    switch (f) {
        case Family::FractionalPower: return "FractionalPower";
        case Family::AffineFractional: return "AffineFractional";
        case Family::GeneralLevy: return "GeneralLevy";
        case Family::Convolution: return "Convolution";
        case Family::Custom: return "Custom";
    }
    return "?";
}

double KernelSpec::eval(const Vec& y) const {
    double r = y.norm();
    if (r == 0.0 && singular_at_origin())
        throw SingularityError("kernel evaluated at the singularity y = 0");
    switch (family) {
        case Family::FractionalPower: {
            double a = angular ? angular(y.normalized()) : 1.0;
            return scale * a * std::pow(r, -(double)dimension - 2.0 * s);
        }
        case Family::AffineFractional: {
            Vec Ay = Vec::zero(dimension);
            for (int i = 0; i < dimension; ++i)
                for (int j = 0; j < dimension; ++j) Ay.c[i] += affine(i, j) * y[j];
            return scale * std::pow(Ay.norm(), -(double)dimension - 2.0 * s);
        }
        case Family::GeneralLevy: {
            double a = angular ? angular(y.normalized()) : 1.0;
            return scale * a * std::pow(r, -(double)dimension) * levy_g(r);
        }
        case Family::Convolution:
        case Family::Custom:
            return scale * density(y);
    }
    return 0.0;
}

Vec KernelSpec::grad(const Vec& y) const {
    double r = y.norm();
    bool analytic = !angular &&
                    (family == Family::FractionalPower || family == Family::AffineFractional ||
                     family == Family::GeneralLevy);
    if (analytic) {
        switch (family) {
            case Family::FractionalPower: {
                double k = eval(y);
                return y * (-(dimension + 2.0 * s) / (r * r) * k);
            }
            case Family::AffineFractional: {
                Vec Ay = Vec::zero(dimension);
                for (int i = 0; i < dimension; ++i)
                    for (int j = 0; j < dimension; ++j) Ay.c[i] += affine(i, j) * y[j];
                double ra = Ay.norm();
                Vec AtAy = Vec::zero(dimension);
                for (int i = 0; i < dimension; ++i)
                    for (int j = 0; j < dimension; ++j) AtAy.c[i] += affine(j, i) * Ay[j];
                double k = eval(y);
                return AtAy * (-(dimension + 2.0 * s) / (ra * ra) * k);
            }
            case Family::GeneralLevy: {
                double g = levy_g(r);
                double gp = levy_gprime ? levy_gprime(r)
                                        : (levy_g(r * (1 + 1e-6)) - levy_g(r * (1 - 1e-6))) /
                                              (2e-6 * r);
                double radial = scale * (-(double)dimension * std::pow(r, -(double)dimension - 1) * g +
                                         std::pow(r, -(double)dimension) * gp);
                return y * (radial / r);
            }
            default: break;
        }
    }
    // central differences, step 1e-5 |y|
    double h = 1e-5 * r;
    Vec g = Vec::zero(dimension);
    for (int i = 0; i < dimension; ++i) {
        Vec yp = y, ym = y;
        yp.c[i] += h;
        ym.c[i] -= h;
        g.c[i] = (eval(yp) - eval(ym)) / (2 * h);
    }
    return g;
}

double KernelSpec::hess_norm(const Vec& y) const {
    double r = y.norm();
    double h = 1e-5 * r;
    double worst = 0.0;
    for (int i = 0; i < dimension; ++i) {
        Vec yp = y, ym = y;
        yp.c[i] += h;
        ym.c[i] -= h;
        Vec gp = grad(yp), gm = grad(ym);
        for (int j = 0; j < dimension; ++j)
            worst = std::max(worst, std::abs((gp[j] - gm[j]) / (2 * h)));
    }
    return worst;
}

namespace {

void check_order(double s) {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("order s must lie in (0,1)");
}

}  // namespace

KernelSpec fractional_power(int n, double s, std::function<double(const Vec&)> angular,
                            double lambda, double Lambda, int smoothness_class) {
    check_order(s);
    KernelSpec k;
    k.dimension = n;
    k.s = k.s1 = k.s2 = s;
    k.family = Family::FractionalPower;
    k.angular = std::move(angular);
    k.lambda = lambda;
    k.Lambda = Lambda;
    k.smoothness_class = smoothness_class;
    k.homogeneous = true;
    // construction-time profile check on a symmetric sample of directions
    if (k.angular) {
        auto pts = quad::sphere_rule(n, 64);
        bool sym = true;
        for (const auto& p : pts) {
            double a = k.angular(p.dir);
            if (a < lambda - 1e-12 || a > Lambda + 1e-12)
                throw SpecViolation("angular profile leaves [lambda, Lambda]");
            if (std::abs(a - k.angular(-p.dir)) > 1e-12 * std::max(1.0, std::abs(a))) sym = false;
        }
        k.symmetric = sym;
    }
    return k;
}

KernelSpec fractional_power(int n, double s) {
    return fractional_power(n, s, nullptr, 1.0, 1.0, 2);
}

KernelSpec affine_fractional(int n, double s, const SymMat& A) {
    check_order(s);
    KernelSpec k;
    k.dimension = n;
    k.s = k.s1 = k.s2 = s;
    k.family = Family::AffineFractional;
    k.affine = A;
    // singular values of A bound the ellipticity envelope of |Ay|^{-n-2s}
    double lo = 1e300, hi = 0.0;
    auto pts = quad::sphere_rule(n, 128);
    for (const auto& p : pts) {
        Vec Ay = Vec::zero(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) Ay.c[i] += A(i, j) * p.dir[j];
        double r = Ay.norm();
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    if (!(lo > 0)) throw SpecViolation("affine matrix must be nonsingular");
    k.lambda = std::pow(hi, -(double)n - 2 * s);
    k.Lambda = std::pow(lo, -(double)n - 2 * s);
    k.smoothness_class = 2;
    return k;
}

KernelSpec general_levy(int n, std::function<double(double)> g,
                        std::function<double(double)> gprime, double s1, double s2,
                        double lambda, double Lambda) {
    if (!(s1 > 0 && s1 <= s2 && s2 < 1)) throw ParameterError("need 0 < s1 <= s2 < 1");
    KernelSpec k;
    k.dimension = n;
    k.family = Family::GeneralLevy;
    k.levy_g = std::move(g);
    k.levy_gprime = std::move(gprime);
    k.s1 = s1;
    k.s2 = s2;
    k.s = 0.5 * (s1 + s2);
    k.lambda = lambda;
    k.Lambda = Lambda;
    k.smoothness_class = 1;
    k.homogeneous = false;
    return k;
}

KernelSpec convolution_kernel(int n, std::function<double(const Vec&)> profile) {
    KernelSpec k;
    k.dimension = n;
    k.family = Family::Convolution;
    k.density = std::move(profile);
    k.s = k.s1 = k.s2 = 0.5;
    k.homogeneous = false;
    k.smoothness_class = 0;
    return k;
}

KernelSpec custom_kernel(int n, double s, std::function<double(const Vec&)> density,
                         double lambda, double Lambda, int smoothness_class, bool symmetric,
                         bool homogeneous) {
    check_order(s);
    KernelSpec k;
    k.dimension = n;
    k.s = k.s1 = k.s2 = s;
    k.family = Family::Custom;
    k.density = std::move(density);
    k.lambda = lambda;
    k.Lambda = Lambda;
    k.smoothness_class = smoothness_class;
    k.symmetric = symmetric;
    k.homogeneous = homogeneous;
    return k;
}

double psi_ramp(double t) {
    if (t <= 0.5) return 0.0;
    if (t >= 1.0) return 1.0;
    double u = (t - 0.5) * 2.0;
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double psi_ramp_deriv(double t) {
    if (t <= 0.5 || t >= 1.0) return 0.0;
    double u = (t - 0.5) * 2.0;
    return 2.0 * 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

double KernelDecomposition::near(const Vec& y) const {
    double t = y.norm() / radius;
    if (t >= 1.0) return 0.0;
    return (1.0 - psi_ramp(t)) * spec->eval(y);
}

double KernelDecomposition::far(const Vec& y) const {
    double t = y.norm() / radius;
    if (t <= 0.5) return 0.0;
    return psi_ramp(t) * spec->eval(y);
}

KernelDecomposition decompose(const KernelSpec& spec, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("decomposition radius must be in (0,1)");
    KernelDecomposition d;
    d.spec = std::make_shared<KernelSpec>(spec);
    d.radius = eps;
    return d;
}

double annulus_mass(const std::function<double(const Vec&)>& density, int n, double r0,
                    double r1, int angular) {
    auto sphere = quad::sphere_rule(n, angular);
    std::vector<double> gx, gw;
    quad::gauss_legendre(6, gx, gw);
    const double ratio = std::sqrt(2.0);
    double total = 0.0;
    double a = r0;
    int guard = 0;
    while (a < r1 && guard++ < 4000) {
        double b = std::min(a * ratio, r1);
        if (!(b > a)) break;
        double part = 0.0;
        for (size_t i = 0; i < gx.size(); ++i) {
            double r = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
            double wr = 0.5 * (b - a) * gw[i] * std::pow(r, n - 1);
            for (const auto& p : sphere) part += wr * p.weight * density(p.dir * r);
        }
        total += part;
        if (b >= r1) break;
        if (a > r0 * 16.0 && std::abs(part) < 1e-14 * std::abs(total) && r1 > 1e30) break;
        a = b;
    }
    return total;
}

Vec annulus_first_moment(const std::function<double(const Vec&)>& density, int n, double r0,
                         double r1, int angular) {
    auto sphere = quad::sphere_rule(n, angular);
    std::vector<double> gx, gw;
    quad::gauss_legendre(6, gx, gw);
    const double ratio = std::sqrt(2.0);
    Vec total = Vec::zero(n);
    double a = r0;
    int guard = 0;
    while (a < r1 && guard++ < 4000) {
        double b = std::min(a * ratio, r1);
        if (!(b > a)) break;
        for (size_t i = 0; i < gx.size(); ++i) {
            double r = 0.5 * (a + b) + 0.5 * (b - a) * gx[i];
            double wr = 0.5 * (b - a) * gw[i] * std::pow(r, n - 1);
            for (const auto& p : sphere) {
                Vec y = p.dir * r;
                total = total + y * (wr * p.weight * density(y));
            }
        }
        if (b >= r1) break;
        a = b;
    }
    return total;
}

DecompositionReport check_decomposition(const KernelSpec& spec, double eps, int samples,
                                        unsigned seed) {
    KernelDecomposition d = decompose(spec, eps);
    DecompositionReport rep;
    rep.eps = eps;
    int n = spec.dimension;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        // K2 varies only on supp(K2); sample radii in [eps/2 (1+), 1e3]
        double lr = std::log(eps * 0.5001) +
                    uni(rng) * (std::log(1e3) - std::log(eps * 0.5001));
        double r = std::exp(lr);
        Vec dir = Vec::zero(n);
        double nrm = 0.0;
        while (nrm < 1e-8) {
            for (int k = 0; k < n; ++k) dir.c[k] = 2.0 * uni(rng) - 1.0;
            nrm = dir.norm();
        }
        Vec y = dir * (r / nrm);
        double K = spec.eval(y);
        // gradient of K2 by central differences
        double h = 1e-6 * r;
        double gn2 = 0.0;
        for (int k = 0; k < n; ++k) {
            Vec yp = y, ym = y;
            yp.c[k] += h;
            ym.c[k] -= h;
            double g = (d.far(yp) - d.far(ym)) / (2 * h);
            gn2 += g * g;
        }
        worst = std::max(worst, std::sqrt(gn2) * eps / K);
    }
    rep.grad_far_worst_ratio = worst;
    rep.mass_K_outside =
        annulus_mass([&](const Vec& y) { return spec.eval(y); }, n, eps / 2, 1e300);
    rep.mass_far = annulus_mass([&](const Vec& y) { return d.far(y); }, n, eps / 2, 1e300);
    rep.mass_ratio = rep.mass_K_outside / rep.mass_far;
    return rep;
}

double InterpolationKernel::eval(const Vec& y) const {
    double r = y.norm();
    if (r >= delta) return 0.0;
    double ramp = 1.0 - psi_ramp(r / delta);  // 1 in B_{delta/2}, 0 outside B_delta
    if (ramp == 0.0) return 0.0;
    int n = spec->dimension;
    if (levy_variant)
        return ramp * spec->eval(y) * std::pow(r, n / 2.0 + 1.0) /
               std::sqrt(spec->levy_g(r));
    return ramp * spec->eval(y) * std::pow(r, n / 2.0 + spec->s + 1.0);
}

double InterpolationKernel::mass() const {
    return annulus_mass([this](const Vec& y) { return eval(y); }, spec->dimension, delta * 1e-9,
                        delta);
}

InterpolationKernel interpolation_kernel(const KernelSpec& spec, double delta) {
    if (!(delta > 0.0)) throw ParameterError("interpolation radius must be positive");
    InterpolationKernel k;
    k.spec = std::make_shared<KernelSpec>(spec);
    k.delta = delta;
    k.levy_variant = (spec.family == Family::GeneralLevy);
    return k;
}

bool ValidationReport::all_pass() const {
    for (const auto& c : conditions)
        if (c.checked && !c.pass) return false;
    return true;
}

const ConditionReport* ValidationReport::find(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.name == name) return &c;
    return nullptr;
}

ValidationReport validate_class(const KernelSpec& spec, int n_samples, unsigned seed) {
    if (n_samples < 1) throw ParameterError("n_samples must be >= 1");
    ValidationReport rep;
    int n = spec.dimension;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<Vec> samples;
    samples.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        double lr = std::log(1e-6) + uni(rng) * (std::log(1e3) - std::log(1e-6));
        Vec dir = Vec::zero(n);
        double nrm = 0.0;
        while (nrm < 1e-8) {
            for (int k = 0; k < n; ++k) dir.c[k] = 2.0 * uni(rng) - 1.0;
            nrm = dir.norm();
        }
        samples.push_back(dir * (std::exp(lr) / nrm));
    }

    // admissible smoothness constants for the (C1)/(C2) ratio checks: the exact
    // power law saturates |grad K| |y| / K at n+2s, so a fixed-constant check
    // uses max(Lambda, n+2s) and its second-order analogue
    double c1_ceiling = std::max(spec.Lambda, n + 2.0 * spec.s2) * (1.0 + 1e-6);
    double c2_ceiling =
        std::max(spec.Lambda, (n + 2.0 * spec.s2) * (n + 2.0 * spec.s2 + 1.0)) * (1.0 + 1e-4);

    bool power_class = spec.family != Family::GeneralLevy && spec.family != Family::Convolution;

    if (power_class) {
        ConditionReport c;
        c.name = "K_asymp";
        c.checked = true;
        double worst = 0.0;
        bool ok = true;
        for (const auto& y : samples) {
            double ratio = spec.eval(y) * std::pow(y.norm(), n + 2.0 * spec.s) / spec.scale;
            worst = std::max(worst, std::max(ratio / spec.Lambda, spec.lambda / ratio));
            if (ratio < spec.lambda * (1 - 1e-9) || ratio > spec.Lambda * (1 + 1e-9)) {
                ok = false;
                c.worst_sample = y;
            }
        }
        c.worst_ratio = worst;
        c.pass = ok;
        rep.conditions.push_back(c);
    }

    {
        ConditionReport c;
        c.name = "symmetry";
        c.checked = spec.symmetric;
        if (c.checked) {
            bool ok = true;
            double worst = 0.0;
            for (const auto& y : samples) {
                double a = spec.eval(y), b = spec.eval(-y);
                double rel = std::abs(a - b) / std::max(std::abs(a), 1e-300);
                worst = std::max(worst, rel);
                if (rel > 1e-10) {
                    ok = false;
                    c.worst_sample = y;
                }
            }
            c.worst_ratio = worst;
            c.pass = ok;
        }
        rep.conditions.push_back(c);
    }

    if (spec.smoothness_class >= 1) {
        ConditionReport c;
        c.name = "C1";
        c.checked = true;
        bool ok = true;
        double worst = 0.0;
        for (const auto& y : samples) {
            double K = spec.eval(y);
            double ratio = spec.grad(y).norm() * y.norm() / K;
            if (ratio > worst) {
                worst = ratio;
                c.worst_sample = y;
            }
            if (ratio > c1_ceiling) ok = false;
        }
        c.worst_ratio = worst;
        c.pass = ok;
        rep.conditions.push_back(c);
    }

    if (spec.smoothness_class >= 2) {
        ConditionReport c;
        c.name = "C2";
        c.checked = true;
        bool ok = true;
        double worst = 0.0;
        for (const auto& y : samples) {
            double K = spec.eval(y);
            double ratio = spec.hess_norm(y) * y.norm() * y.norm() / K;
            if (ratio > worst) {
                worst = ratio;
                c.worst_sample = y;
            }
            if (ratio > c2_ceiling) ok = false;
        }
        c.worst_ratio = worst;
        c.pass = ok;
        rep.conditions.push_back(c);
    }

    {
        ConditionReport c;
        c.name = "homogeneity";
        c.checked = spec.homogeneous;
        if (c.checked) {
            bool ok = true;
            double worst = 0.0;
            std::vector<double> scales = {0.5, 2.0, 3.7, 10.0};
            for (const auto& y : samples) {
                double K = spec.eval(y);
                for (double r : scales) {
                    double rel =
                        std::abs(spec.eval(y * r) * std::pow(r, n + 2.0 * spec.s) - K) /
                        std::max(std::abs(K), 1e-300);
                    worst = std::max(worst, rel);
                    if (rel > 1e-12) {
                        ok = false;
                        c.worst_sample = y;
                    }
                }
            }
            c.worst_ratio = worst;
            c.pass = ok;
        }
        rep.conditions.push_back(c);
    }

    {
        ConditionReport c;
        c.name = "cancellation";
        c.checked = !spec.symmetric && std::abs(spec.s - 0.5) < 1e-12;
        if (c.checked) {
            bool ok = true;
            double worst = 0.0;
            for (int j = 0; j <= 20; ++j) {
                double r = std::pow(2.0, -j), R = 2.0 * r;
                Vec m = annulus_first_moment([&](const Vec& y) { return spec.eval(y); }, n, r, R);
                double mass = annulus_mass([&](const Vec& y) { return spec.eval(y); }, n, r, R);
                double rel = m.norm() / (r * mass);
                worst = std::max(worst, rel);
                if (rel > 1e-8) ok = false;
            }
            c.worst_ratio = worst;
            c.pass = ok;
        }
        rep.conditions.push_back(c);
    }

    if (spec.family == Family::GeneralLevy) {
        ConditionReport c;
        c.name = "g_comp";
        c.checked = true;
        bool ok = true;
        double worst = 0.0;
        for (const auto& y : samples) {
            double ratio = spec.eval(y) * std::pow(y.norm(), (double)n) /
                           (spec.scale * spec.levy_g(y.norm()));
            worst = std::max(worst, std::max(ratio / spec.Lambda, spec.lambda / ratio));
            if (ratio < spec.lambda * (1 - 1e-9) || ratio > spec.Lambda * (1 + 1e-9)) ok = false;
        }
        c.worst_ratio = worst;
        c.pass = ok;
        rep.conditions.push_back(c);

        ConditionReport cd;
        cd.name = "g_der";
        cd.checked = true;
        bool okd = true;
        double worstd = 0.0;
        for (const auto& y : samples) {
            double r = y.norm();
            double g = spec.levy_g(r);
            double gp = spec.levy_gprime
                            ? spec.levy_gprime(r)
                            : (spec.levy_g(r * (1 + 1e-6)) - spec.levy_g(r * (1 - 1e-6))) /
                                  (2e-6 * r);
            double ratio = std::abs(gp) * r / g;  // must lie in [2 s1, 2 s2]
            worstd = std::max(worstd, std::max(ratio / (2 * spec.s2), (2 * spec.s1) / ratio));
            if (ratio < 2 * spec.s1 * (1 - 1e-6) || ratio > 2 * spec.s2 * (1 + 1e-6)) {
                okd = false;
                cd.worst_sample = y;
            }
        }
        cd.worst_ratio = worstd;
        cd.pass = okd;
        rep.conditions.push_back(cd);
    }

    return rep;
}

}  // namespace nlb::kernels
