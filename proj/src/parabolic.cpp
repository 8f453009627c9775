#include "nlb/parabolic.hpp"

#include <algorithm>
#include <cmath>

namespace nlb::parabolic {

void ParabolicProblem::validate() const {
    if (dt <= 0.0) throw ParameterError("time step must be positive");
    if (!f) throw ParameterError("forcing f(t, x) is required");
    for (long p = 0; p < initial.node_count(); ++p)
        if (initial.values[p] < -1e-12)
            throw ParameterError("initial condition must be nonnegative");
}

ParabolicReport solve(const ParabolicProblem& p, double dx, const op::QuadratureConfig& q,
                      obstacle::Method method, double tol, int max_iter, double omega) {
    p.validate();
    ParabolicReport rep;
    int steps = (int)std::lround(1.0 / p.dt);

    // spatial operator at each needed time; time-independent kernels assemble
    // once
    obstacle::ObstacleProblem sub;
    sub.kernel = p.kernel;
    sub.domain = p.domain;
    sub.exterior = p.exterior;
    sub.phi = p.exterior;  // unused by assemble
    bool time_dep = p.kernel.time_dependence != nullptr;
    obstacle::AssembledOperator D = obstacle::assemble(sub, dx, q);
    long N = (long)D.nodes.size();

    Eigen::VectorXd u(N);
    for (long i = 0; i < N; ++i) u(i) = p.initial.eval(D.nodes[i]);
    auto store = [&](const Eigen::VectorXd& v, double t) {
        std::vector<double> vals(v.data(), v.data() + N);
        fields::GridFunction g =
            fields::GridFunction::from_values(p.domain, dx, vals, fields::Exterior::Zero);
        fields::GridFunction ext = p.exterior;
        g.exterior = fields::Exterior::Analytic;
        g.exterior_form = [ext](const Vec& x) { return ext.eval(x); };
        rep.levels.push_back(std::move(g));
        rep.times.push_back(t);
    };
    store(u, 0.0);
    rep.residuals.push_back(0.0);
    rep.iterations.push_back(0);

    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
    for (int k = 1; k <= steps; ++k) {
        double t = k * p.dt;
        if (time_dep) {
            sub.kernel = p.kernel.at_time(t);  // implicit level t^{k+1}
            D = obstacle::assemble(sub, dx, q);
        }
        // min( (v - u)/dt + A v - load - f, v ) = 0  =>  LCP with
        // M = I/dt + A, c = u/dt + load + f, lower = 0
        Eigen::MatrixXd M = I / p.dt + D.A;
        Eigen::VectorXd c(N);
        for (long i = 0; i < N; ++i)
            c(i) = u(i) / p.dt + D.load(i) + p.f(t, D.nodes[i]);
        Eigen::VectorXd lower = Eigen::VectorXd::Zero(N);
        int its = 0;
        std::vector<double> hist;
        Eigen::VectorXd v =
            obstacle::solve_lcp(M, c, lower, method, tol, max_iter, omega, &its, &hist);
        Eigen::VectorXd r = M * v - c;
        double res = 0.0;
        for (long i = 0; i < N; ++i)
            res = std::max(res, std::abs(std::min(r(i), v(i))));
        u = v;
        store(u, t);
        rep.residuals.push_back(res);
        rep.iterations.push_back(its);
        rep.max_residual = std::max(rep.max_residual, res);
    }
    return rep;
}

void ParabolicReport::save_csv(const std::string& prefix) const {
    for (size_t k = 0; k < levels.size(); ++k)
        levels[k].save_csv(prefix + "_t" + std::to_string(k) + ".csv");
}

SemiconvexityReport measure_space_semiconvexity(const ParabolicReport& r,
                                                const ParabolicProblem& p, const Vec& e,
                                                const std::vector<double>& h_list) {
    SemiconvexityReport rep;
    int n = p.domain.n;
    Box region = p.domain;
    for (int a = 0; a < n; ++a) {
        double mid = 0.5 * (p.domain.lo[a] + p.domain.hi[a]);
        double half = 0.25 * (p.domain.hi[a] - p.domain.lo[a]);  // inner half
        region.lo.c[a] = mid - half;
        region.hi.c[a] = mid + half;
    }
    double sup_f = 0.0, sup_u = 0.0;
    bool first = true;
    for (size_t k = 0; k < r.levels.size(); ++k) {
        sup_u = std::max(sup_u, r.levels[k].sup_norm());
        // spatial C^{1,1} surrogate of f at this level
        fields::GridFunction fk = fields::GridFunction::from_function(
            p.domain, r.levels[k].dx,
            [&](const Vec& x) { return p.f(r.times[k], x); });
        sup_f = std::max(sup_f, obstacle::c11_surrogate(fk, p.domain));
    }
    rep.data_scale = sup_f + sup_u;
    for (size_t k = 0; k < r.levels.size(); ++k) {
        if (r.times[k] <= 0.5 + 1e-12) continue;
        obstacle::SemiconvexityReport m =
            obstacle::measure_semiconvexity(r.levels[k], e, h_list, region, rep.data_scale);
        if (first || m.min_second_difference < rep.raw.min_second_difference) {
            rep.raw = m;
            rep.argmin_level = (int)k;
            first = false;
        }
    }
    if (first) throw ParameterError("no time levels in (1/2, 1]");
    rep.C = rep.raw.implied_C;
    return rep;
}

bernstein::BernsteinReport check_parabolic_key_estimate(
    const kernels::KernelSpec& K_t, const bernstein::KeyEstimateVariant& variant,
    const fields::GridFunction& u, double sigma, const op::QuadratureConfig& q,
    const std::vector<Vec>& nodes, double tol) {
    using bernstein::VariantTag;
    if (variant.tag != VariantTag::Parabolic && variant.tag != VariantTag::ParabolicPosPart &&
        variant.tag != VariantTag::SecondOrder)
        throw ParameterError("not a parabolic key-estimate variant");
    if (!variant.ut) throw ParameterError("parabolic variant requires a space-time field");
    return bernstein::check_key_estimate(K_t, variant, u, sigma, q, nodes, tol);
}

}  // namespace nlb::parabolic
