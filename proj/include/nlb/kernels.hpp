#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlb/geometry.hpp"

namespace nlb::kernels {

struct SpecViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SingularityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Family { FractionalPower, AffineFractional, GeneralLevy, Convolution, Custom };

std::string family_name(Family f);

// Parametric description of a jumping kernel with its ellipticity and
// smoothness metadata. Immutable after construction; safe to share.
struct KernelSpec {
    int dimension = 1;
    double s = 0.5;        // order; for GeneralLevy the representative order is (s1+s2)/2
    double s1 = 0.5;       // GeneralLevy lower exponent
    double s2 = 0.5;       // GeneralLevy upper exponent
    Family family = Family::FractionalPower;

    std::function<double(const Vec&)> angular;          // a(theta), FractionalPower
    SymMat affine;                                      // A, AffineFractional: K=|Ay|^{-n-2s}
    std::function<double(double)> levy_g;               // g(r), GeneralLevy
    std::function<double(double)> levy_gprime;          // g'(r) when available
    std::function<double(const Vec&)> density;          // Convolution / Custom

    double lambda = 1.0;
    double Lambda = 1.0;
    int smoothness_class = 0;  // k in {0,1,2}
    bool symmetric = true;
    bool homogeneous = true;
    Vec drift;                 // b, |b| <= Lambda; zero when absent
    double scale = 1.0;        // overall multiplier, e.g. the (1-s) normalization

    std::function<KernelSpec(double)> time_dependence;  // optional, parabolic runs

    bool singular_at_origin() const { return family != Family::Convolution; }

    // K(y); throws SingularityError at y=0 for singular families.
    double eval(const Vec& y) const;
    // nabla K(y); analytic for built-in families, central differences for Custom.
    Vec grad(const Vec& y) const;
    // |D^2 K(y)| surrogate (max abs entry), by differencing grad.
    double hess_norm(const Vec& y) const;

    KernelSpec at_time(double t) const { return time_dependence ? time_dependence(t) : *this; }
};

// Factories; these run the construction-time checks the spec families promise.
KernelSpec fractional_power(int n, double s, std::function<double(const Vec&)> angular,
                            double lambda, double Lambda, int smoothness_class = 2);
KernelSpec fractional_power(int n, double s);  // a == 1, lambda = Lambda = 1
KernelSpec affine_fractional(int n, double s, const SymMat& A);
KernelSpec general_levy(int n, std::function<double(double)> g,
                        std::function<double(double)> gprime, double s1, double s2,
                        double lambda, double Lambda);
KernelSpec convolution_kernel(int n, std::function<double(const Vec&)> profile);
KernelSpec custom_kernel(int n, double s, std::function<double(const Vec&)> density,
                         double lambda, double Lambda, int smoothness_class,
                         bool symmetric, bool homogeneous);

// Smooth radial ramp for decompositions: 0 on [0,1/2], 1 on [1,inf), quintic
// smoothstep between; |psi'| <= 15/4 <= 4.
double psi_ramp(double t);
double psi_ramp_deriv(double t);

// K = K1 + K2 with K1 = K in B_{eps/2}, supp K1 in B_eps, supp K2 outside
// B_{eps/2}.
struct KernelDecomposition {
    std::shared_ptr<const KernelSpec> spec;
    double radius = 0.0;  // eps
    double near(const Vec& y) const;  // K1
    double far(const Vec& y) const;   // K2
};

KernelDecomposition decompose(const KernelSpec& spec, double eps);

// Measured constants for the decomposition properties (v)-(vi).
struct DecompositionReport {
    double eps = 0.0;
    double grad_far_worst_ratio = 0.0;  // sup |grad K2| / (eps^{-1} K), property (v)
    double mass_K_outside = 0.0;        // mu_K(R^n \ B_{eps/2})
    double mass_far = 0.0;              // mu_{K2}(R^n)
    double mass_ratio = 0.0;            // mass_K_outside / mass_far, in [c2^{-1}, c3]
};
DecompositionReport check_decomposition(const KernelSpec& spec, double eps, int samples = 200,
                                        unsigned seed = 1);

// Auxiliary interpolation kernel K_delta, supported in B_delta.
struct InterpolationKernel {
    std::shared_ptr<const KernelSpec> spec;
    double delta = 0.0;
    bool levy_variant = false;
    double eval(const Vec& y) const;
    double mass() const;  // mu_{K_delta}(B_delta), by radial quadrature
};
InterpolationKernel interpolation_kernel(const KernelSpec& spec, double delta);

// Per-condition validation result.
struct ConditionReport {
    std::string name;
    bool checked = false;
    bool pass = false;
    double worst_ratio = 0.0;
    Vec worst_sample;
};

struct ValidationReport {
    std::vector<ConditionReport> conditions;
    bool all_pass() const;
    const ConditionReport* find(const std::string& name) const;
};

// Samples log-spaced radii in [1e-6, 1e3] times seeded random directions and
// checks (K_asymp), symmetry, (C1), (C2), homogeneity, cancellation (s = 1/2,
// nonsymmetric), and (g-comp)/(g-der) as applicable. Reports violations,
// never throws for them.
ValidationReport validate_class(const KernelSpec& spec, int n_samples, unsigned seed);

// integral of density over the annulus {r0 < |y| < r1} (r1 may be inf)
double annulus_mass(const std::function<double(const Vec&)>& density, int n, double r0,
                    double r1, int angular = 64);
// integral of y*density over {r0 < |y| < r1}
Vec annulus_first_moment(const std::function<double(const Vec&)>& density, int n, double r0,
                         double r1, int angular = 64);

}  // namespace nlb::kernels
