#pragma once

#include <functional>
#include <vector>

#include "nlb/bernstein.hpp"
#include "nlb/obstacle.hpp"

namespace nlb::parabolic {

using obstacle::NonconvergenceError;
using obstacle::ParameterError;

// min{ d_t u + L_{K^(t)} u - f, u } = 0 on (0,1) x domain, u = exterior
// outside, u(0,.) = initial >= 0.
struct ParabolicProblem {
    kernels::KernelSpec kernel;  // time dependence via kernel.at_time
    Box domain;
    double dt = 0.1;
    std::function<double(double, const Vec&)> f;  // forcing f(t, x)
    fields::GridFunction exterior;
    fields::GridFunction initial;
    void validate() const;
};

struct ParabolicReport {
    std::vector<double> times;                   // 0, dt, ..., 1
    std::vector<fields::GridFunction> levels;    // u at each time
    std::vector<double> residuals;               // complementarity per level
    std::vector<int> iterations;                 // LCP iterations per level
    double max_residual = 0.0;
    void save_csv(const std::string& prefix) const;  // one CSV per level
};

ParabolicReport solve(const ParabolicProblem& p, double dx, const op::QuadratureConfig& q,
                      obstacle::Method method = obstacle::Method::PSOR, double tol = 1e-8,
                      int max_iter = 100000, double omega = 1.5);

struct SemiconvexityReport {
    obstacle::SemiconvexityReport raw;
    double data_scale = 0.0;  // ||f||_{L^inf C^{1,1}} + ||u||_inf
    double C = 0.0;
    int argmin_level = -1;
};

// min over the later-time inner region: t in (1/2, 1), x in the inner half
SemiconvexityReport measure_space_semiconvexity(const ParabolicReport& r,
                                                const ParabolicProblem& p, const Vec& e,
                                                const std::vector<double>& h_list);

// Thm 7.1 family; variant must be Parabolic or ParabolicPosPart (first-order
// pos-part) or SecondOrder with a parabolic ut (Cor 7.3 shape).
bernstein::BernsteinReport check_parabolic_key_estimate(
    const kernels::KernelSpec& K_t, const bernstein::KeyEstimateVariant& variant,
    const fields::GridFunction& u, double sigma, const op::QuadratureConfig& q,
    const std::vector<Vec>& nodes, double tol = 0.0);

}  // namespace nlb::parabolic
