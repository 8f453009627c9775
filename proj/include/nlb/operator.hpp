#pragma once

#include <string>
#include <vector>

#include "nlb/fields.hpp"
#include "nlb/kernels.hpp"

namespace nlb::op {

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Singularity-aware quadrature parameters. Zero inner_radius means "auto":
// 2 dx of the grid function being evaluated.
struct QuadratureConfig {
    double inner_radius = 0.0;   // rho, Taylor cell around the singularity
    int annulus_count = 48;      // geometric annuli on B_Rinf \ B_rho
    int points_per_annulus = 4;  // Gauss-Legendre radial nodes per annulus
    double far_cutoff = 64.0;    // R_inf; beyond it, tail against the exterior rule
    double tolerance = 1e-8;     // target for adaptive tail truncation
    int sphere_points = 0;       // angular nodes; 0 = dimension-dependent default

    double rho(double dx) const { return inner_radius > 0 ? inner_radius : 2.0 * dx; }
    QuadratureConfig refined() const;
    void check() const;
};

struct OperatorEval {
    fields::GridFunction values;
    fields::GridFunction error_estimate;
    QuadratureConfig config;
    void save_csv(const std::string& path) const;
};

// Pointwise evaluations; err receives the two-pass Richardson-style estimate.
double apply_at(const kernels::KernelSpec& K, const fields::GridFunction& u, const Vec& x,
                const QuadratureConfig& q, double* err = nullptr);
double apply_nonsym_at(const kernels::KernelSpec& K, const fields::GridFunction& u,
                       const Vec& x, const QuadratureConfig& q, double* err = nullptr);
double bilinear_at(const kernels::KernelSpec& K, const fields::GridFunction& u,
                   const fields::GridFunction& v, const Vec& x, const QuadratureConfig& q,
                   double* err = nullptr);
double drift_at(const kernels::KernelSpec& K, const fields::GridFunction& u, const Vec& x,
                const QuadratureConfig& q, double* err = nullptr);

// Grid-wide wrappers over all nodes of u.box.
OperatorEval apply(const kernels::KernelSpec& K, const fields::GridFunction& u,
                   const QuadratureConfig& q);
OperatorEval apply_nonsym(const kernels::KernelSpec& K, const fields::GridFunction& u,
                          const QuadratureConfig& q);
OperatorEval bilinear(const kernels::KernelSpec& K, const fields::GridFunction& u,
                      const fields::GridFunction& v, const QuadratureConfig& q);
OperatorEval apply_with_drift(const kernels::KernelSpec& K, const fields::GridFunction& u,
                              const QuadratureConfig& q);

// d_t u + L_{K^(t)} u at time levels[level]; times must hold >= 3 levels for a
// second-order time difference.
OperatorEval parabolic_apply(const kernels::KernelSpec& K_t,
                             const std::vector<fields::GridFunction>& levels,
                             const std::vector<double>& times, int level,
                             const QuadratureConfig& q);
double parabolic_apply_at(const kernels::KernelSpec& K_t,
                          const std::vector<fields::GridFunction>& levels,
                          const std::vector<double>& times, int level, const Vec& x,
                          const QuadratureConfig& q, double* err = nullptr);

// Hessian of u at x (closed form when available, else order-4 differences).
SymMat hessian_at(const fields::GridFunction& u, const Vec& x);
Vec gradient_at(const fields::GridFunction& u, const Vec& x);

}  // namespace nlb::op
