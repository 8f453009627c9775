#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nlb/fields.hpp"
#include "nlb/kernels.hpp"
#include "nlb/operator.hpp"

namespace nlb::obstacle {

struct DiscretizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonconvergenceError : std::runtime_error {
    std::vector<double> residual_history;
    NonconvergenceError(const std::string& msg, std::vector<double> hist)
        : std::runtime_error(msg), residual_history(std::move(hist)) {}
};
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// min{ L u, u - phi } = 0 in the domain, u = exterior data outside.
struct ObstacleProblem {
    kernels::KernelSpec kernel;
    Box domain;
    fields::GridFunction phi;       // obstacle
    fields::GridFunction rhs;       // f (zero-obstacle form min{Lv - f, v} = 0)
    fields::GridFunction exterior;  // u outside the domain (evaluated beyond the box)
    bool has_rhs = false;
};

// Monotone discrete operator: (L_h u)_i = (A u)_i - load_i, exterior folded
// into load. Off-diagonals of A are <= 0.
struct AssembledOperator {
    Eigen::MatrixXd A;
    Eigen::VectorXd load;
    std::vector<Vec> nodes;
    double dx = 0.0;
    std::array<int, 3> shape{1, 1, 1};
};

AssembledOperator assemble(const ObstacleProblem& p, double dx,
                           const op::QuadratureConfig& q);

enum class Method { PSOR, PolicyIteration };

struct FreeBoundaryPoint {
    Vec node;      // grid node flagged on the boundary
    Vec location;  // sub-grid position from linear interpolation of u - phi
};

struct ObstacleSolveReport {
    fields::GridFunction solution;
    double residual = 0.0;  // max |min(L_h u - f, u - phi)|
    int iterations = 0;
    std::vector<double> residual_history;
    std::vector<long> active_set;  // flat node indices with u = phi
    std::vector<FreeBoundaryPoint> free_boundary;
};

ObstacleSolveReport solve(const ObstacleProblem& p, double dx, const op::QuadratureConfig& q,
                          Method method, double tol = 1e-8, int max_iter = 100000,
                          double omega = 1.5);

// LCP solve against an already assembled operator (shared with the bellman and
// parabolic modules): min{ A u - c, u - lower } = 0.
Eigen::VectorXd solve_lcp(const Eigen::MatrixXd& A, const Eigen::VectorXd& c,
                          const Eigen::VectorXd& lower, Method method, double tol,
                          int max_iter, double omega, int* iterations,
                          std::vector<double>* history);

struct SemiconvexityReport {
    double min_second_difference = 0.0;
    Vec argmin_node;
    double argmin_h = 0.0;
    double implied_C = 0.0;  // -min / data_scale, clamped at 0
};

SemiconvexityReport measure_semiconvexity(const fields::GridFunction& u, const Vec& e,
                                          const std::vector<double>& h_list, const Box& region,
                                          double data_scale);

// max of |f|, |f'|, |f''| over the region by finite differences
double c11_surrogate(const fields::GridFunction& f, const Box& region);

struct ExponentFit {
    double beta = 0.0;
    double residual = 0.0;  // rms misfit in log-log space
    std::vector<double> radii, sups;
};

ExponentFit fit_regularity_exponent(const fields::GridFunction& u,
                                    const fields::GridFunction& phi, const Vec& x0,
                                    const std::vector<double>& radii);

struct ProfileFit {
    double c0 = 0.0;
    Vec e;
    double residual = 0.0;  // rms misfit / data scale
    bool regular = false;
    double data_scale = 0.0;
};

ProfileFit fit_blowup_profile(const fields::GridFunction& u, const fields::GridFunction& phi,
                              const Vec& x0, double window, double s);

struct ConvexityReport {
    bool hypotheses_ok = false;   // (1.6) spot-check by quadrature
    bool checked = false;         // assertion ran (skipped when hypotheses fail)
    double min_second_diff = 0.0;
    std::vector<double> zoom_factors;
    std::vector<double> zoom_negative_part;  // negative part of min D^2 per zoom
    bool pass = false;
};

ConvexityReport check_blowup_convexity(const kernels::KernelSpec& K,
                                       const fields::GridFunction& u0,
                                       const std::vector<double>& h_list,
                                       const std::vector<double>& zooms, double s,
                                       double alpha, const op::QuadratureConfig& q);

// rhs of the problem truncated to twice the domain: f~ = -L(u 1_{outside}) + f
fields::GridFunction truncate_problem(const fields::GridFunction& u,
                                      const fields::GridFunction& f,
                                      const kernels::KernelSpec& K,
                                      const op::QuadratureConfig& q);

}  // namespace nlb::obstacle
