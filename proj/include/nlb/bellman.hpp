#pragma once

#include <vector>

#include "nlb/obstacle.hpp"

namespace nlb::bellman {

using obstacle::NonconvergenceError;
using obstacle::ParameterError;

struct FamilyMember {
    kernels::KernelSpec kernel;
    fields::GridFunction c;  // running cost c_gamma, C^{1,1} surrogate must be finite
};

// inf_gamma { L_gamma u - c_gamma } = 0 in the domain, u = exterior outside.
struct BellmanProblem {
    std::vector<FamilyMember> family;
    Box domain;
    fields::GridFunction exterior;
    void validate() const;  // nonempty family, shared (n, s)
};

struct BellmanReport {
    fields::GridFunction solution;
    std::vector<int> policy;  // argmin member per node, lowest index on ties
    double residual = 0.0;    // max_i |min_gamma (L_{gamma,h} u - c_gamma)_i|
    int iterations = 0;
    std::vector<double> residual_history;
    bool cycled = false;  // damped fallback was needed at least once
};

BellmanReport solve_policy_iteration(const BellmanProblem& p, double dx,
                                     const op::QuadratureConfig& q, double tol = 1e-8,
                                     int max_iter = 100);

struct SemiconvexityReport {
    obstacle::SemiconvexityReport raw;
    double data_scale = 0.0;  // sup_gamma ||c_gamma||_{C^{1,1}} + ||u||_inf
    double C = 0.0;           // -min second difference / data_scale, clamped at 0
};

// measurement region: the inner eighth of the domain
SemiconvexityReport verify_semiconvexity(const fields::GridFunction& u,
                                         const BellmanProblem& p, const Vec& e,
                                         const std::vector<double>& h_list);

}  // namespace nlb::bellman
