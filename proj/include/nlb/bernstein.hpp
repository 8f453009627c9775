#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nlb/fields.hpp"
#include "nlb/kernels.hpp"
#include "nlb/operator.hpp"

namespace nlb::bernstein {

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SearchFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class VariantTag {
    FirstOrder,
    PosPart,
    DiffQuot,
    DiffQuotPosPart,
    DiffQuotImproved,
    DiffQuotImprovedPosPart,
    HolderQuot,
    HolderQuotPosPart,
    SecondOrder,
    SecondOrderDiffQuot,
    Parabolic,
    ParabolicPosPart,
    Drift,
    DriftPosPart,
    GeneralLevy,
    GeneralLevyPosPart,
};

std::string variant_name(VariantTag t);
VariantTag variant_from_name(const std::string& name);
std::vector<VariantTag> all_variants();
bool variant_needs_h(VariantTag t);
bool variant_needs_alpha(VariantTag t);
bool variant_is_pos_part(VariantTag t);
// radius of the validity region (infinity when the estimate is global)
double variant_region_radius(VariantTag t);

struct KeyEstimateVariant {
    VariantTag tag = VariantTag::FirstOrder;
    Vec e;           // direction (unit) for derivative variants
    Vec h;           // difference step, |h| <= 1/8 where required
    double alpha = 0.0;
    fields::CutoffFunction eta;      // eta (eta_2 in the parabolic case)
    fields::CutoffFunction eta_bar;  // second cutoff for the SecondOrder variants
    bool has_eta_bar = false;
    Vec drift;  // b for the Drift variants

    // parabolic variants: space-time function and the evaluation time
    std::function<double(double, const Vec&)> ut;
    double time = 0.5;

    void validate(const kernels::KernelSpec& K, int dim) const;
};

struct BernsteinReport {
    std::vector<Vec> nodes;
    std::vector<double> lhs, rhs, defect, error;  // defect = lhs - rhs
    double sigma = 0.0;
    double max_defect = 0.0;
    long max_defect_index = -1;
    double tolerance = 0.0;
    bool pass = false;
    void save_csv(const std::string& path) const;
};

// grid nodes of u inside the variant region, minus a 2dx boundary collar and
// the degenerate ring 0 < eta < 1e-3
std::vector<Vec> evaluation_nodes(const fields::GridFunction& u,
                                  const KeyEstimateVariant& variant);

BernsteinReport check_key_estimate(const kernels::KernelSpec& K,
                                   const KeyEstimateVariant& variant,
                                   const fields::GridFunction& u, double sigma,
                                   const op::QuadratureConfig& q, const std::vector<Vec>& nodes,
                                   double tol = 0.0);

struct FindSigmaReport {
    double sigma_star = 0.0;
    int binding_member = -1;
    Vec binding_node;
    double defect_at_sigma = 0.0;
    std::vector<BernsteinReport> verification;  // final pass at sigma_star
};

FindSigmaReport find_min_sigma(const kernels::KernelSpec& K, const KeyEstimateVariant& variant,
                               const std::vector<fields::GridFunction>& ensemble,
                               const op::QuadratureConfig& q, double sigma_max = 1e6,
                               double rel_tol = 1e-3);

struct InterpolationReport {
    double c_required = 0.0;
    double ceiling = 0.0;
    bool pass = false;
    std::vector<Vec> nodes;
    std::vector<double> lhs, grad_term, extra_term, buu_term;
};

InterpolationReport check_interpolation(const kernels::KernelSpec& K, double delta,
                                        const fields::GridFunction& u, const Vec& e,
                                        bool pos_part, const op::QuadratureConfig& q,
                                        const std::vector<Vec>& nodes, double ceiling = 1e4);

struct CutoffReport {
    double c1_measured = 0.0;  // sup L(eta^2)/(||eta^2||_{C^{1,1}} * eps-power)
    double c2_measured = 0.0;  // sup B(eta,eta)/(||grad eta||^2 eps^{2-2s})
    double c1_ceiling = 0.0, c2_ceiling = 0.0;
    bool pass = false;
};

CutoffReport check_cutoff_estimates(const kernels::KernelDecomposition& K1,
                                    const fields::CutoffFunction& eta, double eps,
                                    const op::QuadratureConfig& q,
                                    const std::vector<Vec>& nodes, double c1_ceiling = 1e3,
                                    double c2_ceiling = 1e3);

struct ProductRuleReport {
    std::vector<Vec> nodes;
    std::vector<double> residual, error;
    double max_residual = 0.0;
    bool pass = false;
};

ProductRuleReport check_product_rule(const kernels::KernelSpec& K,
                                     const fields::GridFunction& u,
                                     const fields::GridFunction& v,
                                     const op::QuadratureConfig& q,
                                     const std::vector<Vec>& nodes);

// Seeded smooth test functions: Gaussian mixtures (kind 0) and band-limited
// trigonometric sums windowed to decay (kind 1); analytic exterior, closed
// gradient/Hessian, normalized to sup-norm ~ 1.
fields::GridFunction random_field(int n, const Box& box, double dx, unsigned seed,
                                  int kind = 0);
std::vector<fields::GridFunction> make_ensemble(int n, const Box& box, double dx, int count,
                                                unsigned seed);

}  // namespace nlb::bernstein
