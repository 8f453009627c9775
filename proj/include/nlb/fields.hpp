#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlb/geometry.hpp"

namespace nlb::fields {

struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Exterior { Zero, Constant, Analytic, Clamp };

std::string exterior_name(Exterior e);
Exterior exterior_from_name(const std::string& name);

// Function on a uniform grid over box with a mandatory exterior rule.
// Immutable value object after construction; operations return new instances.
struct GridFunction {
    Box box;
    double dx = 0.0;
    std::array<int, 3> shape{1, 1, 1};  // nodes per axis, axes >= dim are 1
    std::vector<double> values;         // row-major, axis 0 fastest

    Exterior exterior = Exterior::Zero;
    double exterior_constant = 0.0;

    // Optional closed form backing the samples. When present, eval() uses it
    // everywhere (it agrees with the stored values at nodes by construction);
    // eval_grid() always interpolates the samples.
    std::function<double(const Vec&)> closed_form;
    std::function<Vec(const Vec&)> closed_grad;
    std::function<SymMat(const Vec&)> closed_hess;

    // Analytic exterior for sampled fields without a closed form (e.g. solver
    // output with prescribed exterior data).
    std::function<double(const Vec&)> exterior_form;

    bool cubic = false;          // cubic instead of multilinear interpolation
    bool interior_only = false;  // evaluation outside the box raises

    int dim() const { return box.n; }
    long node_count() const { return (long)shape[0] * shape[1] * shape[2]; }
    Vec node_point(long flat) const;
    long flat_index(int i, int j, int k) const {
        return i + (long)shape[0] * (j + (long)shape[1] * k);
    }

    double eval(const Vec& x) const;
    double eval_grid(const Vec& x) const;  // interpolation/exterior path only
    double operator()(const Vec& x) const { return eval(x); }

    double sup_norm() const;

    static GridFunction from_function(const Box& box, double dx,
                                      std::function<double(const Vec&)> f,
                                      Exterior ext = Exterior::Analytic,
                                      double ext_const = 0.0);
    static GridFunction from_values(const Box& box, double dx, std::vector<double> values,
                                    Exterior ext, double ext_const = 0.0);

    void save_csv(const std::string& path) const;
    static GridFunction load_csv(const std::string& path, Exterior ext, double ext_const = 0.0);
    void save_binary(const std::string& path) const;
    static GridFunction load_binary(const std::string& path);
};

// Radial C^{1,1} (in fact C^2) cutoff: 1 on B_{r0}(center), 0 outside
// B_{r1}(center), quintic ramp between. Optional temporal factor eta1 with
// eta1^{2s} Lipschitz on [t0, t1] for parabolic runs.
struct CutoffFunction {
    Vec center;
    double r0 = 0.5;
    double r1 = 1.0;

    bool has_time = false;
    double t0 = 0.0, t1 = 1.0;  // eta1 = 0 at t0, 1 at t1
    double two_s = 1.0;         // 2s in the eta1^{2s} Lipschitz requirement

    CutoffFunction() = default;
    CutoffFunction(const Vec& c, double inner, double outer);

    double eval(const Vec& x) const;
    Vec grad(const Vec& x) const;
    SymMat hess(const Vec& x) const;
    double operator()(const Vec& x) const { return eval(x); }

    double time_factor(double t) const;  // eta1(t)

    // sup of |eta|, |grad eta|, Lipschitz constant of grad eta
    double c11_norm() const;

    GridFunction sample(const Box& box, double dx) const;
};

// D_h u(x) = (u(x+h) - u(x)) / |h|
GridFunction diff_quotient(const GridFunction& u, const Vec& h);
// u_h(x) = int_0^1 u(x + t h) dt
GridFunction average(const GridFunction& u, const Vec& h);
// D^alpha_h u = (u(x+h) - u(x)) / |h|^alpha
GridFunction holder_quotient(const GridFunction& u, const Vec& h, double alpha);
// partial_e u or partial^2_ee u; analytic when the closed form provides one,
// otherwise order-4 central differences with step dx
GridFunction directional_derivatives(const GridFunction& u, const Vec& e, int order);

}  // namespace nlb::fields
