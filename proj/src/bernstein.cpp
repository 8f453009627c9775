#include "nlb/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "nlb/quadrature.hpp"

namespace nlb::bernstein {

namespace {

const struct {
    VariantTag tag;
    const char* name;
} kVariants[] = {
    {VariantTag::FirstOrder, "first-order"},
    {VariantTag::PosPart, "pos-part"},
    {VariantTag::DiffQuot, "diff-quot"},
    {VariantTag::DiffQuotPosPart, "diff-quot-pos-part"},
    {VariantTag::DiffQuotImproved, "diff-quot-improved"},
    {VariantTag::DiffQuotImprovedPosPart, "diff-quot-improved-pos-part"},
    {VariantTag::HolderQuot, "holder-quot"},
    {VariantTag::HolderQuotPosPart, "holder-quot-pos-part"},
    {VariantTag::SecondOrder, "second-order"},
    {VariantTag::SecondOrderDiffQuot, "second-order-diff-quot"},
    {VariantTag::Parabolic, "parabolic"},
    {VariantTag::ParabolicPosPart, "parabolic-pos-part"},
    {VariantTag::Drift, "drift"},
    {VariantTag::DriftPosPart, "drift-pos-part"},
    {VariantTag::GeneralLevy, "general-levy"},
    {VariantTag::GeneralLevyPosPart, "general-levy-pos-part"},
};

}  // namespace

std::string variant_name(VariantTag t) {
    for (const auto& v : kVariants)
        if (v.tag == t) return v.name;
    return "?";
}

VariantTag variant_from_name(const std::string& name) {
    for (const auto& v : kVariants)
        if (name == v.name) return v.tag;
    throw ParameterError("unknown variant '" + name + "'");
}

std::vector<VariantTag> all_variants() {
    std::vector<VariantTag> out;
    for (const auto& v : kVariants) out.push_back(v.tag);
    return out;
}

bool variant_needs_h(VariantTag t) {
    switch (t) {
        case VariantTag::DiffQuot:
        case VariantTag::DiffQuotPosPart:
        case VariantTag::DiffQuotImproved:
        case VariantTag::DiffQuotImprovedPosPart:
        case VariantTag::HolderQuot:
        case VariantTag::HolderQuotPosPart:
        case VariantTag::SecondOrderDiffQuot: return true;
        default: return false;
    }
}

bool variant_needs_alpha(VariantTag t) {
    return t == VariantTag::HolderQuot || t == VariantTag::HolderQuotPosPart;
}

bool variant_is_pos_part(VariantTag t) {
    switch (t) {
        case VariantTag::PosPart:
        case VariantTag::DiffQuotPosPart:
        case VariantTag::DiffQuotImprovedPosPart:
        case VariantTag::HolderQuotPosPart:
        case VariantTag::ParabolicPosPart:
        case VariantTag::DriftPosPart:
        case VariantTag::GeneralLevyPosPart: return true;
        default: return false;
    }
}

double variant_region_radius(VariantTag t) {
    switch (t) {
        case VariantTag::DiffQuotImproved:
        case VariantTag::DiffQuotImprovedPosPart:
        case VariantTag::SecondOrder:
        case VariantTag::SecondOrderDiffQuot: return 0.25;
        default: return 1e300;
    }
}

void KeyEstimateVariant::validate(const kernels::KernelSpec& K, int dim) const {
    if (variant_needs_h(tag)) {
        if (h.norm() <= 0) throw ParameterError("variant requires a nonzero step h");
        if (h.norm() > 0.125 + 1e-12) throw ParameterError("variant requires |h| <= 1/8");
    } else if (tag != VariantTag::SecondOrder) {
        if (e.norm() <= 0) throw ParameterError("variant requires a direction e");
    }
    if (tag == VariantTag::SecondOrder && e.norm() <= 0)
        throw ParameterError("variant requires a direction e");
    if (variant_needs_alpha(tag)) {
        if (!(alpha > 0 && alpha < 1)) throw ParameterError("need alpha in (0,1)");
    } else if (alpha != 0.0) {
        throw ParameterError("alpha given for a variant that does not take it");
    }
    bool needs_bar =
        tag == VariantTag::SecondOrder || tag == VariantTag::SecondOrderDiffQuot;
    if (needs_bar && !has_eta_bar)
        throw ParameterError("second-order variants require the cutoff eta_bar");
    if (!needs_bar && has_eta_bar)
        throw ParameterError("eta_bar given for a variant that does not take it");
    bool is_drift = tag == VariantTag::Drift || tag == VariantTag::DriftPosPart;
    if (is_drift) {
        if (drift.norm() > K.Lambda + 1e-12)
            throw ParameterError("drift must satisfy |b| <= Lambda");
    } else if (drift.norm() != 0.0) {
        throw ParameterError("drift given for a variant that does not take it");
    }
    bool is_levy = tag == VariantTag::GeneralLevy || tag == VariantTag::GeneralLevyPosPart;
    if (is_levy && K.family != kernels::Family::GeneralLevy)
        throw ParameterError("general-levy variants require a general Levy kernel");
    bool is_par = tag == VariantTag::Parabolic || tag == VariantTag::ParabolicPosPart;
    if (is_par && !ut) throw ParameterError("parabolic variants require a space-time function");
    // SecondOrder doubles as the parabolic Cor 7.3 shape when ut is set
    if (!is_par && ut && tag != VariantTag::SecondOrder)
        throw ParameterError("space-time data given for an elliptic variant");
    (void)dim;
}

namespace {

using fields::GridFunction;

GridFunction lift(const GridFunction& like, std::function<double(const Vec&)> f) {
    return GridFunction::from_function(like.box, like.dx, std::move(f),
                                       fields::Exterior::Analytic);
}

GridFunction pos_part_field(const GridFunction& g) {
    GridFunction base = g;
    GridFunction out = g;
    out.closed_form = [base](const Vec& x) { return std::max(base.eval(x), 0.0); };
    out.closed_grad = nullptr;
    out.closed_hess = nullptr;
    for (long p = 0; p < out.node_count(); ++p)
        out.values[p] = std::max(out.values[p], 0.0);
    return out;
}

GridFunction neg_part_field(const GridFunction& g) {  // w_- = max(-w, 0)
    GridFunction base = g;
    GridFunction out = g;
    out.closed_form = [base](const Vec& x) { return std::max(-base.eval(x), 0.0); };
    out.closed_grad = nullptr;
    out.closed_hess = nullptr;
    for (long p = 0; p < out.node_count(); ++p)
        out.values[p] = std::max(-out.values[p], 0.0);
    return out;
}

GridFunction square(const GridFunction& g) {
    GridFunction base = g;
    GridFunction out = g;
    out.closed_form = [base](const Vec& x) {
        double v = base.eval(x);
        return v * v;
    };
    if (base.closed_grad) {
        auto bg = base.closed_grad;
        GridFunction b2 = base;
        out.closed_grad = [b2, bg](const Vec& x) { return bg(x) * (2.0 * b2.eval(x)); };
    } else {
        out.closed_grad = nullptr;
    }
    out.closed_hess = nullptr;
    for (long p = 0; p < out.node_count(); ++p) out.values[p] *= out.values[p];
    return out;
}

// eta * u with analytic derivatives where u provides them
GridFunction cutoff_times(const fields::CutoffFunction& eta, const GridFunction& u) {
    GridFunction base = u;
    fields::CutoffFunction et = eta;
    GridFunction out = u;
    out.closed_form = [base, et](const Vec& x) { return et.eval(x) * base.eval(x); };
    if (base.closed_grad) {
        auto bg = base.closed_grad;
        GridFunction b2 = base;
        out.closed_grad = [b2, bg, et](const Vec& x) {
            return bg(x) * et.eval(x) + et.grad(x) * b2.eval(x);
        };
        if (base.closed_hess) {
            auto bh = base.closed_hess;
            out.closed_hess = [b2, bg, bh, et](const Vec& x) {
                SymMat H;
                H.n = x.n;
                SymMat Hu = bh(x), He = et.hess(x);
                Vec gu = bg(x), ge = et.grad(x);
                double e = et.eval(x), uv = b2.eval(x);
                for (int i = 0; i < x.n; ++i)
                    for (int j = i; j < x.n; ++j)
                        H.set(i, j, e * Hu(i, j) + gu[i] * ge[j] + ge[i] * gu[j] +
                                        uv * He(i, j));
                return H;
            };
        } else {
            out.closed_hess = nullptr;
        }
    } else {
        out.closed_grad = nullptr;
        out.closed_hess = nullptr;
    }
    for (long p = 0; p < out.node_count(); ++p) out.values[p] = out.closed_form(out.node_point(p));
    return out;
}

using PointFn = std::function<double(const Vec&, double*)>;

struct Assembled {
    PointFn Lpsi0, Lw2;  // sigma-independent and sigma-linear parts of L(psi)
    PointFn rhs0, rhs1;  // RHS = rhs0 + sigma * rhs1
};

// the operator a variant applies: L, L + b.grad, or the nonsymmetric L
PointFn make_lop(const kernels::KernelSpec& K, const KeyEstimateVariant& v,
                 const GridFunction& field, const op::QuadratureConfig& q) {
    bool is_drift = v.tag == VariantTag::Drift || v.tag == VariantTag::DriftPosPart;
    kernels::KernelSpec Kc = K;
    GridFunction f = field;
    if (is_drift) {
        Vec b = v.drift;
        return [Kc, f, q, b](const Vec& x, double* err) {
            double val = Kc.symmetric ? op::apply_at(Kc, f, x, q, err)
                                      : op::apply_nonsym_at(Kc, f, x, q, err);
            return val + b.dot(op::gradient_at(f, x));
        };
    }
    return [Kc, f, q](const Vec& x, double* err) { return op::apply_at(Kc, f, x, q, err); };
}

// [w](x) averaged along h with Gauss-Legendre in t
double line_average(const std::function<double(const Vec&, double*)>& w, const Vec& x,
                    const Vec& h, double* err) {
    static std::vector<double> gx, gw;
    if (gx.empty()) quad::gauss_legendre(8, gx, gw);
    double acc = 0.0, eacc = 0.0;
    for (size_t i = 0; i < gx.size(); ++i) {
        double t = 0.5 * (1.0 + gx[i]);
        double e = 0.0;
        acc += 0.5 * gw[i] * w(x + h * t, &e);
        eacc += 0.5 * gw[i] * e;
    }
    if (err) *err = eacc;
    return acc;
}

Assembled assemble_elliptic(const kernels::KernelSpec& K, const KeyEstimateVariant& v,
                            const GridFunction& u, const op::QuadratureConfig& q) {
    fields::CutoffFunction eta = v.eta;
    auto eta2 = [eta](const Vec& x) {
        double e = eta.eval(x);
        return e * e;
    };
    Assembled A;
    switch (v.tag) {
        case VariantTag::FirstOrder:
        case VariantTag::GeneralLevy:
        case VariantTag::Drift:
        case VariantTag::PosPart:
        case VariantTag::GeneralLevyPosPart:
        case VariantTag::DriftPosPart: {
            bool pos = variant_is_pos_part(v.tag);
            GridFunction du = fields::directional_derivatives(u, v.e, 1);
            GridFunction w = pos ? pos_part_field(du) : du;
            GridFunction psi0 = lift(u, [eta2, w](const Vec& x) {
                double ww = w.eval(x);
                return eta2(x) * ww * ww;
            });
            GridFunction usq = square(u);
            A.Lpsi0 = make_lop(K, v, psi0, q);
            A.Lw2 = make_lop(K, v, usq, q);
            PointFn Ldu = make_lop(K, v, du, q);
            PointFn Lu = make_lop(K, v, u, q);
            GridFunction ub = u, wb = w;
            A.rhs0 = [eta2, Ldu, wb](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * eta2(x) * Ldu(x, &e) * wb.eval(x);
                if (err) *err = 2.0 * eta2(x) * std::abs(wb.eval(x)) * e;
                return val;
            };
            A.rhs1 = [Lu, ub](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * Lu(x, &e) * ub.eval(x);
                if (err) *err = 2.0 * std::abs(ub.eval(x)) * e;
                return val;
            };
            break;
        }
        case VariantTag::DiffQuot:
        case VariantTag::DiffQuotPosPart:
        case VariantTag::HolderQuot:
        case VariantTag::HolderQuotPosPart: {
            bool pos = variant_is_pos_part(v.tag);
            bool holder = variant_needs_alpha(v.tag);
            GridFunction Du = holder ? fields::holder_quotient(u, v.h, v.alpha)
                                     : fields::diff_quotient(u, v.h);
            GridFunction w = pos ? pos_part_field(Du) : Du;
            GridFunction uh = fields::average(u, v.h);
            GridFunction psi0 = lift(u, [eta2, w](const Vec& x) {
                double ww = w.eval(x);
                return eta2(x) * ww * ww;
            });
            GridFunction uh2 = square(uh);
            A.Lpsi0 = make_lop(K, v, psi0, q);
            A.Lw2 = make_lop(K, v, uh2, q);
            PointFn LDu = make_lop(K, v, Du, q);
            PointFn Luh = make_lop(K, v, uh, q);
            GridFunction wb = w, uhb = uh;
            A.rhs0 = [eta2, LDu, wb](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * eta2(x) * LDu(x, &e) * wb.eval(x);
                if (err) *err = 2.0 * eta2(x) * std::abs(wb.eval(x)) * e;
                return val;
            };
            A.rhs1 = [Luh, uhb](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * Luh(x, &e) * uhb.eval(x);
                if (err) *err = 2.0 * std::abs(uhb.eval(x)) * e;
                return val;
            };
            break;
        }
        case VariantTag::DiffQuotImproved:
        case VariantTag::DiffQuotImprovedPosPart: {
            bool pos = variant_is_pos_part(v.tag);
            GridFunction Du = fields::diff_quotient(u, v.h);
            GridFunction w = pos ? pos_part_field(Du) : Du;
            GridFunction psi0 = lift(u, [eta2, w](const Vec& x) {
                double ww = w.eval(x);
                return eta2(x) * ww * ww;
            });
            GridFunction u2h = fields::average(square(u), v.h);  // [u^2]_h
            A.Lpsi0 = make_lop(K, v, psi0, q);
            A.Lw2 = make_lop(K, v, u2h, q);
            PointFn LDu = make_lop(K, v, Du, q);
            PointFn Lu = make_lop(K, v, u, q);
            GridFunction wb = w, ub = u;
            Vec h = v.h;
            A.rhs0 = [eta2, LDu, wb](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * eta2(x) * LDu(x, &e) * wb.eval(x);
                if (err) *err = 2.0 * eta2(x) * std::abs(wb.eval(x)) * e;
                return val;
            };
            A.rhs1 = [Lu, ub, h](const Vec& x, double* err) {
                // 2 [L(u) u]_h
                auto w = [&](const Vec& y, double* e) { return Lu(y, e) * ub.eval(y); };
                double e = 0.0;
                double val = 2.0 * line_average(w, x, h, &e);
                if (err) *err = 2.0 * e * 1.5;  // |u| absorbed into the node errors
                return val;
            };
            break;
        }
        case VariantTag::SecondOrder: {
            GridFunction ut = cutoff_times(v.eta, u);
            GridFunction d1 = fields::directional_derivatives(ut, v.e, 1);
            GridFunction d2 = fields::directional_derivatives(ut, v.e, 2);
            GridFunction nd2 = lift(u, [d2](const Vec& x) { return -d2.eval(x); });
            GridFunction w = pos_part_field(nd2);
            fields::CutoffFunction bar = v.eta_bar;
            auto bar2 = [bar](const Vec& x) {
                double e = bar.eval(x);
                return e * e;
            };
            GridFunction psi0 = lift(u, [bar2, w](const Vec& x) {
                double ww = w.eval(x);
                return bar2(x) * ww * ww;
            });
            GridFunction d1sq = square(d1);
            A.Lpsi0 = make_lop(K, v, psi0, q);
            A.Lw2 = make_lop(K, v, d1sq, q);
            PointFn Lnd2 = make_lop(K, v, nd2, q);
            PointFn Ld1 = make_lop(K, v, d1, q);
            GridFunction wb = w, d1b = d1;
            A.rhs0 = [bar2, Lnd2, wb](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * bar2(x) * Lnd2(x, &e) * wb.eval(x);
                if (err) *err = 2.0 * bar2(x) * std::abs(wb.eval(x)) * e;
                return val;
            };
            A.rhs1 = [Ld1, d1b](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * Ld1(x, &e) * d1b.eval(x);
                if (err) *err = 2.0 * std::abs(d1b.eval(x)) * e;
                return val;
            };
            break;
        }
        case VariantTag::SecondOrderDiffQuot: {
            GridFunction ut = cutoff_times(v.eta, u);
            GridFunction D1 = fields::diff_quotient(ut, v.h);
            GridFunction D2 = fields::diff_quotient(D1, -v.h);  // D_{-h} D_h
            GridFunction w = pos_part_field(D2);
            fields::CutoffFunction bar = v.eta_bar;
            auto bar2 = [bar](const Vec& x) {
                double e = bar.eval(x);
                return e * e;
            };
            GridFunction psi0 = lift(u, [bar2, w](const Vec& x) {
                double ww = w.eval(x);
                return bar2(x) * ww * ww;
            });
            GridFunction w2 = fields::average(square(D1), -v.h);  // [(D_h u~)^2]_{-h}
            A.Lpsi0 = make_lop(K, v, psi0, q);
            A.Lw2 = make_lop(K, v, w2, q);
            PointFn LD2 = make_lop(K, v, D2, q);
            PointFn LD1 = make_lop(K, v, D1, q);
            GridFunction wb = w, D1b = D1;
            Vec mh = -v.h;
            A.rhs0 = [bar2, LD2, wb](const Vec& x, double* err) {
                double e = 0.0;
                double val = 2.0 * bar2(x) * LD2(x, &e) * wb.eval(x);
                if (err) *err = 2.0 * bar2(x) * std::abs(wb.eval(x)) * e;
                return val;
            };
            A.rhs1 = [LD1, D1b, mh](const Vec& x, double* err) {
                auto w = [&](const Vec& y, double* e) { return LD1(y, e) * D1b.eval(y); };
                double e = 0.0;
                double val = 2.0 * line_average(w, x, mh, &e);
                if (err) *err = 2.0 * e * 1.5;
                return val;
            };
            break;
        }
        default: throw ParameterError("parabolic variants use the space-time assembly");
    }
    return A;
}

Assembled assemble_parabolic(const kernels::KernelSpec& K, const KeyEstimateVariant& v,
                             const GridFunction& tmpl, const op::QuadratureConfig& q) {
    const double dt = 1e-3;
    const int C = 2;  // center slice index
    bool pos = variant_is_pos_part(v.tag);
    fields::CutoffFunction eta = v.eta;
    auto f = v.ut;
    double tc = v.time;

    std::vector<double> times(5);
    std::vector<GridFunction> us(5), dus(5), psi0s(5), w2s(5);
    for (int k = 0; k < 5; ++k) {
        double t = tc + (k - C) * dt;
        times[k] = t;
        us[k] = lift(tmpl, [f, t](const Vec& x) { return f(t, x); });
        dus[k] = fields::directional_derivatives(us[k], v.e, 1);
        double e1 = eta.time_factor(t);
        GridFunction du = dus[k], uk = us[k];
        psi0s[k] = lift(tmpl, [eta, e1, du, pos](const Vec& x) {
            double w = du.eval(x);
            if (pos) w = std::max(w, 0.0);
            double et = e1 * eta.eval(x);
            return et * et * w * w;
        });
        w2s[k] = square(us[k]);
    }
    kernels::KernelSpec Kc = K.at_time(tc);

    auto ddt = [dt, C](const std::vector<GridFunction>& s, const Vec& x) {
        double f1 = s[C + 1].eval(x) - s[C - 1].eval(x);
        double f2 = s[C + 2].eval(x) - s[C - 2].eval(x);
        return (8.0 * f1 - f2) / (12.0 * dt);
    };

    Assembled A;
    A.Lpsi0 = [psi0s, Kc, q, ddt](const Vec& x, double* err) {
        return ddt(psi0s, x) + op::apply_at(Kc, psi0s[2], x, q, err);
    };
    A.Lw2 = [w2s, Kc, q, ddt](const Vec& x, double* err) {
        return ddt(w2s, x) + op::apply_at(Kc, w2s[2], x, q, err);
    };
    double e1c = eta.time_factor(tc);
    GridFunction duc = dus[C], uc = us[C];
    A.rhs0 = [dus, duc, Kc, q, ddt, eta, e1c, pos](const Vec& x, double* err) {
        double e = 0.0;
        double Ldu = ddt(dus, x) + op::apply_at(Kc, duc, x, q, &e);
        double w = duc.eval(x);
        if (pos) w = std::max(w, 0.0);
        double et = e1c * eta.eval(x);
        if (err) *err = 2.0 * et * et * std::abs(w) * e;
        return 2.0 * et * et * Ldu * w;
    };
    A.rhs1 = [us, uc, Kc, q, ddt](const Vec& x, double* err) {
        double e = 0.0;
        double Lu = ddt(us, x) + op::apply_at(Kc, uc, x, q, &e);
        double w = uc.eval(x);
        if (err) *err = 2.0 * std::abs(w) * e;
        return 2.0 * Lu * w;
    };
    return A;
}

// Cor 7.3 shape: (d_t + L)(etabar^2 (d2 ut~)_+^2 + sigma (d1 ut~)^2) with
// ut~ = eta1(t) eta2(x) u(t, .)
Assembled assemble_parabolic_second(const kernels::KernelSpec& K,
                                    const KeyEstimateVariant& v, const GridFunction& tmpl,
                                    const op::QuadratureConfig& q) {
    const double dt = 1e-3;
    const int C = 2;
    fields::CutoffFunction eta = v.eta, bar = v.eta_bar;
    auto f = v.ut;
    double tc = v.time;

    std::vector<GridFunction> psi0s(5), w2s(5), d2s(5), d1s(5);
    for (int k = 0; k < 5; ++k) {
        double t = tc + (k - C) * dt;
        double e1 = eta.time_factor(t);
        GridFunction ut = lift(tmpl, [f, t, eta, e1](const Vec& x) {
            return e1 * eta.eval(x) * f(t, x);
        });
        d2s[k] = fields::directional_derivatives(ut, v.e, 2);
        d1s[k] = fields::directional_derivatives(ut, v.e, 1);
        GridFunction d2 = d2s[k];
        psi0s[k] = lift(tmpl, [bar, d2](const Vec& x) {
            double b = bar.eval(x);
            double w = std::max(d2.eval(x), 0.0);
            return b * b * w * w;
        });
        w2s[k] = square(d1s[k]);
    }
    kernels::KernelSpec Kc = K.at_time(tc);
    auto ddt = [dt, C](const std::vector<GridFunction>& s, const Vec& x) {
        double f1 = s[C + 1].eval(x) - s[C - 1].eval(x);
        double f2 = s[C + 2].eval(x) - s[C - 2].eval(x);
        return (8.0 * f1 - f2) / (12.0 * dt);
    };

    Assembled A;
    A.Lpsi0 = [psi0s, Kc, q, ddt](const Vec& x, double* err) {
        return ddt(psi0s, x) + op::apply_at(Kc, psi0s[2], x, q, err);
    };
    A.Lw2 = [w2s, Kc, q, ddt](const Vec& x, double* err) {
        return ddt(w2s, x) + op::apply_at(Kc, w2s[2], x, q, err);
    };
    GridFunction d2c = d2s[C], d1c = d1s[C];
    A.rhs0 = [d2s, d2c, Kc, q, ddt, bar](const Vec& x, double* err) {
        double e = 0.0;
        double Ld2 = ddt(d2s, x) + op::apply_at(Kc, d2c, x, q, &e);
        double b = bar.eval(x);
        double w = std::max(d2c.eval(x), 0.0);
        if (err) *err = 2.0 * b * b * w * e;
        return 2.0 * b * b * Ld2 * w;
    };
    A.rhs1 = [d1s, d1c, Kc, q, ddt](const Vec& x, double* err) {
        double e = 0.0;
        double Ld1 = ddt(d1s, x) + op::apply_at(Kc, d1c, x, q, &e);
        double w = d1c.eval(x);
        if (err) *err = 2.0 * std::abs(w) * e;
        return 2.0 * Ld1 * w;
    };
    return A;
}

Assembled assemble(const kernels::KernelSpec& K, const KeyEstimateVariant& v,
                   const GridFunction& u, const op::QuadratureConfig& q) {
    v.validate(K, u.dim());
    if (v.tag == VariantTag::Parabolic || v.tag == VariantTag::ParabolicPosPart)
        return assemble_parabolic(K, v, u, q);
    if (v.tag == VariantTag::SecondOrder && v.ut)
        return assemble_parabolic_second(K, v, u, q);
    return assemble_elliptic(K, v, u, q);
}

}  // namespace

std::vector<Vec> evaluation_nodes(const fields::GridFunction& u,
                                  const KeyEstimateVariant& variant) {
    std::vector<Vec> out;
    double R = variant_region_radius(variant.tag);
    bool use_bar = variant.has_eta_bar;
    const fields::CutoffFunction& eta = use_bar ? variant.eta_bar : variant.eta;
    for (long p = 0; p < u.node_count(); ++p) {
        Vec x = u.node_point(p);
        if (u.box.inner_distance(x) < 2.0 * u.dx - 1e-12) continue;
        if (x.norm() > R + 1e-12) continue;
        double ev = eta.eval(x);
        if (ev > 0.0 && ev < 1e-3) continue;
        out.push_back(x);
    }
    return out;
}

BernsteinReport check_key_estimate(const kernels::KernelSpec& K,
                                   const KeyEstimateVariant& variant,
                                   const fields::GridFunction& u, double sigma,
                                   const op::QuadratureConfig& q, const std::vector<Vec>& nodes,
                                   double tol) {
    if (sigma < 0) throw ParameterError("sigma must be nonnegative");
    Assembled A = assemble(K, variant, u, q);
    BernsteinReport rep;
    rep.sigma = sigma;
    rep.tolerance = tol;
    rep.nodes = nodes;
    rep.pass = true;
    for (const Vec& x : nodes) {
        double e0 = 0, e1 = 0, e2 = 0, e3 = 0;
        double lhs = A.Lpsi0(x, &e0) + sigma * A.Lw2(x, &e1);
        double rhs = A.rhs0(x, &e2) + sigma * A.rhs1(x, &e3);
        double err = e0 + sigma * e1 + e2 + sigma * e3;
        double d = lhs - rhs;
        rep.lhs.push_back(lhs);
        rep.rhs.push_back(rhs);
        rep.defect.push_back(d);
        rep.error.push_back(err);
        if (rep.max_defect_index < 0 || d > rep.max_defect) {
            rep.max_defect = d;
            rep.max_defect_index = (long)rep.defect.size() - 1;
        }
        if (d > std::max(tol, 3.0 * err)) rep.pass = false;
    }
    return rep;
}

void BernsteinReport::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw fields::IoError("cannot open '" + path + "' for writing");
    int n = nodes.empty() ? 1 : nodes.front().n;
    out << "x1";
    for (int a = 1; a < n; ++a) out << ",x" << a + 1;
    out << ",lhs,rhs,defect,error\n";
    out.precision(17);
    for (size_t i = 0; i < nodes.size(); ++i) {
        out << nodes[i][0];
        for (int a = 1; a < n; ++a) out << "," << nodes[i][a];
        out << "," << lhs[i] << "," << rhs[i] << "," << defect[i] << "," << error[i] << "\n";
    }
}

FindSigmaReport find_min_sigma(const kernels::KernelSpec& K, const KeyEstimateVariant& variant,
                               const std::vector<fields::GridFunction>& ensemble,
                               const op::QuadratureConfig& q, double sigma_max,
                               double rel_tol) {
    if (ensemble.empty()) throw ParameterError("ensemble must be nonempty");
    // per (member, node): defect(sigma) = d0 + sigma*(slope), error(sigma) = e0 + sigma*e1
    struct Row {
        int member;
        Vec node;
        double d0, slope, e0, e1;
    };
    std::vector<Row> rows;
    for (int m = 0; m < (int)ensemble.size(); ++m) {
        Assembled A = assemble(K, variant, ensemble[m], q);
        auto nodes = evaluation_nodes(ensemble[m], variant);
        for (const Vec& x : nodes) {
            double ea = 0, eb = 0, ec = 0, ed = 0;
            double a = A.Lpsi0(x, &ea), b = A.Lw2(x, &eb);
            double c = A.rhs0(x, &ec), d = A.rhs1(x, &ed);
            rows.push_back({m, x, a - c, b - d, ea + ec, eb + ed});
        }
    }
    auto worst = [&](double sigma, const Row** arg) {
        double w = -1e300;
        for (const Row& r : rows) {
            double excess = (r.d0 + sigma * r.slope) - 3.0 * (r.e0 + sigma * r.e1);
            if (excess > w) {
                w = excess;
                if (arg) *arg = &r;
            }
        }
        return w;
    };
    FindSigmaReport rep;
    const Row* binding = nullptr;
    if (worst(0.0, &binding) <= 0.0) {
        rep.sigma_star = 0.0;
    } else if (worst(sigma_max, &binding) > 0.0) {
        throw SearchFailure("no admissible sigma <= " + std::to_string(sigma_max) +
                            "; worst defect " + std::to_string(binding->d0 +
                                                              sigma_max * binding->slope) +
                            " at member " + std::to_string(binding->member));
    } else {
        double lo = 0.0, hi = sigma_max;
        while (hi - lo > rel_tol * hi) {
            double mid = 0.5 * (lo + hi);
            if (worst(mid, nullptr) <= 0.0)
                hi = mid;
            else
                lo = mid;
        }
        rep.sigma_star = hi;
    }
    worst(rep.sigma_star, &binding);
    rep.binding_member = binding->member;
    rep.binding_node = binding->node;
    rep.defect_at_sigma = binding->d0 + rep.sigma_star * binding->slope;
    for (int m = 0; m < (int)ensemble.size(); ++m) {
        auto nodes = evaluation_nodes(ensemble[m], variant);
        rep.verification.push_back(
            check_key_estimate(K, variant, ensemble[m], rep.sigma_star, q, nodes));
    }
    return rep;
}

InterpolationReport check_interpolation(const kernels::KernelSpec& K, double delta,
                                        const fields::GridFunction& u, const Vec& e,
                                        bool pos_part, const op::QuadratureConfig& q,
                                        const std::vector<Vec>& nodes, double ceiling) {
    if (!(delta > 0)) throw ParameterError("delta must be positive");
    bool levy = K.family == kernels::Family::GeneralLevy;
    double lead = levy ? 1.0 / K.levy_g(delta) : std::pow(delta, 2.0 * K.s);
    double bcoef = levy ? std::pow(delta, -2.0) / K.levy_g(delta)
                        : std::pow(delta, 2.0 * K.s - 2.0);

    fields::GridFunction du = fields::directional_derivatives(u, e, 1);
    fields::GridFunction w = pos_part ? pos_part_field(du) : du;
    fields::GridFunction dneg = neg_part_field(du);

    InterpolationReport rep;
    rep.ceiling = ceiling;
    rep.nodes = nodes;
    double c_req = 0.0;
    for (const Vec& x : nodes) {
        double wx = w.eval(x);
        double lhs = wx * wx;
        double grad_term = lead * op::bilinear_at(K, w, w, x, q);
        double extra = 0.0;
        if (pos_part && wx > 0.0)
            extra = -lead * op::apply_at(K, dneg, x, q) * wx;
        double buu = op::bilinear_at(K, u, u, x, q);
        rep.lhs.push_back(lhs);
        rep.grad_term.push_back(grad_term);
        rep.extra_term.push_back(extra);
        rep.buu_term.push_back(bcoef * buu);
        double denom = bcoef * buu;
        double need = lhs - grad_term - extra;
        if (need > 0.0) {
            if (denom <= 1e-300)
                c_req = std::max(c_req, 1e300);  // inequality cannot be closed here
            else
                c_req = std::max(c_req, need / denom);
        }
    }
    rep.c_required = c_req;
    rep.pass = c_req <= ceiling;
    return rep;
}

CutoffReport check_cutoff_estimates(const kernels::KernelDecomposition& K1,
                                    const fields::CutoffFunction& eta, double eps,
                                    const op::QuadratureConfig& q,
                                    const std::vector<Vec>& nodes, double c1_ceiling,
                                    double c2_ceiling) {
    if (K1.radius > eps * (1.0 + 1e-12))
        throw kernels::SpecViolation("near kernel is not supported inside B_eps");
    const kernels::KernelSpec& base = *K1.spec;
    int n = base.dimension;
    double s = base.s;
    kernels::KernelDecomposition dec = K1;
    kernels::KernelSpec Knear = kernels::custom_kernel(
        n, s, [dec](const Vec& y) { return dec.near(y); }, base.lambda, base.Lambda, 0,
        base.symmetric, false);

    // grid template covering the cutoff support
    Box box;
    box.n = n;
    box.lo = Vec::zero(n);
    box.hi = Vec::zero(n);
    for (int a = 0; a < n; ++a) {
        box.lo.c[a] = eta.center[a] - eta.r1 - 1.0;
        box.hi.c[a] = eta.center[a] + eta.r1 + 1.0;
    }
    double dx = eps / 8.0;
    fields::CutoffFunction et = eta;
    fields::GridFunction eta2 = fields::GridFunction::from_function(
        box, dx, [et](const Vec& x) {
            double v = et.eval(x);
            return v * v;
        },
        fields::Exterior::Analytic);
    eta2.closed_grad = [et](const Vec& x) { return et.grad(x) * (2.0 * et.eval(x)); };
    eta2.closed_hess = [et](const Vec& x) {
        SymMat H;
        H.n = x.n;
        Vec g = et.grad(x);
        SymMat He = et.hess(x);
        double v = et.eval(x);
        for (int i = 0; i < x.n; ++i)
            for (int j = i; j < x.n; ++j)
                H.set(i, j, 2.0 * (g[i] * g[j] + v * He(i, j)));
        return H;
    };
    fields::GridFunction etaf = et.sample(box, dx);
    etaf.closed_grad = [et](const Vec& x) { return et.grad(x); };

    // global surrogates for the local C^{1,1} norms
    double w = eta.r1 - eta.r0;
    double sup_grad = 0.0, sup_d2 = 0.0, sup_grad2 = 0.0, sup_d2sq = 0.0;
    for (int i = 1; i <= 2048; ++i) {
        double t = (double)i / 2049.0;
        double r = eta.r0 + t * w;
        double sp = 30.0 * t * t * (1 - t) * (1 - t) / w;           // |eta'|
        double spp = std::abs(60.0 * t * (1 - t) * (1 - 2 * t)) / (w * w);  // |eta''|
        double ev = 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
        sup_grad = std::max(sup_grad, sp);
        sup_d2 = std::max(sup_d2, spp + sp / r);
        sup_grad2 = std::max(sup_grad2, 2.0 * ev * sp);
        sup_d2sq = std::max(sup_d2sq, 2.0 * sp * sp + 2.0 * ev * spp + 2.0 * ev * sp / r);
    }
    double eta2_c11 = std::max({1.0, sup_grad2, sup_d2sq});
    double grad_sup2 = sup_grad * sup_grad;

    CutoffReport rep;
    rep.c1_ceiling = c1_ceiling;
    rep.c2_ceiling = c2_ceiling;
    for (const Vec& x : nodes) {
        double L2 = base.symmetric ? op::apply_at(Knear, eta2, x, q)
                                   : op::apply_nonsym_at(Knear, eta2, x, q);
        double denom1;
        if (base.symmetric || s > 0.5)
            denom1 = eta2_c11 * std::pow(eps, 2.0 - 2.0 * s);
        else
            denom1 = eta2_c11 * (eps + et.eval(x)) * std::pow(eps, 1.0 - 2.0 * s);
        rep.c1_measured = std::max(rep.c1_measured, L2 / denom1);
        double B = op::bilinear_at(Knear, etaf, etaf, x, q);
        rep.c2_measured =
            std::max(rep.c2_measured, B / (grad_sup2 * std::pow(eps, 2.0 - 2.0 * s)));
    }
    rep.pass = rep.c1_measured <= c1_ceiling && rep.c2_measured <= c2_ceiling;
    return rep;
}

ProductRuleReport check_product_rule(const kernels::KernelSpec& K,
                                     const fields::GridFunction& u,
                                     const fields::GridFunction& v,
                                     const op::QuadratureConfig& q,
                                     const std::vector<Vec>& nodes) {
    fields::GridFunction ub = u, vb = v;
    fields::GridFunction uv = lift(u, [ub, vb](const Vec& x) { return ub.eval(x) * vb.eval(x); });
    if (u.closed_grad && v.closed_grad) {
        auto gu = u.closed_grad, gv = v.closed_grad;
        uv.closed_grad = [ub, vb, gu, gv](const Vec& x) {
            return gu(x) * vb.eval(x) + gv(x) * ub.eval(x);
        };
        if (u.closed_hess && v.closed_hess) {
            auto hu = u.closed_hess, hv = v.closed_hess;
            uv.closed_hess = [ub, vb, gu, gv, hu, hv](const Vec& x) {
                SymMat H;
                H.n = x.n;
                SymMat Hu = hu(x), Hv = hv(x);
                Vec Gu = gu(x), Gv = gv(x);
                double uu = ub.eval(x), vv = vb.eval(x);
                for (int i = 0; i < x.n; ++i)
                    for (int j = i; j < x.n; ++j)
                        H.set(i, j, vv * Hu(i, j) + uu * Hv(i, j) + Gu[i] * Gv[j] +
                                        Gv[i] * Gu[j]);
                return H;
            };
        }
    }
    ProductRuleReport rep;
    rep.nodes = nodes;
    rep.pass = true;
    for (const Vec& x : nodes) {
        double e1 = 0, e2 = 0, e3 = 0, e4 = 0;
        double Luv = op::apply_at(K, uv, x, q, &e1);
        double Lu = op::apply_at(K, u, x, q, &e2);
        double Lv = op::apply_at(K, v, x, q, &e3);
        double Buv = op::bilinear_at(K, u, v, x, q, &e4);
        double ux = u.eval(x), vx = v.eval(x);
        double res = Luv - ux * Lv - vx * Lu + Buv;
        double err = e1 + std::abs(ux) * e3 + std::abs(vx) * e2 + e4;
        double scale = std::max({std::abs(Luv), std::abs(ux * Lv), std::abs(vx * Lu),
                                 std::abs(Buv), 1.0});
        rep.residual.push_back(res);
        rep.error.push_back(err);
        rep.max_residual = std::max(rep.max_residual, std::abs(res));
        if (std::abs(res) > err + 1e-12 * scale) rep.pass = false;
    }
    return rep;
}

fields::GridFunction random_field(int n, const Box& box, double dx, unsigned seed, int kind) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::function<double(const Vec&)> f;
    std::function<Vec(const Vec&)> gf;
    std::function<SymMat(const Vec&)> hf;
    if (kind == 0) {
        // Gaussian mixture, 3 components inside the box
        struct Comp {
            Vec c;
            double w, a;
        };
        std::vector<Comp> cs;
        for (int i = 0; i < 3; ++i) {
            Comp cp;
            cp.c = Vec::zero(n);
            for (int a = 0; a < n; ++a) {
                double mid = 0.5 * (box.lo[a] + box.hi[a]);
                double half = 0.5 * (box.hi[a] - box.lo[a]);
                cp.c.c[a] = mid + 0.5 * half * uni(rng);
            }
            cp.w = 0.35 + 0.25 * (uni(rng) + 1.0);
            cp.a = uni(rng);
            if (std::abs(cp.a) < 0.2) cp.a = cp.a < 0 ? -0.2 : 0.2;
            cs.push_back(cp);
        }
        f = [cs](const Vec& x) {
            double v = 0.0;
            for (const auto& c : cs) {
                Vec d = x - c.c;
                v += c.a * std::exp(-d.dot(d) / (2 * c.w * c.w));
            }
            return v;
        };
        gf = [cs](const Vec& x) {
            Vec g = Vec::zero(x.n);
            for (const auto& c : cs) {
                Vec d = x - c.c;
                double e = c.a * std::exp(-d.dot(d) / (2 * c.w * c.w));
                g = g + d * (-e / (c.w * c.w));
            }
            return g;
        };
        hf = [cs](const Vec& x) {
            SymMat H;
            H.n = x.n;
            for (const auto& c : cs) {
                Vec d = x - c.c;
                double w2 = c.w * c.w;
                double e = c.a * std::exp(-d.dot(d) / (2 * w2));
                for (int i = 0; i < x.n; ++i)
                    for (int j = i; j < x.n; ++j)
                        H.set(i, j, H(i, j) + e * (d[i] * d[j] / (w2 * w2) -
                                                   (i == j ? 1.0 / w2 : 0.0)));
            }
            return H;
        };
    } else {
        // band-limited trigonometric sum under a wide Gaussian window
        struct Mode {
            Vec k;
            double a, phi;
        };
        std::vector<Mode> ms;
        std::uniform_int_distribution<int> freq(1, 3);
        for (int i = 0; i < 4; ++i) {
            Mode m;
            m.k = Vec::zero(n);
            for (int a = 0; a < n; ++a) m.k.c[a] = (double)freq(rng) * (uni(rng) > 0 ? 1 : -1);
            m.a = uni(rng);
            m.phi = uni(rng) * M_PI;
            ms.push_back(m);
        }
        const double R2 = 9.0;  // window exp(-|x|^2 / (2 R^2)), R = 3
        f = [ms, R2](const Vec& x) {
            double t = 0.0;
            for (const auto& m : ms) t += m.a * std::cos(m.k.dot(x) + m.phi);
            return t * std::exp(-x.dot(x) / (2 * R2));
        };
        gf = [ms, R2](const Vec& x) {
            double W = std::exp(-x.dot(x) / (2 * R2));
            double T = 0.0;
            Vec gT = Vec::zero(x.n);
            for (const auto& m : ms) {
                double c = std::cos(m.k.dot(x) + m.phi), sn = std::sin(m.k.dot(x) + m.phi);
                T += m.a * c;
                gT = gT + m.k * (-m.a * sn);
            }
            return gT * W + x * (-T * W / R2);
        };
        hf = [ms, R2](const Vec& x) {
            double W = std::exp(-x.dot(x) / (2 * R2));
            double T = 0.0;
            Vec gT = Vec::zero(x.n), gW = x * (-W / R2);
            SymMat HT, H;
            HT.n = H.n = x.n;
            for (const auto& m : ms) {
                double c = std::cos(m.k.dot(x) + m.phi), sn = std::sin(m.k.dot(x) + m.phi);
                T += m.a * c;
                gT = gT + m.k * (-m.a * sn);
                for (int i = 0; i < x.n; ++i)
                    for (int j = i; j < x.n; ++j)
                        HT.set(i, j, HT(i, j) - m.a * c * m.k[i] * m.k[j]);
            }
            for (int i = 0; i < x.n; ++i)
                for (int j = i; j < x.n; ++j) {
                    double hw = W * (x[i] * x[j] / (R2 * R2) - (i == j ? 1.0 / R2 : 0.0));
                    H.set(i, j, W * HT(i, j) + gT[i] * gW[j] + gW[i] * gT[j] + T * hw);
                }
            return H;
        };
    }
    // normalize to sup-norm ~ 1 over a padded sample set
    double M = 0.0;
    Box pad = box;
    for (int a = 0; a < n; ++a) {
        pad.lo.c[a] -= 1.0;
        pad.hi.c[a] += 1.0;
    }
    int res = n == 1 ? 512 : (n == 2 ? 96 : 24);
    long total = 1;
    for (int a = 0; a < n; ++a) total *= res;
    for (long p = 0; p < total; ++p) {
        long rem = p;
        Vec x = Vec::zero(n);
        for (int a = 0; a < n; ++a) {
            int i = (int)(rem % res);
            rem /= res;
            x.c[a] = pad.lo[a] + (pad.hi[a] - pad.lo[a]) * (i + 0.5) / res;
        }
        M = std::max(M, std::abs(f(x)));
    }
    if (M < 1e-12) M = 1.0;
    double inv = 1.0 / M;
    fields::GridFunction g = fields::GridFunction::from_function(
        box, dx, [f, inv](const Vec& x) { return inv * f(x); }, fields::Exterior::Analytic);
    g.closed_grad = [gf, inv](const Vec& x) { return gf(x) * inv; };
    g.closed_hess = [hf, inv](const Vec& x) {
        SymMat H = hf(x);
        for (auto& m : H.m) m *= inv;
        return H;
    };
    return g;
}

std::vector<fields::GridFunction> make_ensemble(int n, const Box& box, double dx, int count,
                                                unsigned seed) {
    std::vector<fields::GridFunction> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(random_field(n, box, dx, seed + 1000 * i + i, i % 2));
    return out;
}

}  // namespace nlb::bernstein
