#include "nlb/fields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "nlb/quadrature.hpp"

namespace nlb::fields {

std::string exterior_name(Exterior e) {
    switch (e) {
        case Exterior::Zero: return "zero";
        case Exterior::Constant: return "constant";
        case Exterior::Analytic: return "analytic";
        case Exterior::Clamp: return "clamp";
    }
    return "?";
}

Exterior exterior_from_name(const std::string& name) {
    if (name == "zero") return Exterior::Zero;
    if (name == "constant") return Exterior::Constant;
    if (name == "analytic") return Exterior::Analytic;
    if (name == "clamp") return Exterior::Clamp;
    throw ParameterError("unknown exterior rule '" + name + "'");
}

Vec GridFunction::node_point(long flat) const {
    int i = (int)(flat % shape[0]);
    int j = (int)((flat / shape[0]) % shape[1]);
    int k = (int)(flat / ((long)shape[0] * shape[1]));
    Vec x = box.lo;
    x.c[0] += i * dx;
    if (box.n > 1) x.c[1] += j * dx;
    if (box.n > 2) x.c[2] += k * dx;
    return x;
}

namespace {

// Catmull-Rom weights for local coordinate t in [0,1]
inline void cubic_weights(double t, double w[4]) {
    double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2 * t2 - t);
    w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
    w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
}

}  // namespace

double GridFunction::eval_grid(const Vec& x) const {
    int n = box.n;
    bool inside = box.contains(x);
    if (!inside) {
        if (interior_only) throw EvaluationError("evaluation outside the grid box");
        switch (exterior) {
            case Exterior::Zero: return 0.0;
            case Exterior::Constant: return exterior_constant;
            case Exterior::Analytic:
                if (exterior_form) return exterior_form(x);
                if (!closed_form)
                    throw EvaluationError("analytic exterior without a closed form");
                return closed_form(x);
            case Exterior::Clamp: {
                Vec xc = x;
                for (int i = 0; i < n; ++i)
                    xc.c[i] = std::clamp(xc.c[i], box.lo[i], box.hi[i]);
                return eval_grid(xc);
            }
        }
    }
    // local cell coordinates
    int base[3] = {0, 0, 0};
    double frac[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < n; ++a) {
        double u = (x[a] - box.lo[a]) / dx;
        int i = (int)std::floor(u);
        i = std::clamp(i, 0, shape[a] - 2 >= 0 ? shape[a] - 2 : 0);
        base[a] = i;
        frac[a] = u - i;
    }
    auto at = [&](int i, int j, int k) {
        i = std::clamp(i, 0, shape[0] - 1);
        j = std::clamp(j, 0, shape[1] - 1);
        k = std::clamp(k, 0, shape[2] - 1);
        return values[flat_index(i, j, k)];
    };
    if (!cubic) {
        double acc = 0.0;
        int lim[3] = {n > 0 ? 2 : 1, n > 1 ? 2 : 1, n > 2 ? 2 : 1};
        for (int dk = 0; dk < lim[2]; ++dk)
            for (int dj = 0; dj < lim[1]; ++dj)
                for (int di = 0; di < lim[0]; ++di) {
                    double w = (di ? frac[0] : 1 - frac[0]);
                    if (n > 1) w *= (dj ? frac[1] : 1 - frac[1]);
                    if (n > 2) w *= (dk ? frac[2] : 1 - frac[2]);
                    acc += w * at(base[0] + di, base[1] + dj, base[2] + dk);
                }
        return acc;
    }
    double wx[4], wy[4] = {0, 1, 0, 0}, wz[4] = {0, 1, 0, 0};
    cubic_weights(frac[0], wx);
    if (n > 1) cubic_weights(frac[1], wy);
    if (n > 2) cubic_weights(frac[2], wz);
    double acc = 0.0;
    int limy = n > 1 ? 4 : 1, limz = n > 2 ? 4 : 1;
    for (int dk = 0; dk < limz; ++dk)
        for (int dj = 0; dj < limy; ++dj)
            for (int di = 0; di < 4; ++di) {
                double w = wx[di] * (n > 1 ? wy[dj] : 1.0) * (n > 2 ? wz[dk] : 1.0);
                acc += w * at(base[0] + di - 1, base[1] + (n > 1 ? dj - 1 : 0),
                              base[2] + (n > 2 ? dk - 1 : 0));
            }
    return acc;
}

double GridFunction::eval(const Vec& x) const {
    if (closed_form) return closed_form(x);
    return eval_grid(x);
}

double GridFunction::sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    switch (exterior) {
        case Exterior::Constant: m = std::max(m, std::abs(exterior_constant)); break;
        case Exterior::Analytic: {
            // probe the analytic extension on a shell around the box
            const auto& f = exterior_form ? exterior_form : closed_form;
            if (!f) break;
            double R = (box.hi - box.lo).norm();
            for (int i = 0; i < 256; ++i) {
                Vec x = box.lo;
                double t = (double)i / 255.0;
                for (int a = 0; a < box.n; ++a)
                    x.c[a] = box.lo[a] - R + t * (box.hi[a] - box.lo[a] + 2 * R);
                m = std::max(m, std::abs(f(x)));
            }
            break;
        }
        default: break;
    }
    return m;
}

GridFunction GridFunction::from_function(const Box& box, double dx,
                                         std::function<double(const Vec&)> f, Exterior ext,
                                         double ext_const) {
    if (!(dx > 0)) throw ParameterError("grid spacing must be positive");
    GridFunction g;
    g.box = box;
    g.dx = dx;
    for (int a = 0; a < box.n; ++a)
        g.shape[a] = (int)std::lround((box.hi[a] - box.lo[a]) / dx) + 1;
    g.values.resize(g.node_count());
    g.closed_form = std::move(f);
    g.exterior = ext;
    g.exterior_constant = ext_const;
    for (long p = 0; p < g.node_count(); ++p) {
        double v = g.closed_form(g.node_point(p));
        if (!std::isfinite(v)) throw ParameterError("non-finite sample in grid function");
        g.values[p] = v;
    }
    return g;
}

GridFunction GridFunction::from_values(const Box& box, double dx, std::vector<double> values,
                                       Exterior ext, double ext_const) {
    if (!(dx > 0)) throw ParameterError("grid spacing must be positive");
    GridFunction g;
    g.box = box;
    g.dx = dx;
    for (int a = 0; a < box.n; ++a)
        g.shape[a] = (int)std::lround((box.hi[a] - box.lo[a]) / dx) + 1;
    if ((long)values.size() != g.node_count())
        throw ParameterError("value array does not match the grid shape");
    for (double v : values)
        if (!std::isfinite(v)) throw ParameterError("non-finite sample in grid function");
    g.values = std::move(values);
    g.exterior = ext;
    g.exterior_constant = ext_const;
    if (ext == Exterior::Analytic)
        throw ParameterError("analytic exterior requires a closed form");
    return g;
}

void GridFunction::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    int n = box.n;
    out << "x1";
    for (int a = 1; a < n; ++a) out << ",x" << a + 1;
    out << ",value\n";
    out.precision(17);
    for (long p = 0; p < node_count(); ++p) {
        Vec x = node_point(p);
        out << x[0];
        for (int a = 1; a < n; ++a) out << "," << x[a];
        out << "," << values[p] << "\n";
    }
}

GridFunction load_csv_impl(const std::string& path, Exterior ext, double ext_const) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) throw IoError("empty csv '" + path + "'");
    int n = (int)std::count(header.begin(), header.end(), ',');
    if (n < 1 || n > 3) throw IoError("csv header must have 1..3 coordinate columns");
    std::vector<Vec> pts;
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        Vec x = Vec::zero(n);
        std::string cell;
        for (int a = 0; a < n; ++a) {
            if (!std::getline(ss, cell, ',')) throw IoError("short csv row");
            x.c[a] = std::stod(cell);
        }
        if (!std::getline(ss, cell, ',')) throw IoError("csv row missing value");
        pts.push_back(x);
        vals.push_back(std::stod(cell));
    }
    if (pts.empty()) throw IoError("csv has no data rows");
    Vec lo = pts.front(), hi = pts.front();
    for (const auto& p : pts)
        for (int a = 0; a < n; ++a) {
            lo.c[a] = std::min(lo[a], p[a]);
            hi.c[a] = std::max(hi[a], p[a]);
        }
    // spacing from the smallest positive increment along axis 0
    double dx = 1e300;
    for (const auto& p : pts) {
        double d = p[0] - lo[0];
        if (d > 1e-14) dx = std::min(dx, d);
    }
    GridFunction g;
    g.box = Box(lo, hi);
    g.dx = dx;
    for (int a = 0; a < n; ++a) g.shape[a] = (int)std::lround((hi[a] - lo[a]) / dx) + 1;
    g.values.assign(g.node_count(), 0.0);
    if ((long)pts.size() != g.node_count()) throw IoError("csv rows do not fill a uniform grid");
    for (size_t r = 0; r < pts.size(); ++r) {
        int idx[3] = {0, 0, 0};
        for (int a = 0; a < n; ++a) idx[a] = (int)std::lround((pts[r][a] - lo[a]) / dx);
        g.values[g.flat_index(idx[0], idx[1], idx[2])] = vals[r];
    }
    g.exterior = ext;
    g.exterior_constant = ext_const;
    return g;
}

GridFunction GridFunction::load_csv(const std::string& path, Exterior ext, double ext_const) {
    return load_csv_impl(path, ext, ext_const);
}

void GridFunction::save_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const char magic[8] = {'N', 'L', 'B', 'G', 'R', 'D', '0', '1'};
    out.write(magic, 8);
    std::int32_t n = box.n;
    out.write((const char*)&n, 4);
    out.write((const char*)&dx, 8);
    for (int a = 0; a < 3; ++a) {
        std::int32_t s = shape[a];
        out.write((const char*)&s, 4);
    }
    out.write((const char*)box.lo.c.data(), 24);
    out.write((const char*)box.hi.c.data(), 24);
    std::int32_t ext = (std::int32_t)exterior;
    out.write((const char*)&ext, 4);
    out.write((const char*)&exterior_constant, 8);
    out.write((const char*)values.data(), (std::streamsize)values.size() * 8);
}

GridFunction GridFunction::load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 8) != "NLBGRD01") throw IoError("bad grid file magic");
    GridFunction g;
    std::int32_t n = 0;
    in.read((char*)&n, 4);
    if (n < 1 || n > 3) throw IoError("bad dimension in grid file");
    in.read((char*)&g.dx, 8);
    for (int a = 0; a < 3; ++a) {
        std::int32_t s;
        in.read((char*)&s, 4);
        g.shape[a] = s;
    }
    g.box.n = n;
    g.box.lo.n = g.box.hi.n = n;
    in.read((char*)g.box.lo.c.data(), 24);
    in.read((char*)g.box.hi.c.data(), 24);
    std::int32_t ext;
    in.read((char*)&ext, 4);
    g.exterior = (Exterior)ext;
    if (g.exterior == Exterior::Analytic) g.exterior = Exterior::Zero;
    in.read((char*)&g.exterior_constant, 8);
    g.values.resize(g.node_count());
    in.read((char*)g.values.data(), (std::streamsize)g.values.size() * 8);
    if (!in) throw IoError("truncated grid file '" + path + "'");
    return g;
}

// ---- cutoff ----

namespace {

inline double smoothstep5(double t) {
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
inline double smoothstep5_d(double t) {
    if (t <= 0 || t >= 1) return 0.0;
    return 30.0 * t * t * (1.0 - t) * (1.0 - t);
}
inline double smoothstep5_dd(double t) {
    if (t <= 0 || t >= 1) return 0.0;
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
}

}  // namespace

CutoffFunction::CutoffFunction(const Vec& c, double inner, double outer)
    : center(c), r0(inner), r1(outer) {
    if (!(0 < inner && inner < outer)) throw ParameterError("need 0 < r0 < r1");
}

double CutoffFunction::eval(const Vec& x) const {
    double r = (x - center).norm();
    return 1.0 - smoothstep5((r - r0) / (r1 - r0));
}

Vec CutoffFunction::grad(const Vec& x) const {
    Vec d = x - center;
    double r = d.norm();
    if (r < 1e-14 || r <= r0 || r >= r1) return Vec::zero(x.n);
    double w = r1 - r0;
    double dr = -smoothstep5_d((r - r0) / w) / w;
    return d * (dr / r);
}

SymMat CutoffFunction::hess(const Vec& x) const {
    SymMat H;
    H.n = x.n;
    Vec d = x - center;
    double r = d.norm();
    if (r < 1e-14 || r <= r0 || r >= r1) return H;
    double w = r1 - r0;
    double t = (r - r0) / w;
    double fp = -smoothstep5_d(t) / w;
    double fpp = -smoothstep5_dd(t) / (w * w);
    for (int i = 0; i < x.n; ++i)
        for (int j = i; j < x.n; ++j) {
            double v = fpp * d[i] * d[j] / (r * r) +
                       fp * ((i == j ? 1.0 : 0.0) / r - d[i] * d[j] / (r * r * r));
            H.set(i, j, v);
        }
    return H;
}

double CutoffFunction::time_factor(double t) const {
    if (!has_time) return 1.0;
    double u = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    // eta1^{2s} is the linear ramp, so eta1 = ramp^{1/(2s)}
    return std::pow(u, 1.0 / two_s);
}

double CutoffFunction::c11_norm() const {
    double w = r1 - r0;
    double sup_grad = 0.0, sup_lip = 0.0;
    const int N = 2048;
    for (int i = 0; i <= N; ++i) {
        double t = (double)i / N;
        sup_grad = std::max(sup_grad, smoothstep5_d(t) / w);
        double r = r0 + t * w;
        // Lipschitz constant of the gradient includes the angular term f'(r)/r
        sup_lip = std::max(sup_lip, std::abs(smoothstep5_dd(t)) / (w * w) +
                                        smoothstep5_d(t) / (w * r));
    }
    return std::max({1.0, sup_grad, sup_lip});
}

GridFunction CutoffFunction::sample(const Box& box, double dx) const {
    CutoffFunction self = *this;
    return GridFunction::from_function(
        box, dx, [self](const Vec& x) { return self.eval(x); }, Exterior::Analytic);
}

// ---- difference operators ----

GridFunction diff_quotient(const GridFunction& u, const Vec& h) {
    double hn = h.norm();
    if (!(hn > 0)) throw ParameterError("diff_quotient requires |h| > 0");
    GridFunction g = u;
    GridFunction base = u;
    g.closed_form = [base, h, hn](const Vec& x) {
        return (base.eval(x + h) - base.eval(x)) / hn;
    };
    g.closed_grad = nullptr;
    g.closed_hess = nullptr;
    if (base.closed_grad) {
        auto bg = base.closed_grad;
        g.closed_grad = [bg, h, hn](const Vec& x) {
            return (bg(x + h) - bg(x)) * (1.0 / hn);
        };
    }
    g.exterior = Exterior::Analytic;
    for (long p = 0; p < g.node_count(); ++p) g.values[p] = g.closed_form(g.node_point(p));
    return g;
}

GridFunction average(const GridFunction& u, const Vec& h) {
    if (h.norm() == 0.0) return u;
    GridFunction g = u;
    GridFunction base = u;
    std::vector<double> gx, gw;
    quad::gauss_legendre(12, gx, gw);
    g.closed_form = [base, h, gx, gw](const Vec& x) {
        double acc = 0.0;
        for (size_t i = 0; i < gx.size(); ++i) {
            double t = 0.5 * (1.0 + gx[i]);
            acc += 0.5 * gw[i] * base.eval(x + h * t);
        }
        return acc;
    };
    g.closed_grad = nullptr;
    g.closed_hess = nullptr;
    if (base.closed_grad) {
        auto bg = base.closed_grad;
        g.closed_grad = [bg, h, gx, gw](const Vec& x) {
            Vec acc = Vec::zero(x.n);
            for (size_t i = 0; i < gx.size(); ++i) {
                double t = 0.5 * (1.0 + gx[i]);
                acc = acc + bg(x + h * t) * (0.5 * gw[i]);
            }
            return acc;
        };
    }
    g.exterior = Exterior::Analytic;
    for (long p = 0; p < g.node_count(); ++p) g.values[p] = g.closed_form(g.node_point(p));
    return g;
}

GridFunction holder_quotient(const GridFunction& u, const Vec& h, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must be in (0,1)");
    double hn = h.norm();
    if (!(hn > 0)) throw ParameterError("holder_quotient requires |h| > 0");
    GridFunction g = diff_quotient(u, h);
    double factor = std::pow(hn, 1.0 - alpha);
    auto inner = g.closed_form;
    g.closed_form = [inner, factor](const Vec& x) { return factor * inner(x); };
    if (g.closed_grad) {
        auto ig = g.closed_grad;
        g.closed_grad = [ig, factor](const Vec& x) { return ig(x) * factor; };
    }
    for (long p = 0; p < g.node_count(); ++p) g.values[p] *= factor;
    return g;
}

GridFunction directional_derivatives(const GridFunction& u, const Vec& e, int order) {
    if (order != 1 && order != 2) throw ParameterError("order must be 1 or 2");
    double en = e.norm();
    if (std::abs(en - 1.0) > 1e-10) throw ParameterError("direction must be a unit vector");
    GridFunction g = u;
    GridFunction base = u;
    double step = u.dx;
    if (order == 1 && base.closed_grad) {
        auto bg = base.closed_grad;
        g.closed_form = [bg, e](const Vec& x) { return bg(x).dot(e); };
        if (base.closed_hess) {
            auto bh = base.closed_hess;
            g.closed_grad = [bh, e](const Vec& x) {
                SymMat H = bh(x);
                Vec r = Vec::zero(x.n);
                for (int i = 0; i < x.n; ++i)
                    for (int j = 0; j < x.n; ++j) r.c[i] += H(i, j) * e[j];
                return r;
            };
        } else {
            g.closed_grad = nullptr;
        }
        g.closed_hess = nullptr;
    } else if (order == 2 && base.closed_hess) {
        auto bh = base.closed_hess;
        g.closed_form = [bh, e](const Vec& x) {
            SymMat H = bh(x);
            double s = 0.0;
            for (int i = 0; i < x.n; ++i)
                for (int j = 0; j < x.n; ++j) s += H(i, j) * e[i] * e[j];
            return s;
        };
        g.closed_grad = nullptr;
        g.closed_hess = nullptr;
    } else {
        // order-4 central differences
        if (order == 1) {
            g.closed_form = [base, e, step](const Vec& x) {
                double f1 = base.eval(x + e * step) - base.eval(x - e * step);
                double f2 = base.eval(x + e * (2 * step)) - base.eval(x - e * (2 * step));
                return (8.0 * f1 - f2) / (12.0 * step);
            };
        } else {
            g.closed_form = [base, e, step](const Vec& x) {
                double f0 = base.eval(x);
                double f1 = base.eval(x + e * step) + base.eval(x - e * step);
                double f2 = base.eval(x + e * (2 * step)) + base.eval(x - e * (2 * step));
                return (-f2 + 16.0 * f1 - 30.0 * f0) / (12.0 * step * step);
            };
        }
        g.closed_grad = nullptr;
        g.closed_hess = nullptr;
    }
    g.exterior = Exterior::Analytic;
    for (long p = 0; p < g.node_count(); ++p) g.values[p] = g.closed_form(g.node_point(p));
    return g;
}

}  // namespace nlb::fields
