#include "nlb/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "nlb/bellman.hpp"
#include "nlb/bernstein.hpp"
#include "nlb/expr.hpp"
#include "nlb/obstacle.hpp"
#include "nlb/parabolic.hpp"

namespace nlb::cli {

using json = nlohmann::ordered_json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex64(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

Vec vec_from(const json& a) {
    if (!a.is_array() || a.empty() || a.size() > 3)
        throw ConfigError("expected an array of 1..3 numbers");
    Vec v = Vec::zero((int)a.size());
    for (size_t i = 0; i < a.size(); ++i) v.c[i] = a[i].get<double>();
    return v;
}

expr::Expression parse_expr(const json& j, const std::string& what) {
    if (!j.is_string()) throw ConfigError("expression '" + what + "' must be a string");
    return expr::Expression::parse(j.get<std::string>());
}

kernels::KernelSpec kernel_from(const json& k) {
    std::string fam = k.value("family", "fractional-power");
    int n = k.value("dimension", 1);
    double s = k.value("s", 0.5);
    double lam = k.value("lambda", 1.0);
    double Lam = k.value("Lambda", 1.0);
    kernels::KernelSpec spec;
    if (fam == "fractional-power") {
        if (k.contains("angular")) {
            expr::Expression a = parse_expr(k["angular"], "angular");
            spec = kernels::fractional_power(
                n, s, [a](const Vec& th) { return a.eval(th); }, lam, Lam,
                k.value("smoothness_class", 2));
        } else {
            spec = kernels::fractional_power(n, s);
            spec.lambda = lam;
            spec.Lambda = Lam;
        }
    } else if (fam == "affine-fractional") {
        SymMat A;
        A.n = n;
        auto arr = k.at("affine");  // packed [xx, yy, zz, xy, xz, yz]
        for (size_t i = 0; i < arr.size() && i < 6; ++i) A.m[i] = arr[i].get<double>();
        spec = kernels::affine_fractional(n, s, A);
    } else if (fam == "general-levy") {
        expr::Expression g = parse_expr(k.at("g"), "g");
        expr::Expression gp = parse_expr(k.at("gprime"), "gprime");
        spec = kernels::general_levy(
            n, [g](double r) { return g.eval(Vec(r)); },
            [gp](double r) { return gp.eval(Vec(r)); }, k.value("s1", s - 0.1),
            k.value("s2", s + 0.1), lam, Lam);
    } else if (fam == "convolution") {
        expr::Expression d = parse_expr(k.at("density"), "density");
        spec = kernels::convolution_kernel(n, [d](const Vec& y) { return d.eval(y); });
    } else if (fam == "custom") {
        expr::Expression d = parse_expr(k.at("density"), "density");
        spec = kernels::custom_kernel(
            n, s, [d](const Vec& y) { return d.eval(y); }, lam, Lam,
            k.value("smoothness_class", 0), k.value("symmetric", true),
            k.value("homogeneous", false));
    } else {
        throw ConfigError("unknown kernel family '" + fam + "'");
    }
    spec.scale *= k.value("scale", 1.0);
    if (k.contains("time_factor")) {
        // K^(t) = time_factor(t) * K
        expr::Expression tf = parse_expr(k["time_factor"], "time_factor");
        kernels::KernelSpec base = spec;
        base.time_dependence = nullptr;
        spec.time_dependence = [base, tf](double t) {
            kernels::KernelSpec kt = base;
            kt.scale *= tf.eval(Vec::zero(base.dimension), t);
            return kt;
        };
    }
    return spec;
}

struct GridBlock {
    Box box;
    double dx = 0.0;
    fields::Exterior ext = fields::Exterior::Analytic;
    double ext_const = 0.0;
};

GridBlock grid_from(const json& g) {
    GridBlock b;
    Vec lo = vec_from(g.at("lo")), hi = vec_from(g.at("hi"));
    if (lo.n != hi.n) throw ConfigError("grid lo/hi dimension mismatch");
    b.box = Box(lo, hi);
    int N = g.value("N", 64);
    if (N < 2) throw ConfigError("grid N must be >= 2");
    b.dx = (hi[0] - lo[0]) / N;
    if (g.contains("exterior")) b.ext = fields::exterior_from_name(g["exterior"]);
    b.ext_const = g.value("exterior_value", 0.0);
    return b;
}

fields::GridFunction field_from(const GridBlock& g, const json& e, const std::string& what,
                                double t = 0.0) {
    expr::Expression ex = parse_expr(e, what);
    return fields::GridFunction::from_function(
        g.box, g.dx, [ex, t](const Vec& x) { return ex.eval(x, t); }, g.ext, g.ext_const);
}

op::QuadratureConfig quad_from(const json& cfg) {
    op::QuadratureConfig q;
    if (!cfg.contains("quadrature")) return q;
    const json& j = cfg["quadrature"];
    q.inner_radius = j.value("inner_radius", q.inner_radius);
    q.annulus_count = j.value("annulus_count", q.annulus_count);
    q.points_per_annulus = j.value("points_per_annulus", q.points_per_annulus);
    q.far_cutoff = j.value("far_cutoff", q.far_cutoff);
    q.tolerance = j.value("tolerance", q.tolerance);
    q.sphere_points = j.value("sphere_points", q.sphere_points);
    q.check();
    return q;
}

fields::CutoffFunction cutoff_from(const json& j, int n) {
    fields::CutoffFunction eta;
    eta.center = j.contains("center") ? vec_from(j["center"]) : Vec::zero(n);
    eta.r0 = j.value("r0", 0.5);
    eta.r1 = j.value("r1", 1.0);
    if (j.contains("t0")) {
        eta.has_time = true;
        eta.t0 = j["t0"].get<double>();
        eta.t1 = j.value("t1", 1.0);
        eta.two_s = j.value("two_s", 1.0);
    }
    return eta;
}

struct Assertion {
    std::string name;
    bool pass = false;
    json detail;
};

void do_kernel_validate(const json& cfg, json& results, std::vector<Assertion>& as) {
    kernels::KernelSpec K = kernel_from(cfg.at("kernel"));
    int samples = cfg.value("samples", 200);
    unsigned seed = cfg.value("seed", 1u);
    kernels::ValidationReport rep = kernels::validate_class(K, samples, seed);
    json conds = json::array();
    for (const auto& c : rep.conditions) {
        conds.push_back({{"name", c.name},
                         {"checked", c.checked},
                         {"pass", c.pass},
                         {"worst_ratio", c.worst_ratio}});
    }
    results["conditions"] = conds;
    std::vector<std::string> expect_fail;
    if (cfg.contains("expect_fail"))
        for (const auto& e : cfg["expect_fail"]) expect_fail.push_back(e.get<std::string>());
    bool ok = true;
    for (const auto& c : rep.conditions) {
        if (!c.checked) continue;
        bool should_fail =
            std::find(expect_fail.begin(), expect_fail.end(), c.name) != expect_fail.end();
        if (c.pass == should_fail) ok = false;
    }
    as.push_back({"conditions", ok, json{{"all_pass", rep.all_pass()}}});
}

void do_operator_eval(const json& cfg, json& results, std::vector<Assertion>& as, int) {
    kernels::KernelSpec K = kernel_from(cfg.at("kernel"));
    GridBlock g = grid_from(cfg.at("grid"));
    fields::GridFunction u = field_from(g, cfg.at("functions").at("u"), "u");
    op::QuadratureConfig q = quad_from(cfg);
    std::string oper = cfg.value("operation", "apply");
    op::OperatorEval ev;
    if (oper == "apply") {
        ev = op::apply(K, u, q);
    } else if (oper == "apply-nonsym") {
        ev = op::apply_nonsym(K, u, q);
    } else if (oper == "bilinear") {
        fields::GridFunction v = field_from(g, cfg.at("functions").at("v"), "v");
        ev = op::bilinear(K, u, v, q);
    } else if (oper == "drift") {
        ev = op::apply_with_drift(K, u, q);
    } else {
        throw ConfigError("unknown operation '" + oper + "'");
    }
    double max_abs = 0.0, max_err = 0.0;
    for (long p = 0; p < ev.values.node_count(); ++p) {
        max_abs = std::max(max_abs, std::abs(ev.values.values[p]));
        max_err = std::max(max_err, ev.error_estimate.values[p]);
    }
    results["max_abs"] = max_abs;
    results["max_error_estimate"] = max_err;
    if (cfg.contains("output") && cfg["output"].contains("csv"))
        ev.save_csv(cfg["output"]["csv"].get<std::string>());
    if (cfg.contains("max_error_below"))
        as.push_back({"max_error_below", max_err <= cfg["max_error_below"].get<double>(),
                      json{{"max_error_estimate", max_err}}});
}

bernstein::KeyEstimateVariant variant_from(const json& v, const kernels::KernelSpec& K) {
    bernstein::KeyEstimateVariant out;
    out.tag = bernstein::variant_from_name(v.at("name").get<std::string>());
    int n = K.dimension;
    out.e = v.contains("e") ? vec_from(v["e"]).normalized() : Vec::unit(n, 0);
    if (v.contains("h")) out.h = vec_from(v["h"]);
    out.alpha = v.value("alpha", 0.0);
    out.eta = v.contains("eta") ? cutoff_from(v["eta"], n) : fields::CutoffFunction(Vec::zero(n), 0.5, 1.0);
    if (v.contains("eta_bar")) {
        out.eta_bar = cutoff_from(v["eta_bar"], n);
        out.has_eta_bar = true;
    }
    if (v.contains("drift")) out.drift = vec_from(v["drift"]);
    if (v.contains("u_t")) {
        expr::Expression ex = parse_expr(v["u_t"], "u_t");
        out.ut = [ex](double t, const Vec& x) { return ex.eval(x, t); };
        out.time = v.value("time", 0.5);
        if (out.eta.has_time) out.eta.two_s = 2.0 * K.s;
    }
    return out;
}

void do_bernstein(const json& cfg, json& results, std::vector<Assertion>& as) {
    kernels::KernelSpec K = kernel_from(cfg.at("kernel"));
    GridBlock g = grid_from(cfg.at("grid"));
    op::QuadratureConfig q = quad_from(cfg);
    bernstein::KeyEstimateVariant v = variant_from(cfg.at("variant"), K);

    std::vector<fields::GridFunction> ensemble;
    if (cfg.contains("ensemble")) {
        if (!cfg.contains("seed")) throw ConfigError("ensemble runs require a seed");
        int count = cfg["ensemble"].value("count", 10);
        ensemble = bernstein::make_ensemble(K.dimension, g.box, g.dx, count,
                                            cfg["seed"].get<unsigned>());
    } else {
        ensemble.push_back(field_from(g, cfg.at("functions").at("u"), "u"));
    }

    if (cfg.value("find_sigma", false)) {
        bernstein::FindSigmaReport fr = bernstein::find_min_sigma(
            K, v, ensemble, q, cfg.value("sigma_max", 1e6), cfg.value("rel_tol", 1e-3));
        results["sigma_star"] = fr.sigma_star;
        results["binding_member"] = fr.binding_member;
        results["defect_at_sigma"] = fr.defect_at_sigma;
        bool ok = true;
        for (const auto& r : fr.verification) ok = ok && r.pass;
        as.push_back({"key-estimate", ok, json{{"sigma", fr.sigma_star}}});
    } else {
        double sigma = cfg.value("sigma", 0.0);
        double tol = cfg.value("tol", 0.0);
        bool ok = true;
        json members = json::array();
        for (const auto& u : ensemble) {
            auto nodes = bernstein::evaluation_nodes(u, v);
            bernstein::BernsteinReport r = bernstein::check_key_estimate(K, v, u, sigma, q, nodes, tol);
            json m{{"pass", r.pass}, {"max_defect", r.max_defect}};
            if (!r.pass && r.max_defect_index >= 0) {
                json node = json::array();
                const Vec& x = r.nodes[r.max_defect_index];
                for (int a = 0; a < x.n; ++a) node.push_back(x[a]);
                m["violating_node"] = node;
            }
            members.push_back(m);
            ok = ok && r.pass;
            if (cfg.contains("output") && cfg["output"].contains("csv"))
                r.save_csv(cfg["output"]["csv"].get<std::string>());
        }
        results["members"] = members;
        as.push_back({"key-estimate", ok, json{{"sigma", sigma}}});
    }
}

void do_obstacle(const json& cfg, json& results, std::vector<Assertion>& as) {
    obstacle::ObstacleProblem p;
    p.kernel = kernel_from(cfg.at("kernel"));
    GridBlock g = grid_from(cfg.at("grid"));
    p.domain = g.box;
    const json& fns = cfg.at("functions");
    p.phi = field_from(g, fns.at("phi"), "phi");
    p.exterior = fns.contains("exterior")
                     ? field_from(g, fns["exterior"], "exterior")
                     : fields::GridFunction::from_function(g.box, g.dx,
                                                           [](const Vec&) { return 0.0; });
    if (fns.contains("f")) {
        p.rhs = field_from(g, fns["f"], "f");
        p.has_rhs = true;
    }
    op::QuadratureConfig q = quad_from(cfg);
    obstacle::Method m = cfg.value("method", std::string("psor")) == "policy"
                             ? obstacle::Method::PolicyIteration
                             : obstacle::Method::PSOR;
    double tol = cfg.value("tol", 1e-8);
    obstacle::ObstacleSolveReport rep =
        obstacle::solve(p, g.dx, q, m, tol, cfg.value("max_iter", 100000),
                        cfg.value("omega", 1.5));
    results["residual"] = rep.residual;
    results["iterations"] = rep.iterations;
    results["active_nodes"] = (long)rep.active_set.size();
    json fb = json::array();
    for (const auto& f : rep.free_boundary) {
        json loc = json::array();
        for (int a = 0; a < f.location.n; ++a) loc.push_back(f.location[a]);
        fb.push_back(loc);
    }
    results["free_boundary"] = fb;
    if (cfg.contains("output") && cfg["output"].contains("csv"))
        rep.solution.save_csv(cfg["output"]["csv"].get<std::string>());
    as.push_back({"complementarity", rep.residual <= tol, json{{"residual", rep.residual}}});

    if (cfg.contains("semiconvexity")) {
        const json& sc = cfg["semiconvexity"];
        Vec e = sc.contains("e") ? vec_from(sc["e"]).normalized() : Vec::unit(g.box.n, 0);
        std::vector<double> hs;
        for (const auto& h : sc.at("h_list")) hs.push_back(h.get<double>());
        Box region = g.box;
        if (sc.contains("region_lo")) {
            region.lo = vec_from(sc["region_lo"]);
            region.hi = vec_from(sc["region_hi"]);
        }
        double scale = p.phi.sup_norm() + rep.solution.sup_norm();
        obstacle::SemiconvexityReport s =
            obstacle::measure_semiconvexity(rep.solution, e, hs, region, scale);
        results["semiconvexity"] = {{"min_second_difference", s.min_second_difference},
                                    {"implied_C", s.implied_C}};
    }
    if (cfg.contains("profile_fit")) {
        const json& pf = cfg["profile_fit"];
        for (size_t i = 0; i < rep.free_boundary.size(); ++i) {
            obstacle::ProfileFit fit = obstacle::fit_blowup_profile(
                rep.solution, p.phi, rep.free_boundary[i].location,
                pf.value("window", 0.25), p.kernel.s);
            results["profile_fits"].push_back({{"c0", fit.c0},
                                               {"residual", fit.residual},
                                               {"regular", fit.regular}});
        }
    }
    if (cfg.contains("exponent_fit")) {
        const json& ef = cfg["exponent_fit"];
        std::vector<double> radii;
        for (const auto& r : ef.at("radii")) radii.push_back(r.get<double>());
        for (size_t i = 0; i < rep.free_boundary.size(); ++i) {
            obstacle::ExponentFit fit = obstacle::fit_regularity_exponent(
                rep.solution, p.phi, rep.free_boundary[i].location, radii);
            results["exponent_fits"].push_back(
                {{"beta", fit.beta}, {"residual", fit.residual}});
        }
    }
}

void do_bellman(const json& cfg, json& results, std::vector<Assertion>& as) {
    bellman::BellmanProblem p;
    GridBlock g = grid_from(cfg.at("grid"));
    p.domain = g.box;
    for (const auto& m : cfg.at("family")) {
        bellman::FamilyMember fm;
        fm.kernel = kernel_from(m.at("kernel"));
        fm.c = field_from(g, m.at("c"), "c");
        p.family.push_back(std::move(fm));
    }
    const json& fns = cfg.at("functions");
    p.exterior = fns.contains("exterior")
                     ? field_from(g, fns["exterior"], "exterior")
                     : fields::GridFunction::from_function(g.box, g.dx,
                                                           [](const Vec&) { return 0.0; });
    op::QuadratureConfig q = quad_from(cfg);
    double tol = cfg.value("tol", 1e-8);
    bellman::BellmanReport rep =
        bellman::solve_policy_iteration(p, g.dx, q, tol, cfg.value("max_iter", 100));
    results["residual"] = rep.residual;
    results["iterations"] = rep.iterations;
    results["cycled"] = rep.cycled;
    results["policy"] = rep.policy;
    if (cfg.contains("output") && cfg["output"].contains("csv"))
        rep.solution.save_csv(cfg["output"]["csv"].get<std::string>());
    as.push_back({"residual", rep.residual <= tol, json{{"residual", rep.residual}}});
    if (cfg.contains("semiconvexity")) {
        const json& sc = cfg["semiconvexity"];
        Vec e = sc.contains("e") ? vec_from(sc["e"]).normalized() : Vec::unit(g.box.n, 0);
        std::vector<double> hs;
        for (const auto& h : sc.at("h_list")) hs.push_back(h.get<double>());
        bellman::SemiconvexityReport s =
            bellman::verify_semiconvexity(rep.solution, p, e, hs);
        results["semiconvexity"] = {{"C", s.C}, {"data_scale", s.data_scale}};
    }
}

void do_parabolic(const json& cfg, json& results, std::vector<Assertion>& as) {
    parabolic::ParabolicProblem p;
    p.kernel = kernel_from(cfg.at("kernel"));
    GridBlock g = grid_from(cfg.at("grid"));
    p.domain = g.box;
    p.dt = cfg.value("dt", 0.1);
    const json& fns = cfg.at("functions");
    expr::Expression fex = parse_expr(fns.at("f"), "f");
    p.f = [fex](double t, const Vec& x) { return fex.eval(x, t); };
    p.initial = fns.contains("initial")
                    ? field_from(g, fns["initial"], "initial")
                    : fields::GridFunction::from_function(g.box, g.dx,
                                                          [](const Vec&) { return 0.0; });
    p.exterior = fns.contains("exterior")
                     ? field_from(g, fns["exterior"], "exterior")
                     : fields::GridFunction::from_function(g.box, g.dx,
                                                           [](const Vec&) { return 0.0; });
    op::QuadratureConfig q = quad_from(cfg);
    double tol = cfg.value("tol", 1e-8);
    obstacle::Method m = cfg.value("method", std::string("psor")) == "policy"
                             ? obstacle::Method::PolicyIteration
                             : obstacle::Method::PSOR;
    parabolic::ParabolicReport rep = parabolic::solve(p, g.dx, q, m, tol,
                                                      cfg.value("max_iter", 100000),
                                                      cfg.value("omega", 1.5));
    results["levels"] = (long)rep.levels.size();
    results["residuals"] = rep.residuals;
    results["max_residual"] = rep.max_residual;
    if (cfg.contains("output") && cfg["output"].contains("csv"))
        rep.save_csv(cfg["output"]["csv"].get<std::string>());
    as.push_back({"complementarity", rep.max_residual <= tol,
                  json{{"max_residual", rep.max_residual}}});
    if (cfg.contains("semiconvexity")) {
        const json& sc = cfg["semiconvexity"];
        Vec e = sc.contains("e") ? vec_from(sc["e"]).normalized() : Vec::unit(g.box.n, 0);
        std::vector<double> hs;
        for (const auto& h : sc.at("h_list")) hs.push_back(h.get<double>());
        parabolic::SemiconvexityReport s =
            parabolic::measure_space_semiconvexity(rep, p, e, hs);
        results["semiconvexity"] = {{"C", s.C}, {"data_scale", s.data_scale}};
    }
}

int do_suite(const json& cfg, const std::string& base, json& results,
             std::vector<Assertion>& as, int jobs) {
    namespace fs = std::filesystem;
    json runs = json::array();
    bool ok = true;
    for (const auto& c : cfg.at("configs")) {
        fs::path sub = fs::path(base) / c.get<std::string>();
        int code = run_config(sub.string(), jobs);
        runs.push_back({{"config", c.get<std::string>()}, {"exit", code}});
        ok = ok && code == 0;
    }
    results["runs"] = runs;
    as.push_back({"suite", ok, json::object()});
    return ok ? kExitOk : kExitAssert;
}

}  // namespace

std::string variant_catalog() {
    static const struct {
        const char* name;
        const char* anchor;
    } rows[] = {
        {"first-order", "Thm 1.5"},
        {"pos-part", "Thm 1.6"},
        {"diff-quot", "Prop 1.7 / Lemma 5.4"},
        {"diff-quot-pos-part", "Prop 1.7 (positive part)"},
        {"diff-quot-improved", "Cor 5.5"},
        {"diff-quot-improved-pos-part", "Cor 5.6"},
        {"holder-quot", "Cor 5.3"},
        {"holder-quot-pos-part", "Cor 5.3 (positive part)"},
        {"second-order", "Cor 5.7"},
        {"second-order-diff-quot", "Cor 5.8"},
        {"parabolic", "Thm 7.1"},
        {"parabolic-pos-part", "Thm 7.1 (positive part)"},
        {"drift", "Thm 7.4"},
        {"drift-pos-part", "Thm 7.4 (positive part)"},
        {"general-levy", "Thm 7.5"},
        {"general-levy-pos-part", "Thm 7.5 (positive part)"},
    };
    std::ostringstream ss;
    for (const auto& r : rows) ss << r.name << "\t" << r.anchor << "\n";
    return ss.str();
}

int run_config(const std::string& path, int jobs) {
    std::string raw;
    json cfg;
    try {
        raw = slurp(path);
        cfg = json::parse(raw);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    json report;
    report["tool_version"] = kToolVersion;
    report["config_hash"] = hex64(fnv1a(raw));
    report["jobs"] = jobs;
    json results = json::object();
    std::vector<Assertion> assertions;
    int code = kExitOk;
    std::string verb;
    try {
        verb = cfg.at("verb").get<std::string>();
        report["verb"] = verb;
        report["inputs"] = cfg;
        if (verb == "kernel-validate") {
            do_kernel_validate(cfg, results, assertions);
        } else if (verb == "operator-eval") {
            do_operator_eval(cfg, results, assertions, jobs);
        } else if (verb == "bernstein") {
            do_bernstein(cfg, results, assertions);
        } else if (verb == "obstacle") {
            do_obstacle(cfg, results, assertions);
        } else if (verb == "bellman") {
            do_bellman(cfg, results, assertions);
        } else if (verb == "parabolic") {
            do_parabolic(cfg, results, assertions);
        } else if (verb == "suite") {
            code = do_suite(cfg, std::filesystem::path(path).parent_path().string(), results,
                            assertions, jobs);
        } else {
            throw ConfigError("unknown verb '" + verb + "'");
        }
    } catch (const expr::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {  // module ParameterErrors
        std::cerr << "precondition violation: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        std::cerr << "precondition violation: " << e.what() << "\n";
        return kExitPrecondition;
    }

    bool pass = true;
    json as = json::array();
    for (const auto& a : assertions) {
        as.push_back({{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
        pass = pass && a.pass;
    }
    report["results"] = results;
    report["assertions"] = as;
    report["pass"] = pass;
    if (!pass && code == kExitOk) code = kExitAssert;

    std::string out_path = "report.json";
    if (cfg.contains("output") && cfg["output"].contains("report"))
        out_path = cfg["output"]["report"].get<std::string>();
    std::ofstream out(out_path);
    out << report.dump(2) << "\n";
    return code;
}

int run_main(int argc, const char* const* argv) {
    bool list_variants = false, version = false;
    int jobs = 1;
    std::string config;
    // hand-rolled flag scan; the option surface is tiny
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--list-variants") {
            list_variants = true;
        } else if (a == "--version") {
            version = true;
        } else if (a == "--jobs") {
            if (i + 1 >= argc) {
                std::cerr << "--jobs needs a value\n";
                return kExitConfig;
            }
            jobs = std::atoi(argv[++i]);
        } else if (a.rfind("--jobs=", 0) == 0) {
            jobs = std::atoi(a.c_str() + 7);
        } else if (a == "--help" || a == "-h") {
            std::cout << "usage: nlbtool [--jobs N] [--list-variants] [--version] config.json\n";
            return kExitOk;
        } else if (!a.empty() && a[0] == '-') {
            std::cerr << "unknown flag '" << a << "'\n";
            return kExitConfig;
        } else {
            config = a;
        }
    }
    if (version) {
        std::cout << kToolVersion << "\n";
        return kExitOk;
    }
    if (list_variants) {
        std::cout << variant_catalog();
        return kExitOk;
    }
    if (config.empty()) {
        std::cerr << "usage: nlbtool [--jobs N] [--list-variants] config.json\n";
        return kExitConfig;
    }
    if (jobs < 1) jobs = 1;
    return run_config(config, jobs);
}

}  // namespace nlb::cli
