#include "nlb/bellman.hpp"

#include <algorithm>
#include <cmath>

namespace nlb::bellman {

void BellmanProblem::validate() const {
    if (family.empty()) throw ParameterError("bellman family must be nonempty");
    int n = family.front().kernel.dimension;
    double s = family.front().kernel.s;
    for (const auto& m : family) {
        if (m.kernel.dimension != n || std::abs(m.kernel.s - s) > 1e-12)
            throw ParameterError("bellman family members must share (n, s)");
        if (!m.kernel.symmetric)
            throw ParameterError("bellman family members must be symmetric");
    }
}

BellmanReport solve_policy_iteration(const BellmanProblem& p, double dx,
                                     const op::QuadratureConfig& q, double tol,
                                     int max_iter) {
    p.validate();
    int G = (int)p.family.size();
    std::vector<Eigen::MatrixXd> A(G);
    std::vector<Eigen::VectorXd> c(G);
    std::vector<Vec> nodes;
    std::array<int, 3> shape{1, 1, 1};
    for (int g = 0; g < G; ++g) {
        obstacle::ObstacleProblem sub;
        sub.kernel = p.family[g].kernel;
        sub.domain = p.domain;
        sub.exterior = p.exterior;
        sub.phi = p.exterior;  // unused by assemble
        obstacle::AssembledOperator D = obstacle::assemble(sub, dx, q);
        long N = (long)D.nodes.size();
        A[g] = std::move(D.A);
        c[g] = Eigen::VectorXd(N);
        for (long i = 0; i < N; ++i)
            c[g](i) = D.load(i) + p.family[g].c.eval(D.nodes[i]);
        if (g == 0) {
            nodes = std::move(D.nodes);
            shape = D.shape;
        }
    }
    long N = (long)nodes.size();

    BellmanReport rep;
    rep.policy.assign(N, 0);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(N);
    auto residual_of = [&](const Eigen::VectorXd& v) {
        double worst = 0.0;
        std::vector<Eigen::VectorXd> Av(G);
        for (int g = 0; g < G; ++g) Av[g] = A[g] * v - c[g];
        for (long i = 0; i < N; ++i) {
            double m = Av[0](i);
            for (int g = 1; g < G; ++g) m = std::min(m, Av[g](i));
            worst = std::max(worst, std::abs(m));
        }
        return worst;
    };
    std::vector<std::vector<int>> seen;
    int it;
    for (it = 1; it <= max_iter; ++it) {
        // policy evaluation: rows of the selected members
        Eigen::MatrixXd M(N, N);
        Eigen::VectorXd b(N);
        for (long i = 0; i < N; ++i) {
            M.row(i) = A[rep.policy[i]].row(i);
            b(i) = c[rep.policy[i]](i);
        }
        u = M.partialPivLu().solve(b);
        double r = residual_of(u);
        rep.residual_history.push_back(r);
        if (r <= tol) break;
        // policy improvement, lowest index wins ties
        std::vector<int> next(N);
        std::vector<Eigen::VectorXd> Av(G);
        for (int g = 0; g < G; ++g) Av[g] = A[g] * u - c[g];
        for (long i = 0; i < N; ++i) {
            int best = 0;
            for (int g = 1; g < G; ++g)
                if (Av[g](i) < Av[best](i) - 1e-15) best = g;
            next[i] = best;
        }
        bool cycle = false;
        for (const auto& past : seen)
            if (past == next) cycle = true;
        seen.push_back(next);
        rep.policy = next;
        if (cycle) {
            // damped value-iteration sweeps to break the cycle
            rep.cycled = true;
            for (int k = 0; k < 100; ++k)
                for (long i = 0; i < N; ++i) {
                    int g = rep.policy[i];
                    double sum = A[g].row(i).dot(u) - A[g](i, i) * u(i);
                    double gs = (c[g](i) - sum) / A[g](i, i);
                    u(i) = 0.5 * u(i) + 0.5 * gs;
                }
            for (int g = 0; g < G; ++g) Av[g] = A[g] * u - c[g];
            for (long i = 0; i < N; ++i) {
                int best = 0;
                for (int g = 1; g < G; ++g)
                    if (Av[g](i) < Av[best](i) - 1e-15) best = g;
                rep.policy[i] = best;
            }
            seen.clear();
        }
    }
    rep.residual = rep.residual_history.empty() ? 0.0 : rep.residual_history.back();
    if (rep.residual > tol)
        throw NonconvergenceError("policy iteration did not converge", rep.residual_history);
    rep.iterations = it;

    std::vector<double> vals(u.data(), u.data() + N);
    rep.solution = fields::GridFunction::from_values(p.domain, dx, vals, fields::Exterior::Zero);
    fields::GridFunction ext = p.exterior;
    rep.solution.exterior = fields::Exterior::Analytic;
    rep.solution.exterior_form = [ext](const Vec& x) { return ext.eval(x); };
    return rep;
}

SemiconvexityReport verify_semiconvexity(const fields::GridFunction& u,
                                         const BellmanProblem& p, const Vec& e,
                                         const std::vector<double>& h_list) {
    p.validate();
    int n = p.domain.n;
    // inner eighth of the domain, matching B_{1/8} against B_1
    Box region = p.domain;
    for (int a = 0; a < n; ++a) {
        double mid = 0.5 * (p.domain.lo[a] + p.domain.hi[a]);
        double half = 0.125 * 0.5 * (p.domain.hi[a] - p.domain.lo[a]);
        region.lo.c[a] = mid - half;
        region.hi.c[a] = mid + half;
    }
    SemiconvexityReport rep;
    double sup_c = 0.0;
    for (const auto& m : p.family)
        sup_c = std::max(sup_c, obstacle::c11_surrogate(m.c, p.domain));
    double sup_u = u.sup_norm();
    for (const Vec& x : {p.domain.lo, p.domain.hi})
        sup_u = std::max(sup_u, std::abs(u.eval(x)));
    rep.data_scale = sup_c + sup_u;
    rep.raw = obstacle::measure_semiconvexity(u, e, h_list, region, rep.data_scale);
    rep.C = rep.raw.implied_C;
    return rep;
}

}  // namespace nlb::bellman
