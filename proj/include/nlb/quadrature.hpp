#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "nlb/geometry.hpp"

namespace nlb::quad {

// Gauss-Legendre nodes/weights on [-1,1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton from Chebyshev initial guess
        double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (t * p1 - p0) / (t * t - 1.0);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        x[n - 1 - i] = t;
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (t * p1 - p0) / (t * t - 1.0);
        w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
}

struct SpherePoint {
    Vec dir;
    double weight;  // surface measure weight on S^{n-1}
};

// Quadrature on the unit sphere. Point sets are symmetric under dir -> -dir so
// that odd integrands cancel exactly (needed for p.v. evaluations).
// n=1: the two points {+1,-1}. n=2: equispaced angles (trapezoid, spectral for
// smooth integrands). n=3: Gauss in cos(theta) x uniform phi.
inline std::vector<SpherePoint> sphere_rule(int n, int count) {
    std::vector<SpherePoint> pts;
    if (n == 1) {
        pts.push_back({Vec(1.0), 1.0});
        pts.push_back({Vec(-1.0), 1.0});
        return pts;
    }
    if (n == 2) {
        int m = std::max(4, count);
        if (m % 2 != 0) ++m;  // keep antipodal symmetry
        for (int i = 0; i < m; ++i) {
            double th = 2.0 * M_PI * (i + 0.5) / m;
            pts.push_back({Vec(std::cos(th), std::sin(th)), 2.0 * M_PI / m});
        }
        return pts;
    }
    int mt = std::max(4, count / 4);
    if (mt % 2 != 0) ++mt;
    int mp = 2 * mt;
    std::vector<double> xs, ws;
    gauss_legendre(mt, xs, ws);
    for (int i = 0; i < mt; ++i) {
        double ct = xs[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int j = 0; j < mp; ++j) {
            double ph = 2.0 * M_PI * (j + 0.5) / mp;
            pts.push_back({Vec(st * std::cos(ph), st * std::sin(ph), ct),
                           ws[i] * 2.0 * M_PI / mp});
        }
    }
    return pts;
}

// |S^{n-1}|
inline double sphere_area(int n) {
    if (n == 1) return 2.0;
    if (n == 2) return 2.0 * M_PI;
    return 4.0 * M_PI;
}

}  // namespace nlb::quad
