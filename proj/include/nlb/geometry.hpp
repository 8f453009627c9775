#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <string>

namespace nlb {

// Small fixed-capacity point/vector for dimensions 1..3.
struct Vec {
    int n = 1;
    std::array<double, 3> c{0.0, 0.0, 0.0};

    Vec() = default;
    explicit Vec(double x) : n(1), c{x, 0.0, 0.0} {}
    Vec(double x, double y) : n(2), c{x, y, 0.0} {}
    Vec(double x, double y, double z) : n(3), c{x, y, z} {}
    static Vec zero(int dim) {
        Vec v;
        v.n = dim;
        return v;
    }
    static Vec unit(int dim, int axis) {
        Vec v = zero(dim);
        v.c[axis] = 1.0;
        return v;
    }

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    Vec operator+(const Vec& o) const {
        Vec r = *this;
        for (int i = 0; i < n; ++i) r.c[i] += o.c[i];
        return r;
    }
    Vec operator-(const Vec& o) const {
        Vec r = *this;
        for (int i = 0; i < n; ++i) r.c[i] -= o.c[i];
        return r;
    }
    Vec operator*(double s) const {
        Vec r = *this;
        for (int i = 0; i < n; ++i) r.c[i] *= s;
        return r;
    }
    Vec operator-() const { return *this * -1.0; }
    double dot(const Vec& o) const {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c[i] * o.c[i];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec normalized() const {
        double r = norm();
        return r > 0 ? *this * (1.0 / r) : *this;
    }
};

inline Vec operator*(double s, const Vec& v) { return v * s; }

// Symmetric matrix stored as [xx, yy, zz, xy, xz, yz].
struct SymMat {
    int n = 1;
    std::array<double, 6> m{};
    double operator()(int i, int j) const {
        if (i == j) return m[i];
        int a = std::min(i, j), b = std::max(i, j);
        if (a == 0 && b == 1) return m[3];
        if (a == 0 && b == 2) return m[4];
        return m[5];
    }
    void set(int i, int j, double v) {
        if (i == j) {
            m[i] = v;
            return;
        }
        int a = std::min(i, j), b = std::max(i, j);
        if (a == 0 && b == 1)
            m[3] = v;
        else if (a == 0 && b == 2)
            m[4] = v;
        else
            m[5] = v;
    }
    double quad(const Vec& z) const {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s += (*this)(i, j) * z[i] * z[j];
        return s;
    }
};

// Axis-aligned box [lo, hi]^n.
struct Box {
    int n = 1;
    Vec lo, hi;
    Box() = default;
    Box(Vec l, Vec h) : n(l.n), lo(l), hi(h) {}
    static Box cube(int dim, double a, double b) {
        Box bx;
        bx.n = dim;
        bx.lo = Vec::zero(dim);
        bx.hi = Vec::zero(dim);
        for (int i = 0; i < dim; ++i) {
            bx.lo.c[i] = a;
            bx.hi.c[i] = b;
        }
        return bx;
    }
    bool contains(const Vec& x) const {
        for (int i = 0; i < n; ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
    // distance from x to the complement of the box (0 if outside)
    double inner_distance(const Vec& x) const {
        double d = 1e300;
        for (int i = 0; i < n; ++i) {
            d = std::min(d, x[i] - lo[i]);
            d = std::min(d, hi[i] - x[i]);
        }
        return std::max(d, 0.0);
    }
};

// FNV-1a, used for config hashes embedded in reports.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace nlb
