#pragma once

// Minimal forward-mode dual number: value plus one directional derivative.
// Enough surface for the distance/log-map kernels in geometry.hpp.

#include <cmath>

namespace hvr::num {

struct Dual {
    double v = 0.0;  // value
    double d = 0.0;  // derivative of v w.r.t. the seeded coordinate

    Dual() = default;
    Dual(double value) : v(value) {}
    Dual(double value, double deriv) : v(value), d(deriv) {}
};

inline double scalar_value(const Dual& x) { return x.v; }

inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d};
}
inline Dual operator/(const Dual& a, const Dual& b) {
    return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}

inline Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
inline Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
inline Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
inline Dual operator-(double a, const Dual& b) { return {a - b.v, -b.d}; }
inline Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
inline Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }
inline Dual operator/(const Dual& a, double b) { return {a.v / b, a.d / b}; }
inline Dual operator/(double a, const Dual& b) { return {a / b.v, -a * b.d / (b.v * b.v)}; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }

inline Dual sqrt(const Dual& a) {
    const double r = std::sqrt(a.v);
    return {r, a.d / (2.0 * r)};
}
inline Dual tanh(const Dual& a) {
    const double t = std::tanh(a.v);
    return {t, a.d * (1.0 - t * t)};
}
inline Dual atanh(const Dual& a) {
    return {std::atanh(a.v), a.d / (1.0 - a.v * a.v)};
}

}  // namespace hvr::num
