#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fblab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }

inline Vec2 normalized(Vec2 a) {
    const double n = norm(a);
    return n > 0.0 ? a / n : Vec2{};
}

/// Symmetric 2x2 matrix [[a11, a12], [a12, a22]].
struct Mat2 {
    double a11 = 1.0;
    double a12 = 0.0;
    double a22 = 1.0;

    static constexpr Mat2 identity() { return {1.0, 0.0, 1.0}; }

    constexpr Vec2 operator*(Vec2 v) const { return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y}; }
    constexpr double det() const { return a11 * a22 - a12 * a12; }
    constexpr double trace() const { return a11 + a22; }
    constexpr bool operator==(const Mat2&) const = default;

    /// Eigenvalues in ascending order.
    std::pair<double, double> eigenvalues() const {
        const double m = 0.5 * (a11 + a22);
        const double d = std::hypot(0.5 * (a11 - a22), a12);
        return {m - d, m + d};
    }

    bool positive_definite() const { return a11 > 0.0 && det() > 0.0; }
};

// Error hierarchy. Each failure mode named by the operation contracts gets
// its own type so callers (and the CLI exit-code mapping) can discriminate.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class CoefficientError : public Error {
public:
    using Error::Error;
};

class ObliquenessError : public Error {
public:
    using Error::Error;
};

class StepError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double final_residual, std::vector<double> history = {})
        : Error(what), final_residual_(final_residual), history_(std::move(history)) {}

    double final_residual() const { return final_residual_; }
    const std::vector<double>& history() const { return history_; }

private:
    double final_residual_;
    std::vector<double> history_;
};

}  // namespace fblab
