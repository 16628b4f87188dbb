#pragma once

#include <cmath>
#include <span>
#include <string>

#include "trackmine/errors.hpp"

namespace trackmine {

enum class Metric { Euclidean, Cosine };

inline Metric metric_from_string(const std::string& s) {
    if (s == "euclidean") return Metric::Euclidean;
    if (s == "cosine") return Metric::Cosine;
    throw UsageError("unknown metric '" + s + "' (expected euclidean|cosine)");
}

inline const char* metric_name(Metric m) {
    return m == Metric::Euclidean ? "euclidean" : "cosine";
}

inline double squared_euclidean(std::span<const float> u, std::span<const float> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
        acc += d * d;
    }
    return acc;
}

/// Euclidean: L2 norm of the difference. Cosine: 1 - u.v / (|u||v|).
/// Throws DataError for a zero-norm vector under the cosine metric.
inline double embedding_distance(std::span<const float> u, std::span<const float> v, Metric metric) {
    if (u.size() != v.size()) throw DataError("embedding_distance: dimension mismatch");
    if (metric == Metric::Euclidean) return std::sqrt(squared_euclidean(u, v));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double a = u[i], b = v[i];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if (nu == 0.0 || nv == 0.0)
        throw DataError("embedding_distance: zero-norm vector under cosine metric");
    return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

// double-precision overloads, used by the clustering code
inline double squared_euclidean(std::span<const double> u, std::span<const double> v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = u[i] - v[i];
        acc += d * d;
    }
    return acc;
}

inline double embedding_distance(std::span<const double> u, std::span<const double> v, Metric metric) {
    if (u.size() != v.size()) throw DataError("embedding_distance: dimension mismatch");
    if (metric == Metric::Euclidean) return std::sqrt(squared_euclidean(u, v));
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0)
        throw DataError("embedding_distance: zero-norm vector under cosine metric");
    return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace trackmine
