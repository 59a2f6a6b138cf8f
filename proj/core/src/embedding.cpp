#include "kgcot/embedding.hpp"

#include "kgcot/errors.hpp"

#include <cmath>

namespace kgcot {

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dimension() != v.dimension()) {
        throw Error("cosine: dimension mismatch (" + std::to_string(u.dimension()) + " vs " +
                    std::to_string(v.dimension()) + ")");
    }
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        const double a = u.values[i];
        const double b = v.values[i];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if (nu == 0.0 || nv == 0.0) {
        throw Error("cosine: undefined similarity for zero vector");
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

bool all_finite(const EmbeddingVector& v) {
    for (float x : v.values) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

} // namespace kgcot
