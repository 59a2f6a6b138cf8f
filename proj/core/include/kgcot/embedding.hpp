#pragma once
#include <vector>

namespace kgcot {

/// Dense embedding of one text. All vectors handled together must share one
/// dimension and contain only finite entries.
struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dimension() const { return values.size(); }
};

/// Cosine similarity in [-1, 1], computed in double precision.
/// Throws Error for dimension mismatch or a zero vector (undefined similarity).
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// True when every entry is finite.
bool all_finite(const EmbeddingVector& v);

} // namespace kgcot
