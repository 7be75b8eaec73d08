#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "probembed/gaussian.hpp"

namespace probembed {

// Ordered collection of named Gaussian embeddings for one modality.
// Arrays are stored at 32-bit precision; computation upcasts to 64-bit
// when embeddings are materialized.
struct EmbeddingStore {
    std::uint32_t version = 1;
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<float> mu;       // count x dim, row-major
    std::vector<float> log_var;  // count x dim, row-major

    std::size_t count() const { return ids.size(); }

    void append(const std::string& id, const GaussianEmbedding& z);
    GaussianEmbedding embedding(std::size_t index) const;
    std::vector<GaussianEmbedding> embeddings() const;
};

// Binary layout: magic "PGES", version u32, dim u32, count u64, dtype u8
// (0 = f32), then per-id a u32 byte length plus UTF-8 bytes, then mu
// row-major, then log_var row-major; everything little-endian.
void write_store(const EmbeddingStore& store, const std::string& path);

// Reads and validates a store: magic, version, dtype, unique ids, and
// log_var within [-6, 6] (with 1e-6 slack for storage rounding).
EmbeddingStore read_store(const std::string& path);

}  // namespace probembed
