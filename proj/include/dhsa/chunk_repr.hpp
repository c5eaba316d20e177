#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dhsa/chunking.hpp"
#include "dhsa/tensor.hpp"

namespace dhsa {

/// Length-normalized chunk queries and keys, one row per chunk.
struct ChunkReps {
    Matrix chunk_queries;
    Matrix chunk_keys;
    std::vector<std::size_t> chunk_lengths;

    std::size_t num_chunks() const { return chunk_lengths.size(); }
};

/// Chunk-pair importance scores S_c = Q_c K_c^T (N_c x N_c). No 1/sqrt(d)
/// scaling and no softmax; causality is applied by the mask engine.
struct ChunkSimilarityMatrix {
    Matrix values;
};

/// sqrt(count) * (sum / count). Shared by batch aggregation and the decode
/// running sum so both produce bit-identical chunk vectors.
std::vector<double> normalize_chunk_sum(std::span<const double> sum, std::size_t count);

/// sqrt(|C|) * mean of the given rows. Throws on an empty chunk.
std::vector<double> aggregate_chunk(const Matrix& tokens, std::size_t begin, std::size_t end);

/// Padded-layout variant: sums rows [begin, end) (trailing rows are zero
/// padding) but normalizes by the true token count.
std::vector<double> aggregate_padded_chunk(const Matrix& tokens, std::size_t begin, std::size_t end,
                                           std::size_t true_count);

ChunkReps build_chunk_reps(const TokenSequence& seq, const BoundarySet& bounds);

ChunkSimilarityMatrix chunk_similarity(const ChunkReps& reps);

}  // namespace dhsa
