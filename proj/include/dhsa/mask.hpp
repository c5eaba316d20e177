#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dhsa/chunk_repr.hpp"
#include "dhsa/chunking.hpp"
#include "dhsa/tensor.hpp"

namespace dhsa {

/// Per-query token budget N_b (>= 1).
class Budget {
public:
    explicit Budget(std::size_t value);
    std::size_t value() const { return value_; }

private:
    std::size_t value_;
};

/// Causal token-level mask. Row i holds the selected key indices in ascending
/// order; every row contains i itself.
class SparsityMask {
public:
    SparsityMask() = default;
    explicit SparsityMask(std::vector<std::vector<std::uint32_t>> rows);

    static SparsityMask full_causal(std::size_t length);

    std::size_t length() const { return rows_.size(); }
    const std::vector<std::uint32_t>& row(std::size_t i) const { return rows_[i]; }
    const std::vector<std::vector<std::uint32_t>>& rows() const { return rows_; }
    bool contains(std::size_t i, std::size_t j) const;
    std::size_t attended_pairs() const;

    friend bool operator==(const SparsityMask&, const SparsityMask&) = default;

private:
    std::vector<std::vector<std::uint32_t>> rows_;
};

void to_json(nlohmann::json& j, const SparsityMask& mask);
SparsityMask mask_from_json(const nlohmann::json& j);

/// "DHSAMSK1" + u64 L + L row bitsets (ceil((i+1)/8) bytes for row i, LSB first).
std::vector<std::uint8_t> encode_mask_binary(const SparsityMask& mask);
SparsityMask decode_mask_binary(std::span<const std::uint8_t> bytes);
void write_mask_binary(const std::string& path, const SparsityMask& mask);
SparsityMask read_mask_binary(const std::string& path);

/// Instrumentation for the cost ordering. score_ops counts chunk-score dot
/// products, per-row chunk scores scanned during selection and boundary
/// predictor positions; attended_pairs counts selected (i, j) pairs.
struct CostCounters {
    std::uint64_t score_ops = 0;
    std::uint64_t attended_pairs = 0;

    std::uint64_t total() const { return score_ops + attended_pairs; }
    CostCounters& operator+=(const CostCounters& other);
};

CostCounters dense_cost(std::size_t length);

/// Block-constant token scores: S_t[i][j] = S_c[chunk(i)][chunk(j)].
Matrix upsample(const ChunkSimilarityMatrix& similarity, const BoundarySet& bounds);

/// Causal TopK for one query row. `row` is always selected; the remaining
/// min(N_b, row + 1) - 1 slots go to the highest-scoring j < row, ties to the
/// lower index. Returned ascending.
std::vector<std::uint32_t> topk_row(std::span<const double> scores, std::size_t row, Budget budget);

enum class HeadAggregation { kMax, kMean };

/// Elementwise max (or mean) of per-head chunk similarity matrices.
ChunkSimilarityMatrix aggregate_heads(std::span<const ChunkSimilarityMatrix> per_head, HeadAggregation mode);

/// Token mask from a chunk similarity matrix. Selection works on chunk order
/// directly (O(N_c + N_b) per row) and is identical to upsample + topk_row.
SparsityMask select_mask(const ChunkSimilarityMatrix& similarity, const BoundarySet& bounds, Budget budget,
                         CostCounters* counters = nullptr);

/// Prefill mask for one head: build_chunk_reps -> chunk_similarity -> select.
SparsityMask prefill_mask(const TokenSequence& seq, const BoundarySet& bounds, Budget budget,
                          CostCounters* counters = nullptr);

/// Shared mask over several heads; per-head S_c are aggregated before TopK.
SparsityMask prefill_mask(std::span<const TokenSequence> heads, const BoundarySet& bounds, Budget budget,
                          HeadAggregation mode = HeadAggregation::kMax, CostCounters* counters = nullptr);

/// Single decode step, recomputing the generated-token chunk from scratch.
/// `prompt_keys` must be the chunk reps built on `prompt_bounds`; only its
/// keys are read. `generated_keys` holds the keys of tokens L..L_total-1; its
/// last row is the current token.
std::vector<std::uint32_t> decode_mask_row(const BoundarySet& prompt_bounds, const ChunkReps& prompt_keys,
                                           const Matrix& generated_keys, std::span<const double> current_query,
                                           std::size_t total_length, Budget budget,
                                           CostCounters* counters = nullptr);

/// Incremental decoder for one head. Prompt chunk keys are cached once; the
/// generated-token chunk is kept as a running sum and count.
class DecodeSession {
public:
    DecodeSession(BoundarySet prompt_bounds, ChunkReps prompt_reps);

    std::size_t total_length() const { return prompt_bounds_.length() + generated_count_; }

    /// Mask row for a new token at position total_length(); afterwards the
    /// token's key joins the generated chunk.
    std::vector<std::uint32_t> step(std::span<const double> query, std::span<const double> key, Budget budget,
                                    CostCounters* counters = nullptr);

private:
    BoundarySet prompt_bounds_;
    ChunkReps prompt_reps_;
    std::vector<double> generated_sum_;
    std::size_t generated_count_ = 0;
};

}  // namespace dhsa
