#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace dhsa {

/// Strictly increasing chunk boundaries b_0 = 0 < b_1 < ... < b_Nc = L.
/// Every index is an exclusive chunk end, so chunk k covers [b_k, b_{k+1}).
class BoundarySet {
public:
    explicit BoundarySet(std::vector<std::size_t> indices);

    /// The trivial single-chunk partition [0, L].
    static BoundarySet whole(std::size_t length);

    const std::vector<std::size_t>& indices() const { return indices_; }
    std::size_t length() const { return indices_.back(); }
    std::size_t num_chunks() const { return indices_.size() - 1; }
    std::size_t begin(std::size_t chunk) const { return indices_[chunk]; }
    std::size_t end(std::size_t chunk) const { return indices_[chunk + 1]; }
    std::size_t chunk_length(std::size_t chunk) const { return end(chunk) - begin(chunk); }

    /// Chunk index containing token `position`.
    std::size_t chunk_of(std::size_t position) const;

    /// Per-token chunk ids, length L.
    std::vector<std::size_t> token_chunk_ids() const;

    friend bool operator==(const BoundarySet&, const BoundarySet&) = default;

private:
    std::vector<std::size_t> indices_;
};

void to_json(nlohmann::json& j, const BoundarySet& bounds);
void from_json(const nlohmann::json& j, BoundarySet& bounds);
BoundarySet boundaries_from_json(const nlohmann::json& j);

/// Fixed-size partition: boundaries at multiples of chunk_size, last chunk may
/// be shorter.
BoundarySet static_boundaries(std::size_t length, std::size_t chunk_size);

struct NmsConfig {
    double min_conf = 0.1;
    std::size_t window = 8;
    std::size_t max_chunks = 64;
};

/// Greedy 1-D non-maximum suppression over per-position "end of chunk" scores.
/// Candidates are positions with score > min_conf, visited by descending score
/// (equal scores: lower index first). An accepted position i suppresses every
/// candidate within `window` positions and contributes boundary i + 1. At most
/// max_chunks - 1 interior boundaries are accepted; a hit on the last position
/// coincides with L and is not counted.
BoundarySet nms_boundaries(std::span<const double> scores, const NmsConfig& config);

/// Adds caller-provided chunk-end positions (e.g. newline tokens) on top of an
/// existing partition. Positions are "last token of a chunk" like NMS hits.
BoundarySet augment_boundaries(const BoundarySet& bounds, std::span<const std::size_t> chunk_end_positions);

/// Decode-time extension: appends L_total - 1 and L_total so that the generated
/// tokens form one chunk and the current token a singleton chunk. On the first
/// decode step (L_total == prompt length + 1) the generated chunk is empty and
/// is omitted.
BoundarySet extend_for_decode(const BoundarySet& prompt_bounds, std::size_t total_length);

}  // namespace dhsa
