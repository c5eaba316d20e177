#include "dhsa/chunking.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dhsa {

BoundarySet::BoundarySet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    if (indices_.size() < 2) throw std::invalid_argument("boundary set needs at least [0, L]");
    if (indices_.front() != 0) throw std::invalid_argument("boundary set must start at 0");
    for (std::size_t k = 1; k < indices_.size(); ++k) {
        if (indices_[k] <= indices_[k - 1]) {
            throw std::invalid_argument("boundaries must be strictly increasing (at " + std::to_string(k) + ")");
        }
    }
}

BoundarySet BoundarySet::whole(std::size_t length) { return BoundarySet({0, length}); }

std::size_t BoundarySet::chunk_of(std::size_t position) const {
    if (position >= length()) throw std::out_of_range("position beyond sequence");
    auto it = std::upper_bound(indices_.begin(), indices_.end(), position);
    return static_cast<std::size_t>(it - indices_.begin()) - 1;
}

std::vector<std::size_t> BoundarySet::token_chunk_ids() const {
    std::vector<std::size_t> ids(length());
    for (std::size_t k = 0; k < num_chunks(); ++k) std::fill(ids.begin() + begin(k), ids.begin() + end(k), k);
    return ids;
}

void to_json(nlohmann::json& j, const BoundarySet& bounds) { j = bounds.indices(); }

void from_json(const nlohmann::json& j, BoundarySet& bounds) {
    bounds = BoundarySet(j.get<std::vector<std::size_t>>());
}

BoundarySet boundaries_from_json(const nlohmann::json& j) { return BoundarySet(j.get<std::vector<std::size_t>>()); }

BoundarySet static_boundaries(std::size_t length, std::size_t chunk_size) {
    if (length == 0) throw std::invalid_argument("static_boundaries: L must be >= 1");
    if (chunk_size == 0) throw std::invalid_argument("static_boundaries: chunk size must be >= 1");
    std::vector<std::size_t> b;
    for (std::size_t x = 0; x < length; x += chunk_size) b.push_back(x);
    b.push_back(length);
    return BoundarySet(std::move(b));
}

BoundarySet nms_boundaries(std::span<const double> scores, const NmsConfig& config) {
    const std::size_t L = scores.size();
    if (L == 0) throw std::invalid_argument("nms_boundaries: empty score vector");
    if (config.window == 0) throw std::invalid_argument("nms_boundaries: window must be >= 1");
    if (config.max_chunks == 0) throw std::invalid_argument("nms_boundaries: max_chunks must be >= 1");

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < L; ++i) {
        if (scores[i] > config.min_conf) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<std::size_t> accepted;
    std::size_t interior = 0;
    for (std::size_t i : candidates) {
        if (interior + 1 >= config.max_chunks) break;
        const bool suppressed = std::any_of(accepted.begin(), accepted.end(), [&](std::size_t a) {
            return (a > i ? a - i : i - a) <= config.window;
        });
        if (suppressed) continue;
        accepted.push_back(i);
        // The last position maps onto L itself, already present.
        if (i + 1 < L) ++interior;
    }

    std::vector<std::size_t> b{0};
    std::sort(accepted.begin(), accepted.end());
    for (std::size_t i : accepted) {
        if (i + 1 < L) b.push_back(i + 1);
    }
    b.push_back(L);
    return BoundarySet(std::move(b));
}

BoundarySet augment_boundaries(const BoundarySet& bounds, std::span<const std::size_t> chunk_end_positions) {
    std::vector<std::size_t> b = bounds.indices();
    for (std::size_t p : chunk_end_positions) {
        if (p >= bounds.length()) throw std::invalid_argument("augment position beyond sequence");
        b.push_back(p + 1);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return BoundarySet(std::move(b));
}

BoundarySet extend_for_decode(const BoundarySet& prompt_bounds, std::size_t total_length) {
    const std::size_t L = prompt_bounds.length();
    if (total_length <= L) throw std::invalid_argument("extend_for_decode: total length must exceed prompt length");
    std::vector<std::size_t> b = prompt_bounds.indices();
    if (total_length - 1 > L) b.push_back(total_length - 1);
    b.push_back(total_length);
    return BoundarySet(std::move(b));
}

}  // namespace dhsa
