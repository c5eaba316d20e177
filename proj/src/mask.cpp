#include "dhsa/mask.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dhsa/tensor_io.hpp"

namespace dhsa {

Budget::Budget(std::size_t value) : value_(value) {
    if (value_ == 0) throw std::invalid_argument("budget N_b must be >= 1");
}

SparsityMask::SparsityMask(std::vector<std::vector<std::uint32_t>> rows) : rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.empty() || r.back() != i) {
            throw std::invalid_argument("mask row " + std::to_string(i) + " must end with its own index");
        }
        for (std::size_t n = 1; n < r.size(); ++n) {
            if (r[n] <= r[n - 1]) {
                throw std::invalid_argument("mask row " + std::to_string(i) + " must be strictly ascending");
            }
        }
    }
}

SparsityMask SparsityMask::full_causal(std::size_t length) {
    std::vector<std::vector<std::uint32_t>> rows(length);
    for (std::size_t i = 0; i < length; ++i) {
        rows[i].resize(i + 1);
        std::iota(rows[i].begin(), rows[i].end(), 0u);
    }
    return SparsityMask(std::move(rows));
}

bool SparsityMask::contains(std::size_t i, std::size_t j) const {
    const auto& r = rows_.at(i);
    return std::binary_search(r.begin(), r.end(), static_cast<std::uint32_t>(j));
}

std::size_t SparsityMask::attended_pairs() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

void to_json(nlohmann::json& j, const SparsityMask& mask) { j = {{"L", mask.length()}, {"rows", mask.rows()}}; }

SparsityMask mask_from_json(const nlohmann::json& j) {
    auto rows = j.at("rows").get<std::vector<std::vector<std::uint32_t>>>();
    if (rows.size() != j.at("L").get<std::size_t>()) throw std::runtime_error("mask JSON: L does not match rows");
    return SparsityMask(std::move(rows));
}

namespace {
constexpr char kMaskMagic[] = "DHSAMSK1";
}

std::vector<std::uint8_t> encode_mask_binary(const SparsityMask& mask) {
    std::vector<std::uint8_t> out(kMaskMagic, kMaskMagic + 8);
    put_u64(out, mask.length());
    for (std::size_t i = 0; i < mask.length(); ++i) {
        const std::size_t at = out.size();
        out.resize(at + (i + 8) / 8, 0);
        for (auto j : mask.row(i)) out[at + j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
    }
    return out;
}

SparsityMask decode_mask_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMaskMagic, 8) != 0) {
        throw std::runtime_error("not a DHSAMSK1 mask");
    }
    const std::uint64_t L = get_u64(bytes, 8);
    std::size_t at = 16;
    std::vector<std::vector<std::uint32_t>> rows(L);
    for (std::size_t i = 0; i < L; ++i) {
        const std::size_t n = (i + 8) / 8;
        if (at + n > bytes.size()) throw std::runtime_error("truncated mask bitset");
        for (std::size_t j = 0; j <= i; ++j) {
            if (bytes[at + j / 8] & (1u << (j % 8))) rows[i].push_back(static_cast<std::uint32_t>(j));
        }
        at += n;
    }
    if (at != bytes.size()) throw std::runtime_error("trailing bytes after mask");
    return SparsityMask(std::move(rows));
}

void write_mask_binary(const std::string& path, const SparsityMask& mask) {
    write_file_bytes(path, encode_mask_binary(mask));
}

SparsityMask read_mask_binary(const std::string& path) { return decode_mask_binary(read_file_bytes(path)); }

CostCounters& CostCounters::operator+=(const CostCounters& other) {
    score_ops += other.score_ops;
    attended_pairs += other.attended_pairs;
    return *this;
}

CostCounters dense_cost(std::size_t length) {
    const std::uint64_t tri = static_cast<std::uint64_t>(length) * (length + 1) / 2;
    return {tri, tri};
}

Matrix upsample(const ChunkSimilarityMatrix& similarity, const BoundarySet& bounds) {
    const std::size_t n = bounds.num_chunks();
    if (similarity.values.rows() != n || similarity.values.cols() != n) {
        throw std::invalid_argument("upsample: S_c is " + std::to_string(similarity.values.rows()) + "x" +
                                    std::to_string(similarity.values.cols()) + " but bounds have " +
                                    std::to_string(n) + " chunks");
    }
    const std::size_t L = bounds.length();
    Matrix out(L, L);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double v = similarity.values(a, b);
            for (std::size_t i = bounds.begin(a); i < bounds.end(a); ++i) {
                for (std::size_t j = bounds.begin(b); j < bounds.end(b); ++j) out(i, j) = v;
            }
        }
    }
    return out;
}

std::vector<std::uint32_t> topk_row(std::span<const double> scores, std::size_t row, Budget budget) {
    if (row >= scores.size()) throw std::out_of_range("topk_row: row beyond score vector");
    std::vector<std::uint32_t> order(row);
    std::iota(order.begin(), order.end(), 0u);
    const std::size_t extra = std::min(budget.value(), row + 1) - 1;
    std::partial_sort(order.begin(), order.begin() + extra, order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    });
    order.resize(extra);
    order.push_back(static_cast<std::uint32_t>(row));
    std::sort(order.begin(), order.end());
    return order;
}

ChunkSimilarityMatrix aggregate_heads(std::span<const ChunkSimilarityMatrix> per_head, HeadAggregation mode) {
    if (per_head.empty()) throw std::invalid_argument("aggregate_heads: no heads");
    Matrix out = per_head.front().values;
    for (std::size_t h = 1; h < per_head.size(); ++h) {
        const Matrix& m = per_head[h].values;
        if (m.rows() != out.rows() || m.cols() != out.cols()) throw std::invalid_argument("head S_c shape mismatch");
        for (std::size_t n = 0; n < out.data().size(); ++n) {
            out.data()[n] = mode == HeadAggregation::kMax ? std::max(out.data()[n], m.data()[n])
                                                          : out.data()[n] + m.data()[n];
        }
    }
    if (mode == HeadAggregation::kMean) {
        for (auto& x : out.data()) x /= static_cast<double>(per_head.size());
    }
    return {std::move(out)};
}

namespace {

// One query row over chunk scores. Chunks are visited by (score desc, index
// asc) and their tokens taken in ascending order, which is the same order as
// TopK on the upsampled row with lower-index tie-breaking.
std::vector<std::uint32_t> select_row(std::span<const double> chunk_scores, const BoundarySet& bounds,
                                      std::size_t row, Budget budget, CostCounters* counters) {
    const std::size_t own = bounds.chunk_of(row);
    std::vector<std::size_t> order(own + 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return chunk_scores[a] > chunk_scores[b]; });

    std::size_t remaining = std::min(budget.value(), row + 1) - 1;
    std::vector<std::uint32_t> picked;
    picked.reserve(remaining + 1);
    for (std::size_t k : order) {
        if (remaining == 0) break;
        const std::size_t stop = k == own ? row : bounds.end(k);
        for (std::size_t j = bounds.begin(k); j < stop && remaining > 0; ++j, --remaining) {
            picked.push_back(static_cast<std::uint32_t>(j));
        }
    }
    picked.push_back(static_cast<std::uint32_t>(row));
    std::sort(picked.begin(), picked.end());
    if (counters) {
        counters->score_ops += own + 1;
        counters->attended_pairs += picked.size();
    }
    return picked;
}

}  // namespace

SparsityMask select_mask(const ChunkSimilarityMatrix& similarity, const BoundarySet& bounds, Budget budget,
                         CostCounters* counters) {
    const std::size_t n = bounds.num_chunks();
    if (similarity.values.rows() != n || similarity.values.cols() != n) {
        throw std::invalid_argument("select_mask: S_c does not match boundaries");
    }
    std::vector<std::vector<std::uint32_t>> rows(bounds.length());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = select_row(similarity.values.row(bounds.chunk_of(i)), bounds, i, budget, counters);
    }
    return SparsityMask(std::move(rows));
}

SparsityMask prefill_mask(const TokenSequence& seq, const BoundarySet& bounds, Budget budget,
                          CostCounters* counters) {
    const auto sim = chunk_similarity(build_chunk_reps(seq, bounds));
    if (counters) counters->score_ops += static_cast<std::uint64_t>(bounds.num_chunks()) * bounds.num_chunks();
    return select_mask(sim, bounds, budget, counters);
}

SparsityMask prefill_mask(std::span<const TokenSequence> heads, const BoundarySet& bounds, Budget budget,
                          HeadAggregation mode, CostCounters* counters) {
    if (heads.empty()) throw std::invalid_argument("prefill_mask: no heads");
    std::vector<ChunkSimilarityMatrix> per_head;
    per_head.reserve(heads.size());
    for (const auto& h : heads) per_head.push_back(chunk_similarity(build_chunk_reps(h, bounds)));
    if (counters) {
        counters->score_ops +=
            static_cast<std::uint64_t>(heads.size()) * bounds.num_chunks() * bounds.num_chunks();
    }
    return select_mask(aggregate_heads(per_head, mode), bounds, budget, counters);
}

namespace {

// Scores of the current token against every chunk of the extended partition:
// prompt chunks, the generated chunk (if any) and the singleton current token.
std::vector<std::uint32_t> decode_row(const BoundarySet& prompt_bounds, const ChunkReps& prompt_reps,
                                      std::span<const double> generated_sum, std::size_t generated_count,
                                      std::span<const double> query, std::span<const double> key,
                                      std::size_t total_length, Budget budget, CostCounters* counters) {
    if (prompt_reps.num_chunks() != prompt_bounds.num_chunks()) {
        throw std::invalid_argument("cached chunk keys do not match prompt boundaries");
    }
    const auto bounds = extend_for_decode(prompt_bounds, total_length);
    const auto q = normalize_chunk_sum(query, 1);
    std::vector<double> scores;
    scores.reserve(bounds.num_chunks());
    for (std::size_t k = 0; k < prompt_reps.num_chunks(); ++k) scores.push_back(dot(q, prompt_reps.chunk_keys.row(k)));
    if (generated_count > 0) scores.push_back(dot(q, normalize_chunk_sum(generated_sum, generated_count)));
    scores.push_back(dot(q, normalize_chunk_sum(key, 1)));
    if (counters) counters->score_ops += scores.size();
    return select_row(scores, bounds, total_length - 1, budget, counters);
}

}  // namespace

std::vector<std::uint32_t> decode_mask_row(const BoundarySet& prompt_bounds, const ChunkReps& prompt_keys,
                                           const Matrix& generated_keys, std::span<const double> current_query,
                                           std::size_t total_length, Budget budget, CostCounters* counters) {
    const std::size_t L = prompt_bounds.length();
    if (total_length <= L) throw std::invalid_argument("decode_mask_row: total length must exceed prompt length");
    if (generated_keys.rows() != total_length - L) {
        throw std::invalid_argument("decode_mask_row: expected " + std::to_string(total_length - L) +
                                    " generated keys, got " + std::to_string(generated_keys.rows()));
    }
    const std::size_t previous = generated_keys.rows() - 1;
    std::vector<double> sum(generated_keys.cols(), 0.0);
    for (std::size_t r = 0; r < previous; ++r) {
        auto row = generated_keys.row(r);
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += row[c];
    }
    return decode_row(prompt_bounds, prompt_keys, sum, previous, current_query, generated_keys.row(previous),
                      total_length, budget, counters);
}

DecodeSession::DecodeSession(BoundarySet prompt_bounds, ChunkReps prompt_reps)
    : prompt_bounds_(std::move(prompt_bounds)),
      prompt_reps_(std::move(prompt_reps)),
      generated_sum_(prompt_reps_.chunk_keys.cols(), 0.0) {
    if (prompt_reps_.num_chunks() != prompt_bounds_.num_chunks()) {
        throw std::invalid_argument("cached chunk keys do not match prompt boundaries");
    }
}

std::vector<std::uint32_t> DecodeSession::step(std::span<const double> query, std::span<const double> key,
                                               Budget budget, CostCounters* counters) {
    if (key.size() != generated_sum_.size() || query.size() != generated_sum_.size()) {
        throw std::invalid_argument("decode step: vector dimension mismatch");
    }
    auto row = decode_row(prompt_bounds_, prompt_reps_, generated_sum_, generated_count_, query, key,
                          total_length() + 1, budget, counters);
    for (std::size_t c = 0; c < key.size(); ++c) generated_sum_[c] += key[c];
    ++generated_count_;
    return row;
}

}  // namespace dhsa
