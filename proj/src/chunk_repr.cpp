#include "dhsa/chunk_repr.hpp"

#include <cmath>
#include <stdexcept>

namespace dhsa {

std::vector<double> normalize_chunk_sum(std::span<const double> sum, std::size_t count) {
    if (count == 0) throw std::invalid_argument("empty chunk");
    const double n = static_cast<double>(count);
    const double root = std::sqrt(n);
    std::vector<double> out(sum.size());
    for (std::size_t c = 0; c < sum.size(); ++c) out[c] = root * (sum[c] / n);
    return out;
}

std::vector<double> aggregate_chunk(const Matrix& tokens, std::size_t begin, std::size_t end) {
    if (end <= begin) throw std::invalid_argument("empty chunk");
    if (end > tokens.rows()) throw std::out_of_range("chunk beyond token rows");
    std::vector<double> sum(tokens.cols(), 0.0);
    for (std::size_t r = begin; r < end; ++r) {
        auto row = tokens.row(r);
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += row[c];
    }
    return normalize_chunk_sum(sum, end - begin);
}

std::vector<double> aggregate_padded_chunk(const Matrix& tokens, std::size_t begin, std::size_t end,
                                           std::size_t true_count) {
    if (true_count == 0) throw std::invalid_argument("empty chunk");
    if (end > tokens.rows() || end < begin + true_count) throw std::out_of_range("padded chunk out of range");
    std::vector<double> sum(tokens.cols(), 0.0);
    for (std::size_t r = begin; r < end; ++r) {
        auto row = tokens.row(r);
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += row[c];
    }
    return normalize_chunk_sum(sum, true_count);
}

ChunkReps build_chunk_reps(const TokenSequence& seq, const BoundarySet& bounds) {
    if (bounds.length() != seq.length()) throw std::invalid_argument("boundaries do not cover the sequence");
    const std::size_t n = bounds.num_chunks();
    ChunkReps reps{Matrix(n, seq.head_dim()), Matrix(n, seq.head_dim()), std::vector<std::size_t>(n)};
    for (std::size_t k = 0; k < n; ++k) {
        auto q = aggregate_chunk(seq.queries(), bounds.begin(k), bounds.end(k));
        auto key = aggregate_chunk(seq.keys(), bounds.begin(k), bounds.end(k));
        std::copy(q.begin(), q.end(), reps.chunk_queries.row(k).begin());
        std::copy(key.begin(), key.end(), reps.chunk_keys.row(k).begin());
        reps.chunk_lengths[k] = bounds.chunk_length(k);
    }
    return reps;
}

ChunkSimilarityMatrix chunk_similarity(const ChunkReps& reps) {
    const std::size_t n = reps.num_chunks();
    Matrix s(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) s(a, b) = dot(reps.chunk_queries.row(a), reps.chunk_keys.row(b));
    }
    return {std::move(s)};
}

}  // namespace dhsa
