#include "dhsa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dhsa/mask.hpp"

namespace dhsa {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                                    std::to_string(rows_ * cols_));
    }
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

TokenSequence::TokenSequence(Matrix queries, Matrix keys, Matrix values)
    : queries_(std::move(queries)), keys_(std::move(keys)), values_(std::move(values)) {
    if (queries_.rows() == 0) throw std::invalid_argument("token sequence must have at least one token");
    if (queries_.cols() == 0) throw std::invalid_argument("token sequence must have head_dim >= 1");
    if (keys_.rows() != queries_.rows() || keys_.cols() != queries_.cols() || values_.rows() != queries_.rows() ||
        values_.cols() != queries_.cols()) {
        throw std::invalid_argument("queries, keys and values must share L x d");
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> softmax_row(std::span<const double> scores, const std::vector<bool>& valid) {
    if (valid.size() != scores.size()) throw std::invalid_argument("softmax_row: mask length mismatch");
    double peak = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (!valid[j]) continue;
        any = true;
        peak = std::max(peak, scores[j]);
    }
    if (!any) throw std::invalid_argument("empty attention row");

    std::vector<double> out(scores.size(), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (!valid[j]) continue;
        out[j] = std::exp(scores[j] - peak);
        total += out[j];
    }
    for (auto& x : out) x /= total;
    return out;
}

namespace {

// Both the masked and unmasked paths go through here so the full causal mask
// reproduces the dense result bit for bit.
template <typename Indices>
void attend_row(const TokenSequence& seq, std::size_t i, const Indices& cols, std::span<double> out) {
    if (cols.empty()) throw std::invalid_argument("empty attention row");
    const double scale = 1.0 / std::sqrt(static_cast<double>(seq.head_dim()));
    auto q = seq.queries().row(i);

    std::vector<double> weights(cols.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < cols.size(); ++n) {
        weights[n] = dot(q, seq.keys().row(cols[n])) * scale;
        peak = std::max(peak, weights[n]);
    }
    double total = 0.0;
    for (auto& w : weights) {
        w = std::exp(w - peak);
        total += w;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t n = 0; n < cols.size(); ++n) {
        const double p = weights[n] / total;
        auto v = seq.values().row(cols[n]);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += p * v[c];
    }
}

}  // namespace

Matrix dense_attention(const TokenSequence& seq) {
    const std::size_t L = seq.length();
    Matrix out(L, seq.head_dim());
    std::vector<std::uint32_t> cols;
    cols.reserve(L);
    for (std::size_t i = 0; i < L; ++i) {
        cols.push_back(static_cast<std::uint32_t>(i));
        attend_row(seq, i, cols, out.row(i));
    }
    return out;
}

Matrix dense_attention(const TokenSequence& seq, const SparsityMask& mask) {
    const std::size_t L = seq.length();
    if (mask.length() != L) throw std::invalid_argument("mask length does not match sequence");
    Matrix out(L, seq.head_dim());
    for (std::size_t i = 0; i < L; ++i) {
        const auto& cols = mask.row(i);
        for (auto j : cols) {
            if (j > i) throw std::invalid_argument("mask is not causal");
        }
        attend_row(seq, i, cols, out.row(i));
    }
    return out;
}

Matrix attention_probabilities(const TokenSequence& seq) {
    const std::size_t L = seq.length();
    const double scale = 1.0 / std::sqrt(static_cast<double>(seq.head_dim()));
    Matrix probs(L, L);
    std::vector<double> scores(L);
    std::vector<bool> valid(L, false);
    for (std::size_t i = 0; i < L; ++i) {
        valid[i] = true;
        for (std::size_t j = 0; j <= i; ++j) scores[j] = dot(seq.queries().row(i), seq.keys().row(j)) * scale;
        auto p = softmax_row(scores, valid);
        std::copy(p.begin(), p.end(), probs.row(i).begin());
    }
    return probs;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace dhsa
