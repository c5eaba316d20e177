#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dhsa {

class SparsityMask;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Per-layer (per-head) query/key/value vectors for a sequence of L tokens.
class TokenSequence {
public:
    TokenSequence(Matrix queries, Matrix keys, Matrix values);

    std::size_t length() const { return queries_.rows(); }
    std::size_t head_dim() const { return queries_.cols(); }

    const Matrix& queries() const { return queries_; }
    const Matrix& keys() const { return keys_; }
    const Matrix& values() const { return values_; }

private:
    Matrix queries_;
    Matrix keys_;
    Matrix values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Max-subtracted softmax over the entries flagged valid; invalid entries come
/// back as exactly 0. Throws std::invalid_argument("empty attention row") when
/// nothing is valid.
std::vector<double> softmax_row(std::span<const double> scores, const std::vector<bool>& valid);

/// Scaled dot-product attention, (q_i . k_j) / sqrt(d). Without a mask every
/// row attends to its causal prefix.
Matrix dense_attention(const TokenSequence& seq);
Matrix dense_attention(const TokenSequence& seq, const SparsityMask& mask);

/// Causal attention probabilities (L x L, row-stochastic over j <= i).
Matrix attention_probabilities(const TokenSequence& seq);

/// Cosine similarity clamped to [-1, 1]. Two zero vectors give 0; a single
/// zero vector also gives 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace dhsa
