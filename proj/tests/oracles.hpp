#pragma once

// Scalar-loop reference implementations. Written directly from the formulas,
// sharing no code with the library beyond plain containers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "dhsa/predictor.hpp"
#include "dhsa/tensor.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const dhsa::Matrix& m) {
    Grid g(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
    return g;
}

inline dhsa::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    dhsa::Matrix m(rows, cols);
    for (auto& x : m.data()) x = gauss(rng);
    return m;
}

inline dhsa::TokenSequence random_sequence(std::size_t L, std::size_t d, std::mt19937_64& rng) {
    return dhsa::TokenSequence(random_matrix(L, d, rng), random_matrix(L, d, rng), random_matrix(L, d, rng));
}

// allowed[i][j] says whether query i may see key j.
inline Grid attention(const Grid& q, const Grid& k, const Grid& v, const std::vector<std::vector<bool>>& allowed) {
    const std::size_t L = q.size(), d = q[0].size();
    Grid out(L, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < L; ++i) {
        std::vector<double> s(L, 0.0);
        double m = -1e300;
        for (std::size_t j = 0; j < L; ++j) {
            if (!allowed[i][j]) continue;
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) acc += q[i][c] * k[j][c];
            s[j] = acc / std::sqrt(static_cast<double>(d));
            m = std::max(m, s[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j)
            if (allowed[i][j]) z += std::exp(s[j] - m);
        for (std::size_t j = 0; j < L; ++j) {
            if (!allowed[i][j]) continue;
            const double p = std::exp(s[j] - m) / z;
            for (std::size_t c = 0; c < d; ++c) out[i][c] += p * v[j][c];
        }
    }
    return out;
}

inline std::vector<std::vector<bool>> causal(std::size_t L) {
    std::vector<std::vector<bool>> a(L, std::vector<bool>(L, false));
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j <= i; ++j) a[i][j] = true;
    return a;
}

// sqrt(n) * mean over each chunk [b[k], b[k+1]).
inline Grid chunk_reps(const Grid& tokens, const std::vector<std::size_t>& b) {
    Grid out;
    for (std::size_t k = 0; k + 1 < b.size(); ++k) {
        std::vector<double> acc(tokens[0].size(), 0.0);
        for (std::size_t t = b[k]; t < b[k + 1]; ++t)
            for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += tokens[t][c];
        const double n = static_cast<double>(b[k + 1] - b[k]);
        for (auto& x : acc) x = x / n * std::sqrt(n);
        out.push_back(acc);
    }
    return out;
}

inline Grid similarity(const Grid& cq, const Grid& ck) {
    Grid s(cq.size(), std::vector<double>(ck.size(), 0.0));
    for (std::size_t a = 0; a < cq.size(); ++a)
        for (std::size_t b = 0; b < ck.size(); ++b)
            for (std::size_t c = 0; c < cq[a].size(); ++c) s[a][b] += cq[a][c] * ck[b][c];
    return s;
}

inline std::size_t find_chunk(const std::vector<std::size_t>& b, std::size_t t) {
    std::size_t k = 0;
    while (!(b[k] <= t && t < b[k + 1])) ++k;
    return k;
}

inline Grid upsample(const Grid& sc, const std::vector<std::size_t>& b) {
    const std::size_t L = b.back();
    Grid out(L, std::vector<double>(L));
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) out[i][j] = sc[find_chunk(b, i)][find_chunk(b, j)];
    return out;
}

// Threshold formulation of causal TopK with forced self: find the value of the
// m-th best score among j < row, keep everything strictly above it, then fill
// with the lowest indices that tie with it.
inline std::vector<std::uint32_t> topk(const std::vector<double>& scores, std::size_t row, std::size_t budget) {
    const std::size_t m = std::min(budget, row + 1) - 1;
    std::vector<std::uint32_t> out;
    if (m > 0) {
        std::vector<double> sorted(scores.begin(), scores.begin() + row);
        std::sort(sorted.begin(), sorted.end(), [](double a, double b) { return a > b; });
        const double t = sorted[m - 1];
        std::size_t above = 0;
        for (std::size_t j = 0; j < row; ++j) above += scores[j] > t;
        std::size_t fill = m - above;
        for (std::size_t j = 0; j < row; ++j) {
            if (scores[j] > t) {
                out.push_back(static_cast<std::uint32_t>(j));
            } else if (scores[j] == t && fill > 0) {
                out.push_back(static_cast<std::uint32_t>(j));
                --fill;
            }
        }
    }
    out.push_back(static_cast<std::uint32_t>(row));
    return out;
}

// Single-layer MHA over rows [first, first + w) of keys, average pooled.
inline std::vector<double> encode_window(const dhsa::PredictorParams& p, const dhsa::Matrix& keys, std::size_t first) {
    const auto& s = p.shape();
    const std::size_t d = s.dim, w = s.window, H = s.heads, dh = d / H;
    auto W = [&](const char* name, std::size_t r, std::size_t c) { return p.view(name)[r * d + c]; };
    auto B = [&](const char* name, std::size_t r) { return p.view(name)[r]; };
    Grid x(w, std::vector<double>(d));
    for (std::size_t t = 0; t < w; ++t)
        for (std::size_t c = 0; c < d; ++c)
            x[t][c] = keys(first + t, c) + (s.position_bias ? p.view("pos")[t * d + c] : 0.0);
    Grid Q(w, std::vector<double>(d)), K = Q, V = Q;
    for (std::size_t t = 0; t < w; ++t)
        for (std::size_t r = 0; r < d; ++r) {
            double q = B("bq", r), k = B("bk", r), v = B("bv", r);
            for (std::size_t c = 0; c < d; ++c) {
                q += W("wq", r, c) * x[t][c];
                k += W("wk", r, c) * x[t][c];
                v += W("wv", r, c) * x[t][c];
            }
            Q[t][r] = q;
            K[t][r] = k;
            V[t][r] = v;
        }
    Grid O(w, std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t t = 0; t < w; ++t) {
            std::vector<double> e(w);
            double m = -1e300, z = 0.0;
            for (std::size_t u = 0; u < w; ++u) {
                double acc = 0.0;
                for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) acc += Q[t][c] * K[u][c];
                e[u] = acc / std::sqrt(static_cast<double>(dh));
                m = std::max(m, e[u]);
            }
            for (auto& x_ : e) z += std::exp(x_ - m);
            for (std::size_t u = 0; u < w; ++u)
                for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) O[t][c] += std::exp(e[u] - m) / z * V[u][c];
        }
    std::vector<double> out(d, 0.0);
    for (std::size_t t = 0; t < w; ++t)
        for (std::size_t r = 0; r < d; ++r) {
            double y = B("bo", r);
            for (std::size_t c = 0; c < d; ++c) y += W("wo", r, c) * O[t][c];
            out[r] += y / static_cast<double>(w);
        }
    return out;
}

}  // namespace oracle
