#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "dhsa/chunk_repr.hpp"
#include "oracles.hpp"

using namespace dhsa;
using Catch::Approx;
using Idx = std::vector<std::size_t>;

TEST_CASE("aggregate_chunk spot values", "[chunk-repr]") {
    const Matrix one(1, 3, {0.3, -1.7, 2.5});
    CHECK(aggregate_chunk(one, 0, 1) == std::vector<double>{0.3, -1.7, 2.5});

    const Matrix four(4, 2, {1.5, -2, 1.5, -2, 1.5, -2, 1.5, -2});
    const auto a = aggregate_chunk(four, 0, 4);
    CHECK(a[0] == Approx(3.0).margin(1e-15));
    CHECK(a[1] == Approx(-4.0).margin(1e-15));

    const Matrix basis(2, 2, {1, 0, 0, 1});
    const auto b = aggregate_chunk(basis, 0, 2);
    CHECK(b[0] == Approx(std::sqrt(2.0) / 2.0).margin(1e-9));
    CHECK(b[1] == Approx(std::sqrt(2.0) / 2.0).margin(1e-9));

    CHECK_THROWS_WITH(aggregate_chunk(basis, 1, 1), "empty chunk");
}

TEST_CASE("build_chunk_reps spot cases", "[chunk-repr]") {
    std::mt19937_64 rng(1);
    const auto seq = oracle::random_sequence(8, 3, rng);

    const auto whole = build_chunk_reps(seq, BoundarySet::whole(8));
    REQUIRE(whole.num_chunks() == 1);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 8; ++t) mean += seq.queries()(t, c) / 8.0;
        CHECK(whole.chunk_queries(0, c) == Approx(std::sqrt(8.0) * mean).margin(1e-12));
    }

    Idx singles(9);
    std::iota(singles.begin(), singles.end(), std::size_t{0});
    const auto ident = build_chunk_reps(seq, BoundarySet(singles));
    CHECK(ident.chunk_queries == seq.queries());
    CHECK(ident.chunk_keys == seq.keys());

    const Idx b{0, 2, 5, 8};
    const auto reps = build_chunk_reps(seq, BoundarySet(b));
    const auto q = oracle::chunk_reps(oracle::to_grid(seq.queries()), b);
    const auto k = oracle::chunk_reps(oracle::to_grid(seq.keys()), b);
    CHECK(reps.chunk_lengths == Idx{2, 3, 3});
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(reps.chunk_queries(r, c) == Approx(q[r][c]).margin(1e-12));
            CHECK(reps.chunk_keys(r, c) == Approx(k[r][c]).margin(1e-12));
        }
    CHECK_THROWS(build_chunk_reps(seq, BoundarySet(Idx{0, 4, 9})));
}

TEST_CASE("chunk reps match the oracle on random partitions", "[chunk-repr][property]") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t L = 1 + rng() % 32, d = 1 + rng() % 8;
        const auto seq = oracle::random_sequence(L, d, rng);
        Idx b{0};
        for (std::size_t t = 1; t < L; ++t)
            if (rng() % 3 == 0) b.push_back(t);
        b.push_back(L);
        const auto reps = build_chunk_reps(seq, BoundarySet(b));
        const auto q = oracle::chunk_reps(oracle::to_grid(seq.queries()), b);
        std::size_t total = 0;
        for (std::size_t r = 0; r < q.size(); ++r) {
            total += reps.chunk_lengths[r];
            for (std::size_t c = 0; c < d; ++c) REQUIRE(std::abs(reps.chunk_queries(r, c) - q[r][c]) < 1e-10);
        }
        CHECK(total == L);
    }
}

TEST_CASE("chunk rep magnitude is sqrt(|C|) times the mean's", "[chunk-repr][property]") {
    std::mt19937_64 rng(2);
    const auto tokens = oracle::random_matrix(9, 4, rng);
    for (std::size_t n = 1; n <= 9; ++n) {
        const auto rep = aggregate_chunk(tokens, 0, n);
        std::vector<double> mean(4, 0.0);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t c = 0; c < 4; ++c) mean[c] += tokens(t, c) / static_cast<double>(n);
        CHECK(norm(rep) == Approx(std::sqrt(static_cast<double>(n)) * norm(mean)).epsilon(1e-12));
    }
}

TEST_CASE("chunk similarity spot values", "[chunk-repr]") {
    ChunkReps ortho{Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}), {1, 1, 1}};
    CHECK(chunk_similarity(ortho).values == Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));

    ChunkReps single{Matrix(1, 2, {3, 4}), Matrix(1, 2, {0, 2}), {5}};
    const auto s = chunk_similarity(single).values;
    CHECK(s(0, 0) == Approx(5.0 * 2.0 * 0.8).margin(1e-12));

    ChunkReps ints{Matrix(3, 2, {1, 2, -1, 0, 3, 1}), Matrix(3, 2, {2, 1, 0, -2, 1, 1}), {1, 1, 1}};
    const auto got = chunk_similarity(ints).values;
    const auto want = oracle::similarity(oracle::to_grid(ints.chunk_queries), oracle::to_grid(ints.chunk_keys));
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) CHECK(got(a, b) == want[a][b]);
    CHECK(got(0, 1) == -4.0);
}

TEST_CASE("scaling a chunk's tokens scales its representation", "[chunk-repr][property]") {
    std::mt19937_64 rng(12);
    auto tokens = oracle::random_matrix(10, 3, rng);
    const auto before = aggregate_chunk(tokens, 3, 7);
    for (std::size_t t = 3; t < 7; ++t)
        for (std::size_t c = 0; c < 3; ++c) tokens(t, c) *= -2.5;
    const auto after = aggregate_chunk(tokens, 3, 7);
    for (std::size_t c = 0; c < 3; ++c) CHECK(after[c] == Approx(-2.5 * before[c]).margin(1e-12));
}

TEST_CASE("equal-size chunks reduce to a scaled sum; singletons give QK^T", "[chunk-repr][property]") {
    std::mt19937_64 rng(13);
    const auto seq = oracle::random_sequence(12, 4, rng);
    const auto reps = build_chunk_reps(seq, static_boundaries(12, 3));
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t c = 0; c < 4; ++c) {
            double sum = 0.0;
            for (std::size_t t = 3 * k; t < 3 * k + 3; ++t) sum += seq.keys()(t, c);
            CHECK(reps.chunk_keys(k, c) == Approx(sum / std::sqrt(3.0)).margin(1e-12));
        }

    const auto s = chunk_similarity(build_chunk_reps(seq, static_boundaries(12, 1))).values;
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j) CHECK(s(i, j) == dot(seq.queries().row(i), seq.keys().row(j)));
}

TEST_CASE("zero padding never dilutes a chunk representation", "[chunk-repr][property]") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 8, pad = rng() % 8, d = 1 + rng() % 6;
        Matrix padded(n + pad, d, 0.0);
        const auto real = oracle::random_matrix(n, d, rng);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t c = 0; c < d; ++c) padded(t, c) = real(t, c);
        CHECK(aggregate_padded_chunk(padded, 0, n + pad, n) == aggregate_chunk(real, 0, n));
    }
}
