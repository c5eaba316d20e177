#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dhsa/chunking.hpp"

using namespace dhsa;
using Idx = std::vector<std::size_t>;

namespace {

// Priority order used by greedy NMS: higher score first, lower index on ties.
bool before(std::span<const double> s, std::size_t a, std::size_t b) { return s[a] > s[b] || (s[a] == s[b] && a < b); }

// Enumerates every subset of the candidates and keeps the one that is
// (a) pairwise separated by more than `window` and (b) dominating: each
// rejected candidate lies within `window` of an accepted one that outranks
// it. That set is unique; truncation to max_chunks - 1 interior boundaries is
// then applied in priority order.
Idx brute_force_nms(std::span<const double> s, const NmsConfig& cfg) {
    const std::size_t L = s.size();
    Idx cand;
    for (std::size_t i = 0; i < L; ++i)
        if (s[i] > cfg.min_conf) cand.push_back(i);
    const std::size_t n = cand.size();
    std::vector<Idx> solutions;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        Idx set;
        for (std::size_t k = 0; k < n; ++k)
            if (bits & (1u << k)) set.push_back(cand[k]);
        auto dist = [](std::size_t a, std::size_t b) { return a > b ? a - b : b - a; };
        bool ok = true;
        for (std::size_t a = 0; a < set.size() && ok; ++a)
            for (std::size_t b = a + 1; b < set.size() && ok; ++b) ok = dist(set[a], set[b]) > cfg.window;
        for (std::size_t c : cand) {
            if (!ok) break;
            if (std::find(set.begin(), set.end(), c) != set.end()) continue;
            ok = std::any_of(set.begin(), set.end(),
                             [&](std::size_t a) { return dist(a, c) <= cfg.window && before(s, a, c); });
        }
        if (ok) solutions.push_back(set);
    }
    REQUIRE(solutions.size() == 1);
    Idx accepted = solutions.front();
    std::sort(accepted.begin(), accepted.end(), [&](std::size_t a, std::size_t b) { return before(s, a, b); });
    Idx b{0};
    std::size_t interior = 0;
    for (std::size_t a : accepted) {
        if (interior + 1 >= cfg.max_chunks) break;
        if (a + 1 < L) {
            b.push_back(a + 1);
            ++interior;
        }
    }
    b.push_back(L);
    std::sort(b.begin(), b.end());
    return b;
}

}  // namespace

TEST_CASE("boundary set validates its invariants", "[chunking]") {
    CHECK_THROWS(BoundarySet(Idx{}));
    CHECK_THROWS(BoundarySet(Idx{0}));
    CHECK_THROWS(BoundarySet(Idx{1, 4}));
    CHECK_THROWS(BoundarySet(Idx{0, 3, 3, 5}));
    CHECK_THROWS(BoundarySet(Idx{0, 4, 2}));
    const BoundarySet b(Idx{0, 2, 5, 8});
    CHECK(b.num_chunks() == 3);
    CHECK(b.length() == 8);
    CHECK(b.chunk_of(0) == 0);
    CHECK(b.chunk_of(4) == 1);
    CHECK(b.chunk_of(5) == 2);
    CHECK(b.token_chunk_ids() == Idx{0, 0, 1, 1, 1, 2, 2, 2});
}

TEST_CASE("boundary set JSON is a plain integer array", "[chunking]") {
    const BoundarySet b(Idx{0, 3, 9});
    const nlohmann::json j = b;
    CHECK(j.dump() == "[0,3,9]");
    CHECK(boundaries_from_json(j) == b);
    BoundarySet into = BoundarySet::whole(1);
    j.get_to(into);
    CHECK(into == b);
}

TEST_CASE("static boundaries spot values", "[chunking]") {
    CHECK(static_boundaries(10, 4).indices() == Idx{0, 4, 8, 10});
    CHECK(static_boundaries(4, 4).indices() == Idx{0, 4});
    const auto big = static_boundaries(8192, 256);
    CHECK(big.num_chunks() == 32);
    for (std::size_t k = 0; k < 32; ++k) CHECK(big.chunk_length(k) == 256);
    CHECK_THROWS(static_boundaries(0, 4));
    CHECK_THROWS(static_boundaries(4, 0));
}

TEST_CASE("static chunk lengths sum to L", "[chunking][property]") {
    for (std::size_t L = 1; L < 60; ++L)
        for (std::size_t c = 1; c < 13; ++c) {
            const auto b = static_boundaries(L, c);
            std::size_t sum = 0;
            for (std::size_t k = 0; k < b.num_chunks(); ++k) sum += b.chunk_length(k);
            CHECK(sum == L);
        }
}

TEST_CASE("NMS spot values", "[chunking]") {
    const NmsConfig cfg{0.1, 8, 64};
    CHECK(nms_boundaries(std::vector<double>(12, 0.0), cfg).indices() == Idx{0, 12});

    std::vector<double> peak(10, 0.0);
    peak[4] = 0.9;
    CHECK(nms_boundaries(peak, cfg).indices() == Idx{0, 5, 10});
    CHECK(nms_boundaries(peak, cfg) == BoundarySet(brute_force_nms(peak, cfg)));

    std::vector<double> two(20, 0.0);
    two[5] = 0.6;
    two[8] = 0.8;
    CHECK(nms_boundaries(two, cfg).indices() == Idx{0, 9, 20});
    CHECK(nms_boundaries(two, cfg) == BoundarySet(brute_force_nms(two, cfg)));
}

TEST_CASE("NMS breaks score ties toward the lower index", "[chunking]") {
    std::vector<double> s(12, 0.0);
    s[3] = 0.5;
    s[6] = 0.5;
    CHECK(nms_boundaries(s, {0.1, 4, 8}).indices() == Idx{0, 4, 12});
}

TEST_CASE("NMS hit on the last position is deduped and not counted", "[chunking]") {
    std::vector<double> s(30, 0.0);
    s[29] = 0.95;  // coincides with L
    s[25] = 0.9;   // suppressed by the last-position hit (window 8)
    s[10] = 0.8;
    CHECK(nms_boundaries(s, {0.1, 8, 2}).indices() == Idx{0, 11, 30});
}

TEST_CASE("NMS matches the brute-force subset oracle", "[chunking][property]") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t L = 1 + rng() % 14;
        std::vector<double> s(L);
        for (auto& x : s) x = std::round(u(rng) * 8.0) / 8.0;  // coarse values force ties
        const NmsConfig cfg{0.1, 1 + rng() % 4, 1 + rng() % 5};
        INFO("trial " << trial);
        CHECK(nms_boundaries(s, cfg) == BoundarySet(brute_force_nms(s, cfg)));
    }
}

TEST_CASE("NMS properties: spacing, count bound, monotone invariance", "[chunking][property]") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t L = 20 + rng() % 200;
        std::vector<double> s(L);
        for (auto& x : s) x = u(rng);
        const NmsConfig cfg{0.1, 1 + rng() % 10, 1 + rng() % 20};
        const auto b = nms_boundaries(s, cfg);
        CHECK(b.num_chunks() - 1 <= cfg.max_chunks - 1);
        const auto& idx = b.indices();
        for (std::size_t k = 2; k + 1 < idx.size(); ++k) CHECK(idx[k] - idx[k - 1] > cfg.window);

        // A positive monotone transform that keeps the same values above min_conf.
        std::vector<double> t(L);
        for (std::size_t i = 0; i < L; ++i) t[i] = s[i] > cfg.min_conf ? 0.1 + std::pow(s[i] - 0.1, 3.0) + 1e-12 : s[i];
        CHECK(nms_boundaries(t, cfg) == b);
    }
}

TEST_CASE("augmenting with explicit chunk ends", "[chunking]") {
    const BoundarySet b(Idx{0, 5, 10});
    const Idx ends{2, 4, 9};
    CHECK(augment_boundaries(b, ends).indices() == Idx{0, 3, 5, 10});
    const Idx beyond{10};
    CHECK_THROWS(augment_boundaries(b, beyond));
}

TEST_CASE("decode extension spot values", "[chunking]") {
    CHECK(extend_for_decode(BoundarySet(Idx{0, 4, 8}), 11).indices() == Idx{0, 4, 8, 10, 11});
    CHECK(extend_for_decode(BoundarySet(Idx{0, 8}), 9).indices() == Idx{0, 8, 9});
    CHECK(extend_for_decode(BoundarySet(Idx{0, 8}), 12).indices() == Idx{0, 8, 11, 12});
    CHECK_THROWS(extend_for_decode(BoundarySet(Idx{0, 8}), 8));
    CHECK_THROWS(extend_for_decode(BoundarySet(Idx{0, 8}), 3));
}
