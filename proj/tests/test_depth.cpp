#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "docaug/depth.hpp"
#include "test_util.hpp"

using namespace docaug;
using providers::EmbeddingVector;

namespace {

// Straightforward oracle: 2 - (1/|S|) * sum(1 - cos(t, s)), plain accumulation.
double depth_oracle(const EmbeddingVector& t, const std::vector<EmbeddingVector>& S) {
    double total = 0.0;
    for (const auto& s : S) total += 1.0 - providers::cosine_similarity(t, s);
    return 2.0 - total / static_cast<double>(S.size());
}

EmbeddingVector random_vec(std::mt19937_64& rng, std::size_t dim) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    EmbeddingVector v(dim);
    for (auto& x : v) x = d(rng);
    return v;
}

}  // namespace

TEST_CASE("tte_depth fixtures") {
    EmbeddingVector e1{1.0, 0.0};
    EmbeddingVector e2{0.0, 1.0};
    SUBCASE("identical singleton reference gives 2") {
        CHECK(depth::tte_depth(e1, {e1}) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("orthogonal singleton reference gives 1") {
        CHECK(depth::tte_depth(e1, {e2}) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("half identical, half orthogonal gives 1.5") {
        CHECK(depth::tte_depth(e1, {e1, e2}) == doctest::Approx(1.5).epsilon(1e-12));
    }
    SUBCASE("antipodal singleton reference gives 0") {
        EmbeddingVector neg{-1.0, 0.0};
        CHECK(depth::tte_depth(e1, {neg}) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("empty reference set throws") {
        CHECK_THROWS_AS(depth::tte_depth(e1, {}), depth::EmptyReferenceSet);
    }
}

TEST_CASE("tte_depth matches a plain-summation oracle on random inputs") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t dim = 2 + rng() % 16;
        std::size_t n = 1 + rng() % 50;
        auto t = random_vec(rng, dim);
        std::vector<EmbeddingVector> S;
        for (std::size_t i = 0; i < n; ++i) S.push_back(random_vec(rng, dim));
        double got = depth::tte_depth(t, S);
        CHECK(got == doctest::Approx(depth_oracle(t, S)).epsilon(1e-9));
        CHECK(got >= -1e-9);
        CHECK(got <= 2.0 + 1e-9);
    }
}

TEST_CASE("tte_depth invariances") {
    std::mt19937_64 rng(7);
    SUBCASE("permutation of the reference set") {
        for (int trial = 0; trial < 50; ++trial) {
            auto t = random_vec(rng, 8);
            std::vector<EmbeddingVector> S;
            for (int i = 0; i < 20; ++i) S.push_back(random_vec(rng, 8));
            auto S2 = S;
            std::shuffle(S2.begin(), S2.end(), rng);
            CHECK(depth::tte_depth(t, S) == doctest::Approx(depth::tte_depth(t, S2)).epsilon(1e-12));
        }
    }
    SUBCASE("positive scaling of any vector") {
        for (int trial = 0; trial < 50; ++trial) {
            auto t = random_vec(rng, 8);
            std::vector<EmbeddingVector> S;
            for (int i = 0; i < 10; ++i) S.push_back(random_vec(rng, 8));
            auto t2 = t;
            for (auto& x : t2) x *= 3.5;
            auto S2 = S;
            for (auto& x : S2[0]) x *= 0.25;
            CHECK(depth::tte_depth(t, S) == doctest::Approx(depth::tte_depth(t2, S2)).epsilon(1e-9));
        }
    }
    SUBCASE("appending t itself to S never lowers the depth") {
        for (int trial = 0; trial < 50; ++trial) {
            auto t = random_vec(rng, 8);
            std::vector<EmbeddingVector> S;
            for (int i = 0; i < 10; ++i) S.push_back(random_vec(rng, 8));
            auto S2 = S;
            S2.push_back(t);
            CHECK(depth::tte_depth(t, S2) >= depth::tte_depth(t, S) - 1e-9);
        }
    }
}

TEST_CASE("tte_depth stays accurate over many near-equal terms") {
    // 100k identical references: the mean distance must still be exactly 0-ish.
    EmbeddingVector t{3.0, 4.0};
    std::vector<EmbeddingVector> S(100000, EmbeddingVector{6.0, 8.0});
    CHECK(depth::tte_depth(t, S) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("RoleSet validation") {
    depth::RoleSet empty;
    CHECK_THROWS_AS(empty.validate(), Error);
    depth::RoleSet dup{{"A", "A"}, depth::RoleSet::Origin::target};
    CHECK_THROWS_AS(dup.validate(), Error);
    depth::RoleSet ok{{"A", "B"}, depth::RoleSet::Origin::target};
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("rank_roles with the hashed-count embedder") {
    providers::MockEmbedder emb;
    depth::RoleSet sources{{"fire damage", "fire rescue", "flood damage"},
                           depth::RoleSet::Origin::source};

    SUBCASE("hand-computed three-role ranking") {
        depth::RoleSet targets{{"fire", "storm", "fire damage"}, depth::RoleSet::Origin::target};
        auto ranked = depth::rank_roles(targets, sources, emb);
        REQUIRE(ranked.size() == 3);
        // "storm" shares no tokens: depth = 2 - 1 = 1.
        // "fire": cos 1/sqrt(2) with two sources, 0 with one -> 2 - (1 - sqrt(2)/3).
        // "fire damage": cos 1, 1/2, 1/2 -> 2 - (1 - 2/3) = 5/3.
        CHECK(ranked[0].role == "storm");
        CHECK(ranked[0].score == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ranked[1].role == "fire");
        CHECK(ranked[1].score ==
              doctest::Approx(1.0 + 2.0 / (3.0 * std::sqrt(2.0))).epsilon(1e-12));
        CHECK(ranked[2].role == "fire damage");
        CHECK(ranked[2].score == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("a role identical to the lone source scores 2") {
        depth::RoleSet one{{"fire damage"}, depth::RoleSet::Origin::source};
        depth::RoleSet targets{{"fire damage"}, depth::RoleSet::Origin::target};
        auto ranked = depth::rank_roles(targets, one, emb);
        REQUIRE(ranked.size() == 1);
        CHECK(ranked[0].score == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("ascending order with name tie-break") {
        depth::RoleSet targets{{"zz yy", "qq xx", "storm"}, depth::RoleSet::Origin::target};
        auto ranked = depth::rank_roles(targets, sources, emb);
        REQUIRE(ranked.size() == 3);
        for (std::size_t i = 1; i < ranked.size(); ++i) {
            bool ordered = ranked[i - 1].score < ranked[i].score ||
                           (ranked[i - 1].score == ranked[i].score &&
                            ranked[i - 1].role < ranked[i].role);
            CHECK(ordered);
        }
        // all three are token-disjoint from the sources: tied at 1, sorted by name
        CHECK(ranked[0].role == "qq xx");
        CHECK(ranked[1].role == "storm");
        CHECK(ranked[2].role == "zz yy");
    }
    SUBCASE("each distinct name embedded exactly once") {
        providers::MockEmbedder counting;
        depth::RoleSet targets{{"alpha", "beta"}, depth::RoleSet::Origin::target};
        depth::rank_roles(targets, sources, counting);
        CHECK(counting.texts_embedded() == 5);  // 3 sources + 2 targets
    }
}

TEST_CASE("select_outliers") {
    auto make_ranked = [](std::size_t n) {
        std::vector<depth::DepthScore> ranked;
        for (std::size_t i = 0; i < n; ++i) {
            ranked.push_back({"r" + std::to_string(i), 0.01 * static_cast<double>(i)});
        }
        return ranked;
    };
    SUBCASE("60 roles at fraction 0.25 selects the 15 lowest") {
        auto out = depth::select_outliers(make_ranked(60), {0.25});
        CHECK(out.size() == 15);
        for (std::size_t i = 0; i < 15; ++i) CHECK(out.count("r" + std::to_string(i)) == 1);
        CHECK(out.count("r15") == 0);
    }
    SUBCASE("floor semantics: 4 roles at 0.25 selects 1; 3 roles selects 0") {
        CHECK(depth::select_outliers(make_ranked(4), {0.25}).size() == 1);
        CHECK(depth::select_outliers(make_ranked(3), {0.25}).empty());
    }
    SUBCASE("fraction outside (0,1) throws") {
        CHECK_THROWS_AS(depth::select_outliers(make_ranked(4), {0.0}), Error);
        CHECK_THROWS_AS(depth::select_outliers(make_ranked(4), {1.0}), Error);
        CHECK_THROWS_AS(depth::select_outliers(make_ranked(4), {-0.5}), Error);
    }
    SUBCASE("empty ranking throws") {
        CHECK_THROWS_AS(depth::select_outliers({}, {0.25}), depth::EmptyRanking);
    }
    SUBCASE("sweep fractions give nested prefixes") {
        auto ranked = make_ranked(40);
        std::set<std::string> prev;
        for (double f : {0.15, 0.20, 0.25, 0.30, 0.35}) {
            auto cur = depth::select_outliers(ranked, {f});
            CHECK(cur.size() == static_cast<std::size_t>(std::floor(f * 40.0)));
            CHECK(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
            prev = std::move(cur);
        }
    }
}
