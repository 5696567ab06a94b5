// Copyright 2026  The svcal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "svcal/error.hpp"
#include "svcal/scoring.hpp"
#include "test_util.hpp"

using namespace svcal;
using svcal::testing::make_embedding;

TEST_SUITE("scoring") {

TEST_CASE("cosine and inner product") {
  const std::vector<double> a{3, 4}, b{4, 3};
  CHECK(cosine_score(a, b) == doctest::Approx(0.96).epsilon(1e-15));
  CHECK(cosine_score(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_score(std::vector<double>{1, 0}, std::vector<double>{0, 2}) == 0.0);
  CHECK_THROWS_AS(cosine_score(std::vector<double>{0, 0}, a), DataError);

  CHECK(inner_product_score(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(inner_product_score(std::vector<double>{1, 1}, std::vector<double>{1, 1}) == 2.0);
  CHECK(inner_product_score(std::vector<double>{2, 0}, std::vector<double>{1, 0}) == 2.0);
  CHECK(cosine_score(std::vector<double>{2, 0}, std::vector<double>{1, 0}) == 1.0);
}

TEST_CASE("cosine is symmetric and scale invariant") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> a(7), b(7);
    for (auto &x : a) x = g(rng);
    for (auto &x : b) x = g(rng);
    std::vector<double> a3 = a;
    for (auto &x : a3) x *= 3.5;
    CHECK(cosine_score(a, b) == cosine_score(b, a));
    CHECK(cosine_score(a3, b) == doctest::Approx(cosine_score(a, b)).epsilon(1e-12));
    CHECK(std::abs(cosine_score(a, b)) <= 1.0);
  }
}

TEST_CASE("cohort construction") {
  SUBCASE("single utterance") {
    const EmbeddingStore s({make_embedding("u", {3, 4}, 10, "s1")});
    const Cohort c = build_cohort(s);
    REQUIRE(c.size() == 1);
    CHECK(c.means[0][0] == doctest::Approx(0.6));
    CHECK(c.means[0][1] == doctest::Approx(0.8));
  }
  SUBCASE("mean of normalized vectors") {
    const EmbeddingStore s({make_embedding("u1", {1, 0}, 10, "s1"), make_embedding("u2", {0, 5}, 10, "s1")});
    const Cohort c = build_cohort(s);
    CHECK(c.means[0][0] == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(c.means[0][1] == doctest::Approx(1 / std::sqrt(2.0)));
  }
  SUBCASE("sorted speaker ids") {
    const EmbeddingStore s({make_embedding("u1", {1, 0}, 10, "zeta"), make_embedding("u2", {0, 1}, 10, "alpha")});
    const Cohort c = build_cohort(s);
    CHECK(c.speaker_ids == std::vector<std::string>{"alpha", "zeta"});
    CHECK(c.means[0] == std::vector<double>{0, 1});
  }
  SUBCASE("speaker id required") {
    const EmbeddingStore s({make_embedding("u1", {1, 0})});
    CHECK_THROWS(build_cohort(s));
  }
}

TEST_CASE("trial scoring") {
  const EmbeddingStore s({make_embedding("a", {1, 2}), make_embedding("b", {1, 2}), make_embedding("c", {2, -1})});
  const ScoreSet one = score_trials(TrialList({{"a", "b", std::nullopt}}), s, Similarity::kCosine);
  CHECK(one.rows.at(0).raw == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(score_trials(TrialList{}, s, Similarity::kCosine).empty());
  try {
    score_trials(TrialList({{"a", "b", std::nullopt}, {"a", "missing", std::nullopt}}), s, Similarity::kCosine);
    FAIL("expected an error");
  } catch (const DataError &e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
}

TEST_CASE("s-norm formula") {
  CHECK(snorm_value(0.5, {0.2, 0.1}, {0.4, 0.2}) == doctest::Approx(1.75).epsilon(1e-14));
  CHECK(snorm_value(0.5, {0.4, 0.2}, {0.2, 0.1}) == snorm_value(0.5, {0.2, 0.1}, {0.4, 0.2}));
}

TEST_CASE("top cohort ranking and statistics") {
  Cohort c{{"a", "b", "c"}, {{1, 0}, {0, 1}, {std::sqrt(0.5), std::sqrt(0.5)}}};
  const std::vector<double> v{1, 0.1};
  const auto top = top_cohort(v, c, 2, Similarity::kCosine);
  CHECK(top == std::vector<std::size_t>{0, 2});
  SnormConfig cfg;
  cfg.cohort_top_n = 2;
  const CohortStats st = cohort_stats(v, c, cfg, Similarity::kInnerProduct);
  const double s0 = 1.0, s2 = 1.1 * std::sqrt(0.5);
  CHECK(st.mean == doctest::Approx((s0 + s2) / 2));
  CHECK(st.stddev == doctest::Approx(std::abs(s0 - s2) / 2));
  cfg.cohort_top_n = 4;
  CHECK_THROWS(cohort_stats(v, c, cfg, Similarity::kCosine));
}

TEST_CASE("adaptive s-norm is symmetric in enroll and test") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<Embedding> utts, coh;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> v(4);
    for (auto &x : v) x = g(rng);
    utts.push_back(make_embedding("u" + std::to_string(i), v));
  }
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(4);
    for (auto &x : v) x = g(rng);
    coh.push_back(make_embedding("c" + std::to_string(i), v, 10, "s" + std::to_string(i)));
  }
  const EmbeddingStore store(utts);
  const Cohort cohort = build_cohort(EmbeddingStore(coh));
  const TrialList fwd({{"u0", "u1", std::nullopt}, {"u2", "u3", std::nullopt}});
  const TrialList rev({{"u1", "u0", std::nullopt}, {"u3", "u2", std::nullopt}});
  SnormConfig cfg;
  cfg.cohort_top_n = 10;
  const ScoreSet a = adaptive_snorm(fwd, score_trials(fwd, store, Similarity::kCosine), store, cohort, cfg,
                                    Similarity::kCosine);
  const ScoreSet b = adaptive_snorm(rev, score_trials(rev, store, Similarity::kCosine), store, cohort, cfg,
                                    Similarity::kCosine);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.rows[i].raw == b.rows[i].raw);
    CHECK(*a.rows[i].normalized == doctest::Approx(*b.rows[i].normalized).epsilon(1e-14));
  }
  cfg.cohort_top_n = 21;
  CHECK_THROWS(adaptive_snorm(fwd, score_trials(fwd, store, Similarity::kCosine), store, cohort, cfg,
                              Similarity::kCosine));
}

}
