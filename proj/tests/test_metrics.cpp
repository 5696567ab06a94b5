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
#include <numeric>
#include <random>

#include "metric_oracle.hpp"
#include "svcal/error.hpp"
#include "svcal/metrics.hpp"
#include "test_util.hpp"

using namespace svcal;
using svcal::testing::make_labels;

namespace {

struct Set {
  std::vector<double> scores;
  std::vector<Label> labels;
};

Set random_set(std::mt19937_64 &rng, std::size_t n, bool ties) {
  std::normal_distribution<double> g;
  std::bernoulli_distribution tgt(0.3);
  Set s;
  for (std::size_t i = 0; i < n; ++i) {
    const bool t = i < 2 ? i == 0 : tgt(rng);
    double v = g(rng) + (t ? 2.0 : 0.0);
    if (ties) v = std::round(v * 4.0) / 4.0;
    s.scores.push_back(v);
    s.labels.push_back(t ? Label::kTarget : Label::kNontarget);
  }
  return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("equal error rate examples") {
  const auto lab = make_labels(2, 2);
  CHECK(eer(std::vector<double>{2, 3, 0, 1}, lab) == 0.0);
  CHECK(eer(std::vector<double>{1, 3, 0, 2}, lab) == 0.5);
  CHECK(eer(std::vector<double>{0, 1, 2, 3}, lab) == 1.0);
  CHECK(eer(std::vector<double>{1, 3, 0, 2}, lab, EerMode::kNearestMax) == 0.5);
}

TEST_CASE("minimum detection cost examples") {
  const auto lab = make_labels(2, 2);
  CHECK(min_dcf(std::vector<double>{2, 3, 0, 1}, lab, {}) == 0.0);
  CHECK(min_dcf(std::vector<double>(4, 0.7), lab, {0.01, 1, 1}) == 1.0);
  CHECK(min_dcf(std::vector<double>{1, 3, 0, 2}, lab, {0.5, 1, 1}) == 0.5);
}

TEST_CASE("actual detection cost examples") {
  const auto lab = make_labels(2, 2);
  CHECK(act_dcf(std::vector<double>{20, 30, -20, -30}, lab, {0.01, 1, 1}) == 0.0);
  CHECK(act_dcf(std::vector<double>(4, 0.0), lab, {0.5, 1, 1}) == 1.0);
}

TEST_CASE("cllr examples") {
  const auto lab = make_labels(2, 2);
  CHECK(cllr(std::vector<double>(4, 0.0), lab) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cllr(std::vector<double>{1e300, 800, -1e300, -800}, lab) == 0.0);
  CHECK(cllr(std::vector<double>{-800, 5, -2, -3}, lab) == std::numeric_limits<double>::infinity());
  const double expect = std::log2(1.0 + std::exp(-2.0));
  CHECK(cllr(std::vector<double>{2.0, -2.0}, make_labels(1, 1)) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("input checks") {
  CHECK_THROWS_AS(eer(std::vector<double>{1, 2}, make_labels(2, 0)), DataError);
  CHECK_THROWS_AS(eer(std::vector<double>{1, std::nan("")}, make_labels(1, 1)), DataError);
  CHECK_THROWS_AS(min_dcf(std::vector<double>{1}, make_labels(1, 1), {}), DataError);
  CHECK_THROWS_AS(min_dcf(std::vector<double>{1, 0}, make_labels(1, 1), {1.5, 1, 1}), ConfigError);
}

TEST_CASE("metrics agree with the brute-force oracle") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 40; ++k) {
    const Set s = random_set(rng, 10 + 13 * k, k % 3 == 0);
    const DcfParams p{k % 2 ? 0.01 : 0.05, 1.0, k % 4 ? 1.0 : 3.0};
    CHECK(eer(s.scores, s.labels) == svcal::testing::oracle_eer(s.scores, s.labels));
    CHECK(min_dcf(s.scores, s.labels, p) == svcal::testing::oracle_min_dcf(s.scores, s.labels, p));
    CHECK(act_dcf(s.scores, s.labels, p) == svcal::testing::oracle_act_dcf(s.scores, s.labels, p));
    CHECK(cllr(s.scores, s.labels) == doctest::Approx(svcal::testing::oracle_cllr(s.scores, s.labels)).epsilon(1e-12));
  }
}

TEST_CASE("ordering properties") {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 20; ++k) {
    Set s = random_set(rng, 200, k % 2 == 0);
    const DcfParams p{0.05, 1, 1};
    const double e = eer(s.scores, s.labels), md = min_dcf(s.scores, s.labels, p);
    const double ad = act_dcf(s.scores, s.labels, p), c = cllr(s.scores, s.labels);
    CHECK(md <= ad);
    CHECK(md <= 1.0);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);

    std::vector<std::size_t> perm(s.scores.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Set q;
    for (std::size_t i : perm) {
      q.scores.push_back(s.scores[i]);
      q.labels.push_back(s.labels[i]);
    }
    CHECK(eer(q.scores, q.labels) == e);
    CHECK(min_dcf(q.scores, q.labels, p) == md);
    CHECK(act_dcf(q.scores, q.labels, p) == ad);
    CHECK(cllr(q.scores, q.labels) == doctest::Approx(c).epsilon(1e-13));

    std::vector<double> mapped;
    for (double v : s.scores) mapped.push_back(std::exp(0.5 * v) - 3.0);
    CHECK(eer(mapped, s.labels) == e);
    CHECK(min_dcf(mapped, s.labels, p) == md);
  }
}

TEST_CASE("sweep end points") {
  const auto pts = sweep(std::vector<double>{1, 3, 0, 2}, make_labels(2, 2));
  REQUIRE(pts.size() == 5);
  CHECK(pts.front().p_miss == 0.0);
  CHECK(pts.front().p_fa == 1.0);
  CHECK(pts.back().p_miss == 1.0);
  CHECK(pts.back().p_fa == 0.0);
}

}
