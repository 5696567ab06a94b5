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

#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "svcal/core_io.hpp"

namespace svcal {

enum class Similarity { kCosine, kInnerProduct };

Similarity parse_similarity(const std::string &name);  // "cosine" | "inner"
std::string_view to_string(Similarity sim);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

/// dot(e,t) / (|e| |t|). Throws DataError on a zero-norm argument.
double cosine_score(std::span<const double> e, std::span<const double> t);
double inner_product_score(std::span<const double> e, std::span<const double> t);
double similarity(Similarity kind, std::span<const double> e, std::span<const double> t);

inline double cosine_score(const Embedding &e, const Embedding &t) {
  return cosine_score(e.values(), t.values());
}
inline double inner_product_score(const Embedding &e, const Embedding &t) {
  return inner_product_score(e.values(), t.values());
}

/// One unit-norm mean per speaker: utterances are length-normalized,
/// averaged, and the average re-normalized. Speakers sorted by id.
Cohort build_cohort(const EmbeddingStore &store);

/// One raw score per trial, in input order.
ScoreSet score_trials(const TrialList &trials, const EmbeddingStore &store, Similarity scorer);

struct SnormConfig {
  std::size_t cohort_top_n = 100;
  Similarity rank_similarity = Similarity::kCosine;
};

struct CohortStats {
  double mean = 0.0;
  double stddev = 0.0;  // population (1/N)
};

/// Indices of the top_n cohort entries most similar to v under `rank`.
/// Ties go to the lexicographically smaller speaker id.
std::vector<std::size_t> top_cohort(std::span<const double> v, const Cohort &cohort, std::size_t top_n,
                                    Similarity rank);

/// Mean and population standard deviation of `scorer` scores between v
/// and its top-N cohort entries.
CohortStats cohort_stats(std::span<const double> v, const Cohort &cohort, const SnormConfig &cfg,
                         Similarity scorer);

/// 0.5 * ((s - mu_e)/sigma_e + (s - mu_t)/sigma_t).
double snorm_value(double s, const CohortStats &enroll, const CohortStats &test);

/// Fills the normalized column of a copy of `raw`. Cohort statistics are
/// computed once per distinct utterance. `scorer` must be the scorer that
/// produced the raw scores.
ScoreSet adaptive_snorm(const TrialList &trials, const ScoreSet &raw, const EmbeddingStore &store,
                        const Cohort &cohort, const SnormConfig &cfg, Similarity scorer);

}  // namespace svcal
