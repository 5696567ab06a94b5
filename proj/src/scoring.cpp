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

#include "svcal/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "svcal/error.hpp"
#include "svcal/parallel.hpp"

namespace svcal {

Similarity parse_similarity(const std::string &name) {
  if (name == "cosine") return Similarity::kCosine;
  if (name == "inner" || name == "inner_product") return Similarity::kInnerProduct;
  throw ConfigError("unknown similarity '" + name + "' (expected cosine or inner)");
}

std::string_view to_string(Similarity sim) {
  return sim == Similarity::kCosine ? "cosine" : "inner";
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("dimension mismatch in dot product");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double cosine_score(std::span<const double> e, std::span<const double> t) {
  const double ne = l2_norm(e);
  const double nt = l2_norm(t);
  if (ne == 0.0 || nt == 0.0) throw DataError("cosine score of a zero-norm vector");
  return dot(e, t) / (ne * nt);
}

double inner_product_score(std::span<const double> e, std::span<const double> t) { return dot(e, t); }

double similarity(Similarity kind, std::span<const double> e, std::span<const double> t) {
  return kind == Similarity::kCosine ? cosine_score(e, t) : inner_product_score(e, t);
}

Cohort build_cohort(const EmbeddingStore &store) {
  std::map<std::string, std::vector<double>> sums;
  for (const Embedding &e : store) {
    if (!e.speaker_id) throw DataError("utterance '" + e.utt_id + "' has no speaker id");
    const double n = l2_norm(e.vector);
    if (n == 0.0) throw DataError("utterance '" + e.utt_id + "' has a zero-norm embedding");
    auto &acc = sums[*e.speaker_id];
    acc.resize(e.vector.size(), 0.0);
    for (std::size_t k = 0; k < e.vector.size(); ++k) acc[k] += e.vector[k] / n;
  }
  Cohort cohort;
  for (auto &[spk, acc] : sums) {
    // Scaling by 1/count does not change the direction, so normalize directly.
    const double n = l2_norm(acc);
    if (n == 0.0) throw DataError("speaker '" + spk + "' has a zero mean direction");
    for (double &v : acc) v /= n;
    cohort.speaker_ids.push_back(spk);
    cohort.means.push_back(std::move(acc));
  }
  return cohort;
}

ScoreSet score_trials(const TrialList &trials, const EmbeddingStore &store, Similarity scorer) {
  ScoreSet out;
  out.rows.resize(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    for (const std::string *id : {&trials[i].enroll_id, &trials[i].test_id}) {
      if (store.find(*id) == nullptr) {
        throw DataError("trial " + std::to_string(i) + ": unknown utterance id '" + *id + "'");
      }
    }
  }
  parallel_for(trials.size(), [&](std::size_t i) {
    const Embedding &e = store.at(trials[i].enroll_id);
    const Embedding &t = store.at(trials[i].test_id);
    out.rows[i].raw = similarity(scorer, e.values(), t.values());
  });
  return out;
}

std::vector<std::size_t> top_cohort(std::span<const double> v, const Cohort &cohort, std::size_t top_n,
                                    Similarity rank) {
  if (cohort.empty()) throw DataError("empty cohort");
  if (top_n > cohort.size()) {
    throw ConfigError("cohort top-n " + std::to_string(top_n) + " exceeds cohort size " +
                      std::to_string(cohort.size()));
  }
  std::vector<double> sim(cohort.size());
  for (std::size_t j = 0; j < cohort.size(); ++j) sim[j] = similarity(rank, v, cohort.means[j]);
  std::vector<std::size_t> order(cohort.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    if (sim[a] != sim[b]) return sim[a] > sim[b];
    return cohort.speaker_ids[a] < cohort.speaker_ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_n), order.end(), better);
  order.resize(top_n);
  return order;
}

CohortStats cohort_stats(std::span<const double> v, const Cohort &cohort, const SnormConfig &cfg,
                         Similarity scorer) {
  if (cfg.cohort_top_n < 2) throw ConfigError("s-norm needs cohort top-n >= 2");
  auto top = top_cohort(v, cohort, cfg.cohort_top_n, cfg.rank_similarity);
  std::vector<double> scores;
  scores.reserve(top.size());
  for (std::size_t j : top) scores.push_back(similarity(scorer, v, cohort.means[j]));
  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  return CohortStats{mean, std::sqrt(var / n)};
}

double snorm_value(double s, const CohortStats &enroll, const CohortStats &test) {
  return 0.5 * ((s - enroll.mean) / enroll.stddev + (s - test.mean) / test.stddev);
}

ScoreSet adaptive_snorm(const TrialList &trials, const ScoreSet &raw, const EmbeddingStore &store,
                        const Cohort &cohort, const SnormConfig &cfg, Similarity scorer) {
  if (raw.size() != trials.size()) throw DataError("raw scores are not aligned with the trial list");
  if (cohort.empty()) throw DataError("empty cohort");
  if (cfg.cohort_top_n < 2) throw ConfigError("s-norm needs cohort top-n >= 2");
  if (cfg.cohort_top_n > cohort.size()) {
    throw ConfigError("cohort top-n " + std::to_string(cfg.cohort_top_n) + " exceeds cohort size " +
                      std::to_string(cohort.size()));
  }
  if (store.dim() != cohort.dim()) throw DataError("cohort and embedding dimensions differ");

  // Distinct utterances in first-appearance order.
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<const Embedding *> utts;
  std::vector<std::pair<std::size_t, std::size_t>> trial_slots(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::size_t ids[2];
    int side = 0;
    for (const std::string *id : {&trials[i].enroll_id, &trials[i].test_id}) {
      auto [it, inserted] = slot.emplace(*id, utts.size());
      if (inserted) {
        const Embedding *e = store.find(*id);
        if (e == nullptr) throw DataError("trial " + std::to_string(i) + ": unknown utterance id '" + *id + "'");
        utts.push_back(e);
      }
      ids[side++] = it->second;
    }
    trial_slots[i] = {ids[0], ids[1]};
  }

  std::vector<CohortStats> stats(utts.size());
  parallel_for(utts.size(), [&](std::size_t k) { stats[k] = cohort_stats(utts[k]->values(), cohort, cfg, scorer); });
  for (std::size_t k = 0; k < utts.size(); ++k) {
    if (!(stats[k].stddev > 0.0)) {
      throw DataError("degenerate cohort for '" + utts[k]->utt_id + "': zero score deviation");
    }
  }

  ScoreSet out = raw;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto [e, t] = trial_slots[i];
    out.rows[i].normalized = snorm_value(raw[i].raw, stats[e], stats[t]);
  }
  return out;
}

}  // namespace svcal
