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

#include "svcal/quality.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "svcal/error.hpp"
#include "svcal/parallel.hpp"
#include "svcal/scoring.hpp"

namespace svcal {

namespace {

constexpr QmfKind kCanonical[] = {QmfKind::kDuration, QmfKind::kSpeechDuration, QmfKind::kMagnitude,
                                  QmfKind::kImposterMean};

double clipped(std::int64_t frames, std::optional<std::int64_t> clip) {
  return static_cast<double>(clip ? std::min(frames, *clip) : frames);
}

}  // namespace

std::string_view to_string(QmfKind kind) {
  switch (kind) {
    case QmfKind::kDuration: return "duration";
    case QmfKind::kSpeechDuration: return "speech_duration";
    case QmfKind::kMagnitude: return "magnitude";
    case QmfKind::kImposterMean: return "imposter_mean";
  }
  return "?";
}

std::string_view to_string(CombineMode mode) {
  switch (mode) {
    case CombineMode::kMinMax: return "min_max";
    case CombineMode::kMean: return "mean";
    case CombineMode::kMin: return "min";
  }
  return "?";
}

QmfKind parse_qmf_kind(const std::string &name) {
  for (QmfKind k : kCanonical) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown QMF '" + name + "'");
}

CombineMode parse_combine_mode(const std::string &name) {
  for (CombineMode m : {CombineMode::kMinMax, CombineMode::kMean, CombineMode::kMin}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown combine mode '" + name + "' (expected min_max, mean or min)");
}

std::set<QmfKind> parse_qmf_list(const std::string &csv) {
  std::set<QmfKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(parse_qmf_kind(item));
  }
  return out;
}

std::size_t QmfConfig::feature_count() const {
  return enabled.size() * (combine == CombineMode::kMinMax ? 2 : 1);
}

std::vector<std::string> QmfConfig::feature_names() const {
  std::vector<std::string> names;
  for (QmfKind k : kCanonical) {
    if (!enabled.count(k)) continue;
    const std::string base(to_string(k));
    switch (combine) {
      case CombineMode::kMinMax:
        names.push_back(base + ".min");
        names.push_back(base + ".max");
        break;
      case CombineMode::kMean: names.push_back(base + ".mean"); break;
      case CombineMode::kMin: names.push_back(base + ".min"); break;
    }
  }
  return names;
}

void QmfConfig::validate() const {
  if (enabled.empty()) throw ConfigError("quality-aware calibration requested with no QMF enabled");
  if (duration_clip_frames && *duration_clip_frames <= 0) throw ConfigError("duration clip must be positive");
  if (enabled.count(QmfKind::kImposterMean) && imposter_top_n == 0) {
    throw ConfigError("imposter top-n must be positive");
  }
}

nlohmann::json to_json(const QmfConfig &cfg) {
  nlohmann::json j;
  j["enabled"] = nlohmann::json::array();
  for (QmfKind k : kCanonical) {
    if (cfg.enabled.count(k)) j["enabled"].push_back(std::string(to_string(k)));
  }
  j["combine"] = std::string(to_string(cfg.combine));
  j["duration_clip_frames"] = cfg.duration_clip_frames ? nlohmann::json(*cfg.duration_clip_frames) : nlohmann::json();
  j["imposter_top_n"] = cfg.imposter_top_n;
  j["log_transform"] = nlohmann::json::array();
  for (QmfKind k : kCanonical) {
    if (cfg.log_transform.count(k)) j["log_transform"].push_back(std::string(to_string(k)));
  }
  j["features"] = cfg.feature_names();
  return j;
}

QmfConfig qmf_config_from_json(const nlohmann::json &j) {
  try {
    QmfConfig cfg;
    for (const auto &name : j.at("enabled")) cfg.enabled.insert(parse_qmf_kind(name.get<std::string>()));
    if (j.contains("combine")) cfg.combine = parse_combine_mode(j["combine"].get<std::string>());
    if (j.contains("duration_clip_frames") && !j["duration_clip_frames"].is_null()) {
      cfg.duration_clip_frames = j["duration_clip_frames"].get<std::int64_t>();
    }
    if (j.contains("imposter_top_n")) cfg.imposter_top_n = j["imposter_top_n"].get<std::size_t>();
    if (j.contains("log_transform")) {
      for (const auto &name : j["log_transform"]) cfg.log_transform.insert(parse_qmf_kind(name.get<std::string>()));
    }
    if (j.contains("features") && j["features"].get<std::vector<std::string>>() != cfg.feature_names()) {
      throw ConfigError("QMF feature order does not match the canonical order for this configuration");
    }
    return cfg;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("malformed QMF configuration: ") + e.what());
  }
}

double duration_qmf(const Embedding &u, std::optional<std::int64_t> clip) { return clipped(u.n_frames, clip); }

double speech_duration_qmf(const Embedding &u, std::optional<std::int64_t> clip) {
  if (!u.n_speech_frames) {
    throw DataError("utterance '" + u.utt_id +
                    "' has no speech-frame count; supply it in the embedding file or run the energy VAD");
  }
  return clipped(*u.n_speech_frames, clip);
}

double magnitude_qmf(const Embedding &u) { return l2_norm(u.vector); }

double imposter_mean_qmf(const Embedding &u, const Cohort &cohort, std::size_t top_n) {
  if (cohort.empty()) throw DataError("imposter QMF needs a nonempty cohort");
  auto top = top_cohort(u.values(), cohort, top_n, Similarity::kInnerProduct);
  double acc = 0.0;
  for (std::size_t j : top) acc += dot(u.values(), cohort.means[j]);
  return acc / static_cast<double>(top.size());
}

std::int64_t energy_vad(std::span<const double> frame_energies, double threshold_db_below_max) {
  if (frame_energies.empty()) throw DataError("energy VAD needs at least one frame");
  if (!(threshold_db_below_max > 0.0)) throw ConfigError("VAD threshold must be positive");
  double peak = 0.0;
  for (double e : frame_energies) {
    if (!(e >= 0.0)) throw DataError("negative or non-finite frame energy");
    peak = std::max(peak, e);
  }
  if (peak == 0.0) return 0;
  std::int64_t count = 0;
  for (double e : frame_energies) {
    if (e > 0.0 && 10.0 * std::log10(e / peak) >= -threshold_db_below_max) ++count;
  }
  return count;
}

EmbeddingStore with_vad_speech_frames(const EmbeddingStore &store,
                                      const std::unordered_map<std::string, std::vector<double>> &energies,
                                      double threshold_db_below_max) {
  std::vector<Embedding> items = store.items();
  for (Embedding &e : items) {
    if (e.n_speech_frames) continue;
    auto it = energies.find(e.utt_id);
    if (it == energies.end()) continue;
    e.n_speech_frames = std::min(e.n_frames, energy_vad(it->second, threshold_db_below_max));
  }
  return EmbeddingStore(std::move(items));
}

std::vector<double> symmetric_combine(double q_enroll, double q_test, CombineMode mode) {
  const double lo = std::min(q_enroll, q_test);
  const double hi = std::max(q_enroll, q_test);
  switch (mode) {
    case CombineMode::kMinMax: return {lo, hi};
    case CombineMode::kMean: return {0.5 * (lo + hi)};
    case CombineMode::kMin: return {lo};
  }
  return {};
}

double utterance_qmf(QmfKind kind, const Embedding &u, const Cohort *cohort, const QmfConfig &cfg) {
  double v = 0.0;
  switch (kind) {
    case QmfKind::kDuration: v = duration_qmf(u, cfg.duration_clip_frames); break;
    case QmfKind::kSpeechDuration: v = speech_duration_qmf(u, cfg.duration_clip_frames); break;
    case QmfKind::kMagnitude: v = magnitude_qmf(u); break;
    case QmfKind::kImposterMean:
      if (cohort == nullptr) throw ConfigError("imposter_mean QMF requires a cohort");
      v = imposter_mean_qmf(u, *cohort, cfg.imposter_top_n);
      break;
  }
  if (cfg.log_transform.count(kind)) {
    if (!(v > 0.0)) {
      throw DataError("log transform of non-positive " + std::string(to_string(kind)) + " QMF for '" + u.utt_id + "'");
    }
    v = std::log(v);
  }
  return v;
}

namespace {

QualityVector combine_sides(const std::vector<double> &enroll, const std::vector<double> &test, CombineMode mode) {
  QualityVector q;
  for (std::size_t k = 0; k < enroll.size(); ++k) {
    auto part = symmetric_combine(enroll[k], test[k], mode);
    q.values.insert(q.values.end(), part.begin(), part.end());
  }
  return q;
}

std::vector<double> measure_utterance(const Embedding &u, const Cohort *cohort, const QmfConfig &cfg) {
  std::vector<double> out;
  for (QmfKind k : kCanonical) {
    if (cfg.enabled.count(k)) out.push_back(utterance_qmf(k, u, cohort, cfg));
  }
  return out;
}

}  // namespace

QualityVector assemble_quality_vector(const Trial &trial, const EmbeddingStore &store, const Cohort *cohort,
                                      const QmfConfig &cfg) {
  cfg.validate();
  return combine_sides(measure_utterance(store.at(trial.enroll_id), cohort, cfg),
                       measure_utterance(store.at(trial.test_id), cohort, cfg), cfg.combine);
}

std::vector<QualityVector> assemble_quality_vectors(const TrialList &trials, const EmbeddingStore &store,
                                                    const Cohort *cohort, const QmfConfig &cfg) {
  cfg.validate();
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<const Embedding *> utts;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    for (const std::string *id : {&trials[i].enroll_id, &trials[i].test_id}) {
      if (slot.count(*id)) continue;
      const Embedding *e = store.find(*id);
      if (e == nullptr) throw DataError("trial " + std::to_string(i) + ": unknown utterance id '" + *id + "'");
      slot.emplace(*id, utts.size());
      utts.push_back(e);
    }
  }
  std::vector<std::vector<double>> measured(utts.size());
  parallel_for(utts.size(), [&](std::size_t k) { measured[k] = measure_utterance(*utts[k], cohort, cfg); });

  std::vector<QualityVector> out(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    out[i] = combine_sides(measured[slot.at(trials[i].enroll_id)], measured[slot.at(trials[i].test_id)], cfg.combine);
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_quality_features(const QualityFeatures &features, std::ostream &out) {
  if (features.trials.size() != features.vectors.size()) {
    throw DataError("quality vectors are not aligned with the trial list");
  }
  if (features.config) out << "#qmf " << to_json(*features.config).dump() << '\n';
  for (std::size_t i = 0; i < features.vectors.size(); ++i) {
    out << features.trials[i].enroll_id << ' ' << features.trials[i].test_id;
    for (double v : features.vectors[i].values) out << ' ' << format_real(v);
    out << '\n';
  }
}

QualityFeatures read_quality_features(std::istream &in, const std::string &name) {
  QualityFeatures f;
  std::vector<Trial> trials;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> width;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("#qmf ", 0) == 0) {
      try {
        f.config = qmf_config_from_json(nlohmann::json::parse(line.substr(5)));
      } catch (const std::exception &e) {
        throw ParseError(name, lineno, std::string("bad QMF header: ") + e.what());
      }
      continue;
    }
    auto fields = split_fields(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() < 2) throw ParseError(name, lineno, "expected enroll and test ids");
    QualityVector q;
    for (std::size_t k = 2; k < fields.size(); ++k) {
      auto v = parse_real(fields[k]);
      if (!v || !std::isfinite(*v)) throw ParseError(name, lineno, "bad QMF value '" + std::string(fields[k]) + "'");
      q.values.push_back(*v);
    }
    if (width && *width != q.size()) throw ParseError(name, lineno, "inconsistent number of QMF features");
    width = q.size();
    if (f.config && f.config->feature_count() != q.size()) {
      throw ParseError(name, lineno, "feature count does not match the QMF header");
    }
    trials.push_back(Trial{std::string(fields[0]), std::string(fields[1]), std::nullopt});
    f.vectors.push_back(std::move(q));
  }
  f.trials = TrialList(std::move(trials));
  return f;
}

void save_quality_features(const QualityFeatures &features, const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_quality_features(features, out);
  out.flush();
  if (!out) throw Error("write failure on '" + path + "'");
}

QualityFeatures load_quality_features(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return read_quality_features(in, path);
}

}  // namespace svcal
