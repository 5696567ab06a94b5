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

#include "svcal/core_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "svcal/error.hpp"

namespace svcal {

namespace {

constexpr std::string_view kAbsent = "-";

bool skip_line(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string &path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

void finish(std::ofstream &out, const std::string &path) {
  out.flush();
  if (!out) throw Error("write failure on '" + path + "'");
}

std::string optional_token(const std::optional<double> &v) {
  return v ? format_real(*v) : std::string(kAbsent);
}

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::kTarget ? "target" : "nontarget";
}

std::string format_real(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_real(std::string_view token) {
  if (token.empty()) return std::nullopt;
  // from_chars rejects a leading '+', accept it for hand-written files.
  if (token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view token) {
  if (token.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

EmbeddingStore::EmbeddingStore(std::vector<Embedding> embeddings) : items_(std::move(embeddings)) {
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const Embedding &e = items_[i];
    if (i == 0) {
      dim_ = e.vector.size();
    } else if (e.vector.size() != dim_) {
      throw DataError("embedding '" + e.utt_id + "' has dimension " +
                      std::to_string(e.vector.size()) + ", expected " + std::to_string(dim_));
    }
    for (double v : e.vector) {
      if (!std::isfinite(v)) throw DataError("embedding '" + e.utt_id + "' has a non-finite value");
    }
    if (e.n_frames < 0) throw DataError("embedding '" + e.utt_id + "' has negative n_frames");
    if (e.n_speech_frames && (*e.n_speech_frames < 0 || *e.n_speech_frames > e.n_frames)) {
      throw DataError("embedding '" + e.utt_id + "' has n_speech_frames outside [0, n_frames]");
    }
    if (!index_.emplace(e.utt_id, i).second) {
      throw DataError("duplicate utt_id '" + e.utt_id + "'");
    }
  }
}

const Embedding *EmbeddingStore::find(std::string_view utt_id) const {
  auto it = index_.find(std::string(utt_id));
  return it == index_.end() ? nullptr : &items_[it->second];
}

const Embedding &EmbeddingStore::at(std::string_view utt_id) const {
  const Embedding *e = find(utt_id);
  if (e == nullptr) throw DataError("unknown utterance id '" + std::string(utt_id) + "'");
  return *e;
}

std::optional<std::size_t> EmbeddingStore::index_of(std::string_view utt_id) const {
  auto it = index_.find(std::string(utt_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TrialList::TrialList(std::vector<Trial> trials) : trials_(std::move(trials)) {
  if (trials_.empty()) return;
  const bool first = trials_.front().label.has_value();
  for (std::size_t i = 0; i < trials_.size(); ++i) {
    if (trials_[i].label.has_value() != first) {
      throw DataError("trial " + std::to_string(i) + ": mixed labeled and unlabeled trials");
    }
  }
}

std::vector<Label> TrialList::labels() const {
  if (!labeled()) throw DataError("trial list carries no labels");
  std::vector<Label> out;
  out.reserve(trials_.size());
  for (const Trial &t : trials_) out.push_back(*t.label);
  return out;
}

std::vector<double> ScoreSet::raw() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const Score &s : rows) out.push_back(s.raw);
  return out;
}

std::vector<double> ScoreSet::normalized() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].normalized) throw DataError("score " + std::to_string(i) + " has no normalized value");
    out.push_back(*rows[i].normalized);
  }
  return out;
}

std::vector<double> ScoreSet::llr() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].llr) throw DataError("score " + std::to_string(i) + " has no llr value");
    out.push_back(*rows[i].llr);
  }
  return out;
}

std::vector<double> ScoreSet::best_available() const {
  for (const Score &s : rows) {
    if (!s.normalized) return raw();
  }
  return normalized();
}

void ScoreSet::validate() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Score &s = rows[i];
    if (!std::isfinite(s.raw) || (s.normalized && !std::isfinite(*s.normalized)) ||
        (s.llr && !std::isfinite(*s.llr))) {
      throw DataError("score " + std::to_string(i) + " is not finite");
    }
  }
}

void Cohort::validate() const {
  if (speaker_ids.size() != means.size()) throw DataError("cohort ids and means differ in length");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!seen.insert(speaker_ids[i]).second) {
      throw DataError("duplicate cohort speaker '" + speaker_ids[i] + "'");
    }
    if (means[i].size() != dim()) throw DataError("cohort means differ in dimension");
    double sq = 0.0;
    for (double v : means[i]) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
      throw DataError("cohort mean for '" + speaker_ids[i] + "' is not unit length");
    }
  }
}

// ---------------------------------------------------------------------------

EmbeddingStore read_embeddings(std::istream &in, const std::string &name) {
  std::vector<Embedding> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto f = split_fields(line);
    if (f.size() < 5) throw ParseError(name, lineno, "expected at least 5 fields");
    Embedding e;
    e.utt_id = std::string(f[0]);
    if (f[1] != kAbsent) e.speaker_id = std::string(f[1]);
    auto frames = parse_int(f[2]);
    if (!frames || *frames < 0) throw ParseError(name, lineno, "bad n_frames '" + std::string(f[2]) + "'");
    e.n_frames = *frames;
    if (f[3] != kAbsent) {
      auto speech = parse_int(f[3]);
      if (!speech || *speech < 0) {
        throw ParseError(name, lineno, "bad n_speech_frames '" + std::string(f[3]) + "'");
      }
      if (*speech > e.n_frames) throw ParseError(name, lineno, "n_speech_frames exceeds n_frames");
      e.n_speech_frames = *speech;
    }
    auto dim = parse_int(f[4]);
    if (!dim || *dim < 0) throw ParseError(name, lineno, "bad dimension '" + std::string(f[4]) + "'");
    if (f.size() != 5 + static_cast<std::size_t>(*dim)) {
      throw ParseError(name, lineno, "declared dimension " + std::to_string(*dim) + " but found " +
                                         std::to_string(f.size() - 5) + " values");
    }
    e.vector.reserve(*dim);
    for (std::size_t k = 5; k < f.size(); ++k) {
      auto v = parse_real(f[k]);
      if (!v) throw ParseError(name, lineno, "bad value '" + std::string(f[k]) + "'");
      if (!std::isfinite(*v)) throw ParseError(name, lineno, "non-finite value '" + std::string(f[k]) + "'");
      e.vector.push_back(*v);
    }
    if (!items.empty() && e.vector.size() != items.front().vector.size()) {
      throw ParseError(name, lineno, "inconsistent dimension " + std::to_string(e.vector.size()) +
                                         ", expected " + std::to_string(items.front().vector.size()));
    }
    items.push_back(std::move(e));
  }
  try {
    return EmbeddingStore(std::move(items));
  } catch (const DataError &err) {
    throw DataError(name + ": " + err.what());
  }
}

void write_embeddings(const EmbeddingStore &store, std::ostream &out) {
  for (const Embedding &e : store) {
    out << e.utt_id << ' ' << (e.speaker_id ? *e.speaker_id : std::string(kAbsent)) << ' '
        << e.n_frames << ' '
        << (e.n_speech_frames ? std::to_string(*e.n_speech_frames) : std::string(kAbsent)) << ' '
        << e.vector.size();
    for (double v : e.vector) out << ' ' << format_real(v);
    out << '\n';
  }
}

EmbeddingStore load_embeddings(const std::string &path) {
  auto in = open_in(path);
  return read_embeddings(in, path);
}

void save_embeddings(const EmbeddingStore &store, const std::string &path) {
  auto out = open_out(path);
  write_embeddings(store, out);
  finish(out, path);
}

TrialList read_trials(std::istream &in, const std::string &name) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t lineno = 0;
  std::optional<bool> labeled;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto f = split_fields(line);
    if (f.size() != 2 && f.size() != 3) throw ParseError(name, lineno, "expected 2 or 3 fields");
    Trial t{std::string(f[0]), std::string(f[1]), std::nullopt};
    if (f.size() == 3) {
      if (f[2] == "target") {
        t.label = Label::kTarget;
      } else if (f[2] == "nontarget") {
        t.label = Label::kNontarget;
      } else {
        throw ParseError(name, lineno, "unknown label '" + std::string(f[2]) + "'");
      }
    }
    if (labeled && *labeled != t.label.has_value()) {
      throw ParseError(name, lineno, "mixed labeled and unlabeled trials");
    }
    labeled = t.label.has_value();
    trials.push_back(std::move(t));
  }
  return TrialList(std::move(trials));
}

void write_trials(const TrialList &trials, std::ostream &out) {
  for (const Trial &t : trials) {
    out << t.enroll_id << ' ' << t.test_id;
    if (t.label) out << ' ' << to_string(*t.label);
    out << '\n';
  }
}

TrialList load_trials(const std::string &path) {
  auto in = open_in(path);
  return read_trials(in, path);
}

void save_trials(const TrialList &trials, const std::string &path) {
  auto out = open_out(path);
  write_trials(trials, out);
  finish(out, path);
}

ScoredTrials read_scores(std::istream &in, const std::string &name) {
  std::vector<Trial> trials;
  ScoreSet scores;
  std::string line;
  std::size_t lineno = 0;
  auto read_opt = [&](std::string_view tok) -> std::optional<double> {
    if (tok == kAbsent) return std::nullopt;
    auto v = parse_real(tok);
    if (!v) throw ParseError(name, lineno, "bad score '" + std::string(tok) + "'");
    if (!std::isfinite(*v)) throw ParseError(name, lineno, "non-finite score");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto f = split_fields(line);
    if (f.size() < 3 || f.size() > 5) throw ParseError(name, lineno, "expected 3 to 5 fields");
    auto raw = read_opt(f[2]);
    if (!raw) throw ParseError(name, lineno, "raw score must be present");
    Score s;
    s.raw = *raw;
    if (f.size() > 3) s.normalized = read_opt(f[3]);
    if (f.size() > 4) s.llr = read_opt(f[4]);
    trials.push_back(Trial{std::string(f[0]), std::string(f[1]), std::nullopt});
    scores.rows.push_back(s);
  }
  return ScoredTrials{TrialList(std::move(trials)), std::move(scores)};
}

void write_scores(const ScoreSet &scores, const TrialList &trials, std::ostream &out) {
  if (scores.size() != trials.size()) {
    throw DataError("score set has " + std::to_string(scores.size()) + " rows but trial list has " +
                    std::to_string(trials.size()));
  }
  scores.validate();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Score &s = scores[i];
    out << trials[i].enroll_id << ' ' << trials[i].test_id << ' ' << format_real(s.raw);
    if (s.normalized || s.llr) out << ' ' << optional_token(s.normalized);
    if (s.llr) out << ' ' << format_real(*s.llr);
    out << '\n';
  }
}

ScoredTrials load_scores(const std::string &path) {
  auto in = open_in(path);
  return read_scores(in, path);
}

void save_scores(const ScoreSet &scores, const TrialList &trials, const std::string &path) {
  auto out = open_out(path);
  write_scores(scores, trials, out);
  finish(out, path);
}

std::unordered_map<std::string, std::vector<double>> load_frame_energies(const std::string &path) {
  auto in = open_in(path);
  std::unordered_map<std::string, std::vector<double>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto f = split_fields(line);
    if (f.size() < 2) throw ParseError(path, lineno, "expected an id and at least one energy");
    std::vector<double> energies;
    energies.reserve(f.size() - 1);
    for (std::size_t k = 1; k < f.size(); ++k) {
      auto v = parse_real(f[k]);
      if (!v || !std::isfinite(*v) || *v < 0.0) {
        throw ParseError(path, lineno, "bad energy '" + std::string(f[k]) + "'");
      }
      energies.push_back(*v);
    }
    if (!out.emplace(std::string(f[0]), std::move(energies)).second) {
      throw ParseError(path, lineno, "duplicate id '" + std::string(f[0]) + "'");
    }
  }
  return out;
}

void require_same_pairs(const TrialList &a, const TrialList &b) {
  if (a.size() != b.size()) {
    throw DataError("trial lists differ in length (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].enroll_id != b[i].enroll_id || a[i].test_id != b[i].test_id) {
      throw DataError("trial " + std::to_string(i) + " differs: " + a[i].enroll_id + " " +
                      a[i].test_id + " vs " + b[i].enroll_id + " " + b[i].test_id);
    }
  }
}

}  // namespace svcal
