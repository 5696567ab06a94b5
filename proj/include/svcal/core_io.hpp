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

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace svcal {

enum class Label : std::uint8_t { kNontarget = 0, kTarget = 1 };

std::string_view to_string(Label label);

/// Shortest decimal rendering that parses back to the identical double.
std::string format_real(double value);

/// Strict parse of a complete token; std::nullopt on any trailing garbage.
std::optional<double> parse_real(std::string_view token);
std::optional<std::int64_t> parse_int(std::string_view token);

/// Splits on runs of spaces/tabs.
std::vector<std::string_view> split_fields(std::string_view line);

struct Embedding {
  std::string utt_id;
  std::optional<std::string> speaker_id;
  std::vector<double> vector;
  std::int64_t n_frames = 0;
  std::optional<std::int64_t> n_speech_frames;

  std::span<const double> values() const { return vector; }
  bool operator==(const Embedding &) const = default;
};

/// Immutable, id-indexed set of embeddings sharing one dimension.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  /// Validates dimension, finiteness, frame counts and id uniqueness.
  explicit EmbeddingStore(std::vector<Embedding> embeddings);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t dim() const { return dim_; }

  const Embedding &operator[](std::size_t i) const { return items_[i]; }
  const Embedding *find(std::string_view utt_id) const;
  /// Throws DataError naming the id when absent.
  const Embedding &at(std::string_view utt_id) const;
  std::optional<std::size_t> index_of(std::string_view utt_id) const;

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const std::vector<Embedding> &items() const { return items_; }

  bool operator==(const EmbeddingStore &other) const { return items_ == other.items_; }

 private:
  std::vector<Embedding> items_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Trial {
  std::string enroll_id;
  std::string test_id;
  std::optional<Label> label;
  bool operator==(const Trial &) const = default;
};

/// Trials are either all labeled or all unlabeled.
class TrialList {
 public:
  TrialList() = default;
  explicit TrialList(std::vector<Trial> trials);

  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }
  bool labeled() const { return !trials_.empty() && trials_.front().label.has_value(); }
  const Trial &operator[](std::size_t i) const { return trials_[i]; }
  auto begin() const { return trials_.begin(); }
  auto end() const { return trials_.end(); }
  const std::vector<Trial> &trials() const { return trials_; }

  /// Throws DataError when the list is unlabeled.
  std::vector<Label> labels() const;

  bool operator==(const TrialList &) const = default;

 private:
  std::vector<Trial> trials_;
};

struct Score {
  double raw = 0.0;
  std::optional<double> normalized;
  std::optional<double> llr;
  bool operator==(const Score &) const = default;
};

/// Index-aligned with a TrialList.
struct ScoreSet {
  std::vector<Score> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  const Score &operator[](std::size_t i) const { return rows[i]; }
  Score &operator[](std::size_t i) { return rows[i]; }

  std::vector<double> raw() const;
  /// Throws DataError if any row lacks the column.
  std::vector<double> normalized() const;
  std::vector<double> llr() const;
  /// Normalized column when every row has it, raw otherwise.
  std::vector<double> best_available() const;

  /// Throws DataError on any non-finite score.
  void validate() const;
  bool operator==(const ScoreSet &) const = default;
};

struct ScoredTrials {
  TrialList trials;
  ScoreSet scores;
};

/// Per-speaker unit-norm mean embeddings, ordered by speaker id.
struct Cohort {
  std::vector<std::string> speaker_ids;
  std::vector<std::vector<double>> means;

  std::size_t size() const { return means.size(); }
  bool empty() const { return means.empty(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  /// Unit norm within 1e-6, unique ids, equal dimension.
  void validate() const;
};

// Embedding file: `utt_id speaker_id n_frames n_speech_frames d v1 ... vd`,
// with `-` for an absent speaker id or speech-frame count.
EmbeddingStore read_embeddings(std::istream &in, const std::string &name = "<stream>");
void write_embeddings(const EmbeddingStore &store, std::ostream &out);
EmbeddingStore load_embeddings(const std::string &path);
void save_embeddings(const EmbeddingStore &store, const std::string &path);

// Trial file: `enroll_id test_id [target|nontarget]`.
TrialList read_trials(std::istream &in, const std::string &name = "<stream>");
void write_trials(const TrialList &trials, std::ostream &out);
TrialList load_trials(const std::string &path);
void save_trials(const TrialList &trials, const std::string &path);

// Score file: `enroll_id test_id raw [normalized] [llr]`, `-` for absent.
ScoredTrials read_scores(std::istream &in, const std::string &name = "<stream>");
void write_scores(const ScoreSet &scores, const TrialList &trials, std::ostream &out);
ScoredTrials load_scores(const std::string &path);
void save_scores(const ScoreSet &scores, const TrialList &trials, const std::string &path);

// Frame-energy file: `utt_id e1 ... eT`, energies non-negative.
std::unordered_map<std::string, std::vector<double>> load_frame_energies(const std::string &path);

/// Throws DataError unless enroll/test ids agree row by row.
void require_same_pairs(const TrialList &a, const TrialList &b);

}  // namespace svcal
