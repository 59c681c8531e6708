// Copyright 2026 The hamtl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hamtl/geo.hpp"
#include "hamtl/labels.hpp"

namespace hamtl::corpus {

inline constexpr std::string_view kUserToken = "<USER>";
inline constexpr std::string_view kUrlToken = "<URL>";
inline constexpr std::size_t kDefaultMaxLen = 50;

enum class LabelSource { kGold, kWeak, kPseudo };

std::string_view label_source_name(LabelSource source);
std::optional<LabelSource> parse_label_source(std::string_view name);

struct TweetRecord {
  std::string tweet_id;
  std::string user_id;
  std::string raw_text;
  std::string normalized_text;
  std::vector<int> token_ids;
  std::size_t mask_len = 0;
  std::optional<LabelTriple> labels;
  LabelSource label_source = LabelSource::kGold;
  // Present iff label_source == kPseudo.
  std::optional<double> confidence;
};

// --- normalization, filtering, tokenization -------------------------------

bool is_arabic_diacritic(char32_t cp);
bool is_arabic_letter(char32_t cp);
bool is_punctuation(char32_t cp);

// URLs -> <URL>, @mentions -> <USER>, runs of 3+ identical characters -> 2,
// then optional diacritic removal. The ordered pass is repeated until the text
// stops changing, which makes the function idempotent.
std::string normalize_text(std::string_view raw, bool strip_diacritics = true);

enum class FilterOutcome { kKeep, kRetweet, kTooFewArabic };

std::string_view filter_outcome_name(FilterOutcome outcome);

std::size_t count_arabic_words(std::string_view text);

// Uses raw_text for the retweet check and normalized_text for the word count.
FilterOutcome filter_tweet(const TweetRecord& record);

std::vector<std::string> tokenize(std::string_view normalized);

// --- vocabulary -----------------------------------------------------------

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kUser = 2;
  static constexpr int kUrl = 3;
  static constexpr std::array<std::string_view, 4> kReserved = {
      "<PAD>", "<UNK>", "<USER>", "<URL>"};

  // Only the reserved entries.
  Vocabulary();
  // tokens[0..3] must equal kReserved.
  explicit Vocabulary(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the newline-joined token list.
  std::uint64_t hash() const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_count = 1);

struct Encoded {
  std::vector<int> token_ids;
  std::size_t mask_len = 0;
};

// Keeps the first max_len tokens; right-pads with PAD.
Encoded encode_sequence(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab,
                        std::size_t max_len = kDefaultMaxLen);

// normalize -> tokenize -> encode, filling the record's derived fields.
void prepare_record(TweetRecord& record, const Vocabulary& vocab,
                    std::size_t max_len = kDefaultMaxLen,
                    bool strip_diacritics = true);

// --- splits ---------------------------------------------------------------

struct SplitOptions {
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};
  std::size_t cap = 100000;
  std::uint64_t seed = 0;
  bool user_disjoint = false;
};

struct SplitSet {
  std::vector<TweetRecord> train;
  std::vector<TweetRecord> dev;
  std::vector<TweetRecord> test;
  std::uint64_t seed = 0;
};

// Seeded shuffle, ratio partition, then per-country down-sampling of TRAIN to
// at most `cap` records. Randomness is keyed on (seed, tweet_id), so the
// result does not depend on input order or worker count.
SplitSet make_splits(const std::vector<TweetRecord>& records,
                     const SplitOptions& options = {});

// --- synthetic corpus -----------------------------------------------------

struct SyntheticOptions {
  std::size_t vocab_size = 500;
  std::size_t tweets_per_city = 200;
  std::size_t tweet_len = 12;
  double state_drift = 0.5;
  double city_drift = 0.5;
  std::uint64_t seed = 0;
  std::size_t tweets_per_user = 20;
};

// Stable Arabic-letter surface form for synthetic token k. No two adjacent
// letters are equal, so normalization leaves it untouched.
std::string synthetic_token(std::size_t k);

// Per-city unigram distributions, indexed like hierarchy.cities().
std::vector<std::vector<double>> synthetic_city_distributions(
    const geo::LocationHierarchy& hierarchy, const SyntheticOptions& options);

std::vector<TweetRecord> generate_synthetic_corpus(
    const geo::LocationHierarchy& hierarchy, const SyntheticOptions& options);

// --- JSON Lines -----------------------------------------------------------

// Fields: tweet_id, user_id, text, optional city/state/country, optional
// label_source and confidence. `text` is loaded into raw_text.
std::vector<TweetRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<TweetRecord>& records,
                 const std::filesystem::path& path);
std::string to_json_line(const TweetRecord& record);
TweetRecord from_json_line(std::string_view line);

}  // namespace hamtl::corpus
