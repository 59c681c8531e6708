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

#include "hamtl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <unordered_set>

#include <json.hpp>

#include "hamtl/error.hpp"
#include "hamtl/hash.hpp"
#include "hamtl/utf8.hpp"

namespace hamtl::corpus {

std::string_view label_source_name(LabelSource source) {
  switch (source) {
    case LabelSource::kGold: return "gold";
    case LabelSource::kWeak: return "weak";
    case LabelSource::kPseudo: return "pseudo";
  }
  return "gold";
}

std::optional<LabelSource> parse_label_source(std::string_view name) {
  if (name == "gold") return LabelSource::kGold;
  if (name == "weak") return LabelSource::kWeak;
  if (name == "pseudo") return LabelSource::kPseudo;
  return std::nullopt;
}

bool is_arabic_diacritic(char32_t cp) {
  return (cp >= 0x064B && cp <= 0x065F) || cp == 0x0670;
}

bool is_arabic_letter(char32_t cp) { return cp >= 0x0621 && cp <= 0x064A; }

bool is_punctuation(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
           (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
  }
  switch (cp) {
    case 0x00A1: case 0x00AB: case 0x00BB: case 0x00BF:
    case 0x060C: case 0x061B: case 0x061F: case 0x06D4:
    case 0x066A: case 0x066B: case 0x066C: case 0x066D:
    case 0x2026:
      return true;
    default:
      return cp >= 0x2010 && cp <= 0x201F;
  }
}

namespace {

bool starts_with(const std::u32string& s, std::size_t pos,
                 std::u32string_view prefix) {
  return s.size() - pos >= prefix.size() &&
         std::u32string_view(s).substr(pos, prefix.size()) == prefix;
}

bool is_handle_char(char32_t cp) {
  return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
         (cp >= U'0' && cp <= U'9') || cp == U'_';
}

constexpr std::u32string_view kUser32 = U"<USER>";
constexpr std::u32string_view kUrl32 = U"<URL>";

std::u32string replace_urls(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    std::size_t prefix = 0;
    if (starts_with(in, i, U"https://")) {
      prefix = 8;
    } else if (starts_with(in, i, U"http://")) {
      prefix = 7;
    } else if (starts_with(in, i, U"www.")) {
      prefix = 4;
    }
    if (prefix == 0) {
      out.push_back(in[i++]);
      continue;
    }
    i += prefix;
    while (i < in.size() && !utf8::is_whitespace(in[i])) ++i;
    out.append(kUrl32);
  }
  return out;
}

std::u32string replace_mentions(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    if (in[i] == U'@') {
      std::size_t j = i + 1;
      while (j < in.size() && j - i - 1 < 15 && is_handle_char(in[j])) ++j;
      if (j > i + 1) {
        out.append(kUser32);
        i = j;
        continue;
      }
    }
    out.push_back(in[i++]);
  }
  return out;
}

std::u32string collapse_runs(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size());
  for (char32_t cp : in) {
    const std::size_t n = out.size();
    if (n >= 2 && out[n - 1] == cp && out[n - 2] == cp) continue;
    out.push_back(cp);
  }
  return out;
}

std::u32string remove_diacritics(const std::u32string& in) {
  std::u32string out;
  out.reserve(in.size());
  for (char32_t cp : in) {
    if (!is_arabic_diacritic(cp)) out.push_back(cp);
  }
  return out;
}

std::u32string normalize_pass(const std::u32string& in, bool strip) {
  std::u32string s = collapse_runs(replace_mentions(replace_urls(in)));
  return strip ? remove_diacritics(s) : s;
}

std::vector<std::u32string> split_whitespace(const std::u32string& s) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (char32_t cp : s) {
    if (utf8::is_whitespace(cp)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace

std::string normalize_text(std::string_view raw, bool strip_diacritics) {
  std::u32string cur = utf8::decode(raw);
  // Each pass only shortens non-placeholder text, so this terminates quickly.
  for (;;) {
    std::u32string next = normalize_pass(cur, strip_diacritics);
    if (next == cur) break;
    cur = std::move(next);
  }
  return utf8::encode(cur);
}

std::string_view filter_outcome_name(FilterOutcome outcome) {
  switch (outcome) {
    case FilterOutcome::kKeep: return "keep";
    case FilterOutcome::kRetweet: return "retweet";
    case FilterOutcome::kTooFewArabic: return "too_few_arabic";
  }
  return "keep";
}

std::size_t count_arabic_words(std::string_view text) {
  std::size_t count = 0;
  for (const auto& word : split_whitespace(utf8::decode(text))) {
    for (char32_t cp : word) {
      if (is_arabic_letter(cp)) {
        ++count;
        break;
      }
    }
  }
  return count;
}

FilterOutcome filter_tweet(const TweetRecord& record) {
  if (record.raw_text.rfind("RT @", 0) == 0) return FilterOutcome::kRetweet;
  const std::string normalized = record.normalized_text.empty()
                                     ? normalize_text(record.raw_text)
                                     : record.normalized_text;
  if (count_arabic_words(normalized) < 3) return FilterOutcome::kTooFewArabic;
  return FilterOutcome::kKeep;
}

std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> tokens;
  for (const auto& word : split_whitespace(utf8::decode(normalized))) {
    std::u32string cur;
    auto flush = [&] {
      if (!cur.empty()) tokens.push_back(utf8::encode(cur));
      cur.clear();
    };
    std::size_t i = 0;
    while (i < word.size()) {
      if (starts_with(word, i, kUser32)) {
        flush();
        tokens.emplace_back(kUserToken);
        i += kUser32.size();
      } else if (starts_with(word, i, kUrl32)) {
        flush();
        tokens.emplace_back(kUrlToken);
        i += kUrl32.size();
      } else if (is_punctuation(word[i])) {
        flush();
        std::string p;
        utf8::append(p, word[i]);
        tokens.push_back(std::move(p));
        ++i;
      } else {
        cur.push_back(word[i++]);
      }
    }
    flush();
  }
  return tokens;
}

// --- Vocabulary -----------------------------------------------------------

Vocabulary::Vocabulary()
    : Vocabulary(std::vector<std::string>(kReserved.begin(), kReserved.end())) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kReserved.size()) {
    throw Error(ErrorCode::kParseError, "vocabulary lacks reserved tokens");
  }
  for (std::size_t i = 0; i < kReserved.size(); ++i) {
    if (tokens_[i] != kReserved[i]) {
      throw Error(ErrorCode::kParseError,
                  "vocabulary id " + std::to_string(i) + " must be " +
                      std::string(kReserved[i]));
    }
  }
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw Error(ErrorCode::kParseError, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error(ErrorCode::kIdOutOfRange, "token id " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a64("");
  for (const auto& t : tokens_) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_count) {
  if (min_count < 1) throw Error(ErrorCode::kInvalidArgument, "min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> freq;
  std::size_t total = 0;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq) {
      ++freq[tok];
      ++total;
    }
  }
  if (total == 0) throw Error(ErrorCode::kEmptyCorpus, "no tokens in corpus");
  for (auto r : Vocabulary::kReserved) freq.erase(std::string(r));
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [tok, n] : freq) {
    if (n >= min_count) entries.emplace_back(tok, n);
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> tokens(Vocabulary::kReserved.begin(),
                                  Vocabulary::kReserved.end());
  for (auto& e : entries) tokens.push_back(std::move(e.first));
  return Vocabulary(std::move(tokens));
}

Encoded encode_sequence(const std::vector<std::string>& tokens,
                        const Vocabulary& vocab, std::size_t max_len) {
  Encoded enc;
  enc.mask_len = std::min(tokens.size(), max_len);
  enc.token_ids.assign(max_len, Vocabulary::kPad);
  for (std::size_t i = 0; i < enc.mask_len; ++i) {
    enc.token_ids[i] = vocab.id(tokens[i]);
  }
  return enc;
}

void prepare_record(TweetRecord& record, const Vocabulary& vocab,
                    std::size_t max_len, bool strip_diacritics) {
  record.normalized_text = normalize_text(record.raw_text, strip_diacritics);
  auto enc = encode_sequence(tokenize(record.normalized_text), vocab, max_len);
  record.token_ids = std::move(enc.token_ids);
  record.mask_len = enc.mask_len;
}

// --- splits ---------------------------------------------------------------

namespace {

const std::string& country_key(const TweetRecord& r) {
  static const std::string kNone;
  return r.labels ? r.labels->country : kNone;
}

void cap_per_country(std::vector<TweetRecord>& train, std::size_t cap,
                     std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_country;
  for (std::size_t i = 0; i < train.size(); ++i) {
    by_country[country_key(train[i])].push_back(i);
  }
  std::vector<bool> keep(train.size(), true);
  const std::uint64_t cap_seed = combine_seed(seed, std::string_view("cap"));
  for (auto& [_, idx] : by_country) {
    if (idx.size() <= cap) continue;
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(idx.size());
    for (auto i : idx) keyed.emplace_back(combine_seed(cap_seed, train[i].tweet_id), i);
    std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first
                                : train[a.second].tweet_id < train[b.second].tweet_id;
    });
    for (std::size_t k = cap; k < keyed.size(); ++k) keep[keyed[k].second] = false;
  }
  std::vector<TweetRecord> capped;
  capped.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (keep[i]) capped.push_back(std::move(train[i]));
  }
  train = std::move(capped);
}

}  // namespace

SplitSet make_splits(const std::vector<TweetRecord>& records,
                     const SplitOptions& options) {
  const auto& r = options.ratios;
  if (r[0] < 0 || r[1] < 0 || r[2] < 0 || std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "split ratios must be >= 0 and sum to 1");
  }
  if (options.cap < 1) throw Error(ErrorCode::kInvalidArgument, "cap must be >= 1");
  if (records.size() < 3) {
    throw Error(ErrorCode::kTooFewRecords,
                "need at least 3 records, got " + std::to_string(records.size()));
  }
  {
    std::unordered_set<std::string> ids;
    for (const auto& rec : records) {
      if (!ids.insert(rec.tweet_id).second) {
        throw Error(ErrorCode::kInvalidArgument, "duplicate tweet_id " + rec.tweet_id);
      }
    }
  }

  const std::size_t n = records.size();
  const auto n_train_target = static_cast<std::size_t>(std::llround(r[0] * n));
  const auto n_dev_target = std::min(
      n - std::min(n, n_train_target), static_cast<std::size_t>(std::llround(r[1] * n)));

  SplitSet out;
  out.seed = options.seed;

  if (!options.user_disjoint) {
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    order.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      order.emplace_back(combine_seed(options.seed, records[i].tweet_id), i);
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first
                                : records[a.second].tweet_id < records[b.second].tweet_id;
    });
    const std::size_t n_train = std::min(n, n_train_target);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& rec = records[order[k].second];
      if (k < n_train) {
        out.train.push_back(rec);
      } else if (k < n_train + n_dev_target) {
        out.dev.push_back(rec);
      } else {
        out.test.push_back(rec);
      }
    }
  } else {
    // Whole users are assigned greedily in hashed order until each split's
    // tweet budget is met.
    std::map<std::string, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < n; ++i) by_user[records[i].user_id].push_back(i);
    std::vector<std::pair<std::uint64_t, const std::string*>> users;
    for (const auto& [uid, _] : by_user) {
      users.emplace_back(combine_seed(options.seed, uid), &uid);
    }
    std::sort(users.begin(), users.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : *a.second < *b.second;
    });
    for (const auto& [_, uid] : users) {
      const auto& idx = by_user[*uid];
      std::vector<TweetRecord>* dst = &out.test;
      if (out.train.size() < n_train_target) {
        dst = &out.train;
      } else if (out.dev.size() < n_dev_target) {
        dst = &out.dev;
      }
      for (auto i : idx) dst->push_back(records[i]);
    }
  }

  cap_per_country(out.train, options.cap, options.seed);
  return out;
}

// --- synthetic corpus -----------------------------------------------------

namespace {

constexpr std::array<char32_t, 28> kLetters = {
    0x0627, 0x0628, 0x062A, 0x062B, 0x062C, 0x062D, 0x062E, 0x062F, 0x0630, 0x0631,
    0x0632, 0x0633, 0x0634, 0x0635, 0x0636, 0x0637, 0x0638, 0x0639, 0x063A, 0x0641,
    0x0642, 0x0643, 0x0644, 0x0645, 0x0646, 0x0647, 0x0648, 0x064A};

std::vector<double> random_simplex(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> w(n);
  for (auto& x : w) x = exp1(rng);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

std::vector<double> mix(const std::vector<double>& base,
                        const std::vector<double>& unique, double drift) {
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    out[i] = (1.0 - drift) * base[i] + drift * unique[i];
  }
  return out;
}

}  // namespace

std::string synthetic_token(std::size_t k) {
  std::u32string s;
  std::size_t idx = k % kLetters.size();
  k /= kLetters.size();
  s.push_back(kLetters[idx]);
  while (s.size() < 3 || k > 0) {
    const std::size_t digit = k % (kLetters.size() - 1);
    k /= kLetters.size() - 1;
    idx = digit < idx ? digit : digit + 1;
    s.push_back(kLetters[idx]);
  }
  return utf8::encode(s);
}

std::vector<std::vector<double>> synthetic_city_distributions(
    const geo::LocationHierarchy& hierarchy, const SyntheticOptions& options) {
  if (options.state_drift < 0 || options.state_drift > 1 || options.city_drift < 0 ||
      options.city_drift > 1) {
    throw Error(ErrorCode::kInvalidArgument, "drifts must lie in [0,1]");
  }
  if (options.vocab_size <= hierarchy.n_cities()) {
    throw Error(ErrorCode::kInvalidArgument, "vocab_size must exceed the number of cities");
  }
  const std::size_t v = options.vocab_size;
  std::map<std::string, std::vector<double>> country_dist, state_dist;
  for (const auto& country : hierarchy.countries()) {
    country_dist[country] = random_simplex(combine_seed(options.seed, "country:" + country), v);
  }
  for (const auto& state : hierarchy.states()) {
    const auto& base = country_dist.at(hierarchy.country_of_state(state));
    state_dist[state] = mix(base, random_simplex(combine_seed(options.seed, "state:" + state), v),
                            options.state_drift);
  }
  std::vector<std::vector<double>> out;
  for (const auto& city : hierarchy.cities()) {
    const auto& base = state_dist.at(hierarchy.state_of(city));
    out.push_back(mix(base, random_simplex(combine_seed(options.seed, "city:" + city), v),
                      options.city_drift));
  }
  return out;
}

std::vector<TweetRecord> generate_synthetic_corpus(
    const geo::LocationHierarchy& hierarchy, const SyntheticOptions& options) {
  if (options.tweet_len == 0 || options.tweets_per_user == 0) {
    throw Error(ErrorCode::kInvalidArgument, "tweet_len and tweets_per_user must be >= 1");
  }
  const auto dists = synthetic_city_distributions(hierarchy, options);
  const auto cities = hierarchy.cities();
  std::vector<std::string> surface(options.vocab_size);
  for (std::size_t k = 0; k < surface.size(); ++k) surface[k] = synthetic_token(k);

  std::vector<TweetRecord> out;
  out.reserve(cities.size() * options.tweets_per_city);
  char buf[32];
  for (std::size_t ci = 0; ci < cities.size(); ++ci) {
    std::discrete_distribution<std::size_t> draw(dists[ci].begin(), dists[ci].end());
    const LabelTriple labels = geo::derive_labels(cities[ci], hierarchy);
    for (std::size_t i = 0; i < options.tweets_per_city; ++i) {
      TweetRecord rec;
      std::snprintf(buf, sizeof(buf), "_%06zu", i);
      rec.tweet_id = "syn_" + cities[ci] + buf;
      std::snprintf(buf, sizeof(buf), "_u%04zu", i / options.tweets_per_user);
      rec.user_id = cities[ci] + buf;
      std::mt19937_64 rng(combine_seed(options.seed, rec.tweet_id));
      for (std::size_t t = 0; t < options.tweet_len; ++t) {
        if (t) rec.raw_text.push_back(' ');
        rec.raw_text += surface[draw(rng)];
      }
      rec.labels = labels;
      rec.label_source = LabelSource::kGold;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// --- JSON Lines -----------------------------------------------------------

std::string to_json_line(const TweetRecord& record) {
  nlohmann::ordered_json j;
  j["tweet_id"] = record.tweet_id;
  j["user_id"] = record.user_id;
  j["text"] = record.raw_text;
  if (!record.normalized_text.empty()) j["normalized_text"] = record.normalized_text;
  if (record.labels) {
    if (!record.labels->city.empty()) j["city"] = record.labels->city;
    if (!record.labels->state.empty()) j["state"] = record.labels->state;
    if (!record.labels->country.empty()) j["country"] = record.labels->country;
    j["label_source"] = label_source_name(record.label_source);
  }
  if (record.confidence) j["confidence"] = *record.confidence;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

TweetRecord from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "record is not an object");
  auto str = [&](const char* key) -> std::optional<std::string> {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(ErrorCode::kParseError, std::string(key) + " must be a string");
    return it->get<std::string>();
  };
  TweetRecord rec;
  auto id = str("tweet_id");
  auto text = str("text");
  if (!id) throw Error(ErrorCode::kMissingField, "tweet_id");
  if (!text) throw Error(ErrorCode::kMissingField, "text");
  rec.tweet_id = *id;
  rec.raw_text = *text;
  rec.user_id = str("user_id").value_or("");
  rec.normalized_text = str("normalized_text").value_or("");
  auto city = str("city"), state = str("state"), country = str("country");
  if (city || state || country) {
    rec.labels = LabelTriple{city.value_or(""), state.value_or(""), country.value_or("")};
  }
  if (auto src = str("label_source")) {
    auto parsed = parse_label_source(*src);
    if (!parsed) throw Error(ErrorCode::kParseError, "bad label_source " + *src);
    rec.label_source = *parsed;
  }
  if (auto it = j.find("confidence"); it != j.end() && it->is_number()) {
    rec.confidence = it->get<double>();
  }
  return rec;
}

std::vector<TweetRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<TweetRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::vector<TweetRecord>& records,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

}  // namespace hamtl::corpus
