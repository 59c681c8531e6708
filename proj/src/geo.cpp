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

#include "hamtl/geo.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "hamtl/error.hpp"

namespace hamtl::geo {

std::string nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* normalizer = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) return std::string(text);
  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString dst = normalizer->normalize(src, status);
  if (U_FAILURE(status)) return std::string(text);
  std::string out;
  dst.toUTF8String(out);
  return out;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Minimal CSV field splitter with double-quote support.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

template <typename Map>
const std::string& lookup(const Map& map, std::string_view key, ErrorCode code,
                          const char* what) {
  const auto it = map.find(nfc(key));
  if (it == map.end()) {
    throw Error(code, std::string("unknown ") + what + " '" + std::string(key) + "'");
  }
  return it->second;
}

}  // namespace

void LocationHierarchy::add(std::string_view city_raw, std::string_view state_raw,
                            std::string_view country_raw) {
  const std::string city = nfc(city_raw);
  const std::string state = nfc(state_raw);
  const std::string country = nfc(country_raw);
  if (city.empty() || state.empty() || country.empty()) {
    throw Error(ErrorCode::kMissingField, "empty location field");
  }
  if (auto it = city_to_state_.find(city);
      it != city_to_state_.end() && it->second != state) {
    throw Error(ErrorCode::kConflictingParent,
                "city '" + city + "' listed under states '" + it->second +
                    "' and '" + state + "'");
  }
  if (auto it = state_to_country_.find(state);
      it != state_to_country_.end() && it->second != country) {
    throw Error(ErrorCode::kConflictingParent,
                "state '" + state + "' listed under countries '" + it->second +
                    "' and '" + country + "'");
  }
  city_to_state_.emplace(city, state);
  state_to_country_.emplace(state, country);
}

std::size_t LocationHierarchy::n_countries() const {
  return countries().size();
}

bool LocationHierarchy::has_city(std::string_view city) const {
  return city_to_state_.find(nfc(city)) != city_to_state_.end();
}

const std::string& LocationHierarchy::state_of(std::string_view city) const {
  return lookup(city_to_state_, city, ErrorCode::kUnknownCity, "city");
}

const std::string& LocationHierarchy::country_of_state(
    std::string_view state) const {
  return lookup(state_to_country_, state, ErrorCode::kInvalidArgument, "state");
}

std::vector<std::string> LocationHierarchy::cities() const {
  std::vector<std::string> out;
  out.reserve(city_to_state_.size());
  for (const auto& [city, _] : city_to_state_) out.push_back(city);
  return out;
}

std::vector<std::string> LocationHierarchy::states() const {
  std::vector<std::string> out;
  out.reserve(state_to_country_.size());
  for (const auto& [state, _] : state_to_country_) out.push_back(state);
  return out;
}

std::vector<std::string> LocationHierarchy::countries() const {
  std::set<std::string> unique;
  for (const auto& [_, country] : state_to_country_) unique.insert(country);
  return {unique.begin(), unique.end()};
}

std::vector<std::string> LocationHierarchy::classes(Task task) const {
  switch (task) {
    case Task::kCity: return cities();
    case Task::kState: return states();
    case Task::kCountry: break;
  }
  return countries();
}

std::vector<LabelTriple> LocationHierarchy::rows() const {
  std::vector<LabelTriple> out;
  out.reserve(city_to_state_.size());
  for (const auto& [city, state] : city_to_state_) {
    out.push_back({city, state, state_to_country_.at(state)});
  }
  return out;
}

LocationHierarchy parse_hierarchy(std::istream& in) {
  LocationHierarchy h;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t data_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = split_csv(line);
    for (std::size_t k = 0; k < 3; ++k) {
      if (fields.size() <= k || fields[k].empty()) {
        static constexpr const char* kNames[] = {"city", "state", "country"};
        throw Error(ErrorCode::kMissingField,
                    "line " + std::to_string(line_no) + ": missing " + kNames[k]);
      }
    }
    h.add(fields[0], fields[1], fields[2]);
    ++data_rows;
  }
  if (data_rows == 0) throw Error(ErrorCode::kEmptyFile, "no hierarchy rows");
  return h;
}

LocationHierarchy load_and_validate_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return parse_hierarchy(in);
}

void save_hierarchy(const LocationHierarchy& hierarchy,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "city,state,country\n";
  for (const auto& row : hierarchy.rows()) {
    out << quote_csv(row.city) << ',' << quote_csv(row.state) << ','
        << quote_csv(row.country) << '\n';
  }
}

LocationHierarchy make_grid_hierarchy(std::size_t countries,
                                      std::size_t states_per_country,
                                      std::size_t cities_per_state) {
  if (countries == 0 || states_per_country == 0 || cities_per_state == 0) {
    throw Error(ErrorCode::kInvalidArgument, "hierarchy dimensions must be >= 1");
  }
  LocationHierarchy h;
  char buf[64];
  for (std::size_t c = 0; c < countries; ++c) {
    std::snprintf(buf, sizeof(buf), "country%02zu", c + 1);
    const std::string country = buf;
    for (std::size_t s = 0; s < states_per_country; ++s) {
      std::snprintf(buf, sizeof(buf), "_state%02zu", s + 1);
      const std::string state = country + buf;
      for (std::size_t k = 0; k < cities_per_state; ++k) {
        std::snprintf(buf, sizeof(buf), "_city%02zu", k + 1);
        h.add(state + buf, state, country);
      }
    }
  }
  return h;
}

LabelTriple derive_labels(std::string_view city,
                          const LocationHierarchy& hierarchy) {
  const std::string& state = hierarchy.state_of(city);
  return {nfc(city), state, hierarchy.country_of_state(state)};
}

bool is_consistent(const LabelTriple& labels,
                   const LocationHierarchy& hierarchy) {
  if (!hierarchy.has_city(labels.city)) return false;
  return derive_labels(labels.city, hierarchy) ==
         LabelTriple{nfc(labels.city), nfc(labels.state), nfc(labels.country)};
}

std::vector<UserRecord> filter_gold_users(
    const std::vector<UserRecord>& users,
    const std::map<std::string, std::size_t>& per_city_tweets,
    GoldUserThresholds thresholds) {
  std::vector<UserRecord> kept;
  for (const auto& user : users) {
    if (user.tweet_count < thresholds.min_user_tweets) continue;
    const auto it = per_city_tweets.find(user.labels.city);
    const std::size_t city_total = it == per_city_tweets.end() ? 0 : it->second;
    if (city_total < thresholds.min_city_tweets) continue;
    kept.push_back(user);
  }
  return kept;
}

}  // namespace hamtl::geo
