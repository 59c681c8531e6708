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

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hamtl/labels.hpp"

namespace hamtl::geo {

// Validated many-to-one city -> state -> country maps. Names are stored in
// NFC form; lookups normalize their argument the same way.
class LocationHierarchy {
 public:
  LocationHierarchy() = default;

  // Adds one (city, state, country) row. Re-adding an identical row is a no-op;
  // a city (or state) that reappears under a different parent throws
  // ConflictingParent.
  void add(std::string_view city, std::string_view state,
           std::string_view country);

  std::size_t n_cities() const { return city_to_state_.size(); }
  std::size_t n_states() const { return state_to_country_.size(); }
  std::size_t n_countries() const;

  bool has_city(std::string_view city) const;
  const std::string& state_of(std::string_view city) const;
  const std::string& country_of_state(std::string_view state) const;

  // Sorted, unique class names per level.
  std::vector<std::string> cities() const;
  std::vector<std::string> states() const;
  std::vector<std::string> countries() const;
  std::vector<std::string> classes(Task task) const;

  // Rows (city, state, country) sorted by city.
  std::vector<LabelTriple> rows() const;

 private:
  std::map<std::string, std::string, std::less<>> city_to_state_;
  std::map<std::string, std::string, std::less<>> state_to_country_;
};

std::string nfc(std::string_view text);

LocationHierarchy parse_hierarchy(std::istream& in);
LocationHierarchy load_and_validate_hierarchy(const std::filesystem::path& path);
void save_hierarchy(const LocationHierarchy& hierarchy,
                    const std::filesystem::path& path);

// Regular hierarchy with names like "country01", "country01_state02", ...
LocationHierarchy make_grid_hierarchy(std::size_t countries,
                                      std::size_t states_per_country,
                                      std::size_t cities_per_state);

LabelTriple derive_labels(std::string_view city,
                          const LocationHierarchy& hierarchy);

// True iff labels == derive_labels(labels.city).
bool is_consistent(const LabelTriple& labels,
                   const LocationHierarchy& hierarchy);

enum class Verification { kTrue, kFalse, kUnknown };

struct UserRecord {
  std::string user_id;
  LabelTriple labels;
  Verification country_verified = Verification::kUnknown;
  Verification city_verified = Verification::kUnknown;
  std::size_t tweet_count = 0;
};

struct GoldUserThresholds {
  std::size_t min_user_tweets = 30;
  std::size_t min_city_tweets = 500;
};

std::vector<UserRecord> filter_gold_users(
    const std::vector<UserRecord>& users,
    const std::map<std::string, std::size_t>& per_city_tweets,
    GoldUserThresholds thresholds = {});

}  // namespace hamtl::geo
