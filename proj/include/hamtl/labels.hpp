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
#include <optional>
#include <string>
#include <string_view>

namespace hamtl {

// The three granularities every location label is resolved to.
enum class Task { kCity = 0, kState = 1, kCountry = 2 };

inline constexpr std::array<Task, 3> kAllTasks = {Task::kCity, Task::kState,
                                                  Task::kCountry};

std::string_view task_name(Task task);
std::optional<Task> parse_task(std::string_view name);

// Empty strings mean "unknown at this level" (e.g. weak country-only labels).
struct LabelTriple {
  std::string city;
  std::string state;
  std::string country;

  const std::string& get(Task task) const;
  std::string& get(Task task);

  friend bool operator==(const LabelTriple&, const LabelTriple&) = default;
};

}  // namespace hamtl
