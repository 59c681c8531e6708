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

#include "hamtl/labels.hpp"

#include <utility>

namespace hamtl {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kCity: return "city";
    case Task::kState: return "state";
    case Task::kCountry: return "country";
  }
  return "?";
}

std::optional<Task> parse_task(std::string_view name) {
  for (Task t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

const std::string& LabelTriple::get(Task task) const {
  switch (task) {
    case Task::kCity: return city;
    case Task::kState: return state;
    case Task::kCountry: break;
  }
  return country;
}

std::string& LabelTriple::get(Task task) {
  return const_cast<std::string&>(std::as_const(*this).get(task));
}

}  // namespace hamtl
