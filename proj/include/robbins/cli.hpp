// Copyright 2026 The Robbins Lab Authors.
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

#ifndef ROBBINS_CLI_HPP_
#define ROBBINS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace robbins::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // numerical failure, I/O
inline constexpr int kExitUsage = 2;
inline constexpr int kExitResourceBound = 3;

// Runs one subcommand. `args` excludes the program name. JSON goes to
// `out`, the human summary to `err`; `in` feeds the terminal game.
int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err);

}  // namespace robbins::cli

#endif  // ROBBINS_CLI_HPP_
