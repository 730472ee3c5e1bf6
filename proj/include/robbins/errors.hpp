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

#ifndef ROBBINS_ERRORS_HPP_
#define ROBBINS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace robbins {

// Bad argument to an operation (n = 0, c <= 1, index out of range, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The request is well formed but outside the documented compute/storage
// envelope of the operation. Never answered with an approximation.
class ResourceBound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure (divergent quadrature, step-size underflow, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Session state conflicts (decision on a closed session, double accept).
class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace robbins

#endif  // ROBBINS_ERRORS_HPP_
