/*
 * Copyright 2026 The sphereml Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SPHEREML_ERRORS_HPP_
#define SPHEREML_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sphereml {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SPHEREML_DEFINE_ERROR(Name)                            \
  class Name : public Error {                                  \
   public:                                                     \
    explicit Name(const std::string& what) : Error(what) {}    \
  }

SPHEREML_DEFINE_ERROR(DegenerateNorm);
SPHEREML_DEFINE_ERROR(DimensionMismatch);
SPHEREML_DEFINE_ERROR(BatchTooSmall);
SPHEREML_DEFINE_ERROR(StaleCache);
SPHEREML_DEFINE_ERROR(InvalidConfig);
SPHEREML_DEFINE_ERROR(ConfigError);
SPHEREML_DEFINE_ERROR(OutOfRange);
SPHEREML_DEFINE_ERROR(ShapeMismatch);
SPHEREML_DEFINE_ERROR(EmptyGallery);
SPHEREML_DEFINE_ERROR(NoValidQueries);
SPHEREML_DEFINE_ERROR(InsufficientData);
SPHEREML_DEFINE_ERROR(InvalidSpec);
SPHEREML_DEFINE_ERROR(ParseError);
SPHEREML_DEFINE_ERROR(SchemaError);

#undef SPHEREML_DEFINE_ERROR

/// Thrown when a training run produces a non-finite loss. Carries the
/// number of epochs that completed before the abort so callers can keep
/// the partial log.
class DivergenceDetected : public Error {
 public:
  DivergenceDetected(const std::string& what, int completed_epochs)
      : Error(what), completed_epochs_(completed_epochs) {}
  int completed_epochs() const { return completed_epochs_; }

 private:
  int completed_epochs_;
};

}  // namespace sphereml

#endif  // SPHEREML_ERRORS_HPP_
