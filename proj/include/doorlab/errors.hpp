// Copyright 2026 The Doorlab Authors
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

#ifndef DOORLAB_ERRORS_HPP_
#define DOORLAB_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace doorlab {

// Base for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-facing configuration: unknown scene id, empty dataset,
// missing adapter for a modality, malformed config file.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// An API precondition was violated: wrong tensor/action dimensionality,
// mismatched shapes, stepping a terminal state.
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& msg) : Error(msg) {}
};

// Experiment protocol violations, e.g. collecting demonstrations from an
// eval-split scene.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& msg) : Error(msg) {}
};

// Corrupt or truncated on-disk data. Carries the byte offset at which the
// problem was detected.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, long long offset)
      : Error(msg + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

// Oracle adaptation was asked for a frame whose provenance cannot be
// resolved back to a world state.
class ProvenanceError : public Error {
 public:
  explicit ProvenanceError(const std::string& msg) : Error(msg) {}
};

// Optimization diverged (non-finite loss) or a checkpoint failed to load.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

// A report was requested over results that are missing a required slice
// (e.g. a domain that was never evaluated).
class IncompleteDataError : public Error {
 public:
  explicit IncompleteDataError(const std::string& msg) : Error(msg) {}
};

}  // namespace doorlab

#endif  // DOORLAB_ERRORS_HPP_
