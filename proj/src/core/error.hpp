/* Copyright 2026 The isoprobe Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ISOPROBE_CORE_ERROR_HPP_
#define ISOPROBE_CORE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace isoprobe {

// Mirrors isoprobe_status in the public C header; values must stay in sync.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kNumericFailure = 2,
  kNotPositiveSemidefinite = 3,
  kGenerationFailure = 4,
  kTrainingFailure = 5,
  kUndefinedMetric = 6,
  kRankDeficient = 7,
  kConfigError = 8,
  kMissingInput = 9,
  kStaleArtifact = 10,
  kCheckFailed = 11,
  kMergeRefused = 12,
  kIoError = 13,
  kInternal = 14,
};

const char* ErrorCodeName(ErrorCode code);

// Process exit code for a CLI command that failed with `code`:
// 0 success, 2 config error, 3 missing/stale input, 4 check failure,
// 5 numeric failure.
int ExitCodeFor(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, const std::string& message) {
  if (!condition) Fail(ErrorCode::kInvalidArgument, message);
}

}  // namespace isoprobe

#endif  // ISOPROBE_CORE_ERROR_HPP_
