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

#include "error.hpp"

namespace isoprobe {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "ok";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNumericFailure: return "numeric-failure";
    case ErrorCode::kNotPositiveSemidefinite: return "not-positive-semidefinite";
    case ErrorCode::kGenerationFailure: return "generation-failure";
    case ErrorCode::kTrainingFailure: return "training-failure";
    case ErrorCode::kUndefinedMetric: return "undefined-metric";
    case ErrorCode::kRankDeficient: return "rank-deficiency";
    case ErrorCode::kConfigError: return "config-error";
    case ErrorCode::kMissingInput: return "missing-input";
    case ErrorCode::kStaleArtifact: return "stale-artifact";
    case ErrorCode::kCheckFailed: return "check-failure";
    case ErrorCode::kMergeRefused: return "merge-refused";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kInternal: return "internal-error";
  }
  return "unknown";
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk:
      return 0;
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
      return 2;
    case ErrorCode::kMissingInput:
    case ErrorCode::kStaleArtifact:
    case ErrorCode::kIoError:
    case ErrorCode::kMergeRefused:
      return 3;
    case ErrorCode::kCheckFailed:
      return 4;
    case ErrorCode::kNumericFailure:
    case ErrorCode::kNotPositiveSemidefinite:
    case ErrorCode::kGenerationFailure:
    case ErrorCode::kTrainingFailure:
    case ErrorCode::kUndefinedMetric:
    case ErrorCode::kRankDeficient:
      return 5;
    case ErrorCode::kInternal:
      return 1;
  }
  return 1;
}

}  // namespace isoprobe
