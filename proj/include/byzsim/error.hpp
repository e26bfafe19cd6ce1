/*
 * Copyright 2026 The byzsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace byzsim {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyInput,
  kDimensionMismatch,
  kAllFiltered,
  kBracketFailed,
  kIdxBadMagic,
  kIdxTruncated,
  kIdxCountMismatch,
  kIo,
  kConfig,
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kAllFiltered: return "all_filtered";
    case ErrorCode::kBracketFailed: return "bracket_failed";
    case ErrorCode::kIdxBadMagic: return "idx_bad_magic";
    case ErrorCode::kIdxTruncated: return "idx_truncated";
    case ErrorCode::kIdxCountMismatch: return "idx_count_mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

// Every failure raised by the library carries a code so callers (and tests)
// can tell error paths apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool ok, ErrorCode code, const char* what) {
  if (!ok) Fail(code, what);
}

inline void Require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) Fail(code, what);
}

}  // namespace byzsim
