/*
 * Copyright 2026 The SMMD Authors.
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

#ifndef SMMD_ERROR_H_
#define SMMD_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace smmd {

enum class ErrorCode {
  kConfig,        // invalid configuration or parameter combination
  kDomain,        // argument outside the operation's domain
  kRange,         // fixed-point encoding would not fit the ring
  kOverflow,      // decoded magnitude exceeds the precision budget
  kKey,           // key mismatch between operands
  kMalformed,     // malformed ciphertext, frame or file
  kVersion,       // unsupported wire version
  kProtocol,      // sequencing / state-machine violation
  kAbort,         // peer aborted the protocol
  kDisconnected,  // transport closed
  kTimeout,
  kData,          // ingestion / split errors
  kTraining,      // non-finite values during optimization
  kFirewall,      // guarded data accessed outside its scope
  kMask,          // mask bookkeeping violation
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kOverflow: return "overflow error";
    case ErrorCode::kKey: return "key error";
    case ErrorCode::kMalformed: return "malformed input";
    case ErrorCode::kVersion: return "version error";
    case ErrorCode::kProtocol: return "protocol error";
    case ErrorCode::kAbort: return "abort";
    case ErrorCode::kDisconnected: return "disconnected";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kData: return "data error";
    case ErrorCode::kTraining: return "training error";
    case ErrorCode::kFirewall: return "firewall violation";
    case ErrorCode::kMask: return "mask error";
  }
  return "error";
}

}  // namespace smmd

#endif  // SMMD_ERROR_H_
