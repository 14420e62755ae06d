/*
 * Copyright 2026 The SegX Toolkit Authors.
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

#ifndef SEGX_ERROR_H_
#define SEGX_ERROR_H_

#include <stdexcept>
#include <string>

namespace segx {

// Error classes. Each maps onto one CLI exit code (see cli.h).
enum class ErrorKind {
  kArgument,    // bad argument or precondition on call inputs
  kConfig,      // invalid configuration
  kValidation,  // invalid data values (NaN, inconsistent labels, ...)
  kState,       // operation called on an object in the wrong state
  kFormat,      // malformed interchange file
  kIo,          // filesystem failure
  kCapability,  // adapter lacks a required capability
  kNumerical,   // numerical failure (non-finite loss, ...)
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define SEGX_DEFINE_ERROR(Name, Kind)                               \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(Kind, what) {}   \
  };

SEGX_DEFINE_ERROR(ArgumentError, ErrorKind::kArgument)
SEGX_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
SEGX_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)
SEGX_DEFINE_ERROR(StateError, ErrorKind::kState)
SEGX_DEFINE_ERROR(FormatError, ErrorKind::kFormat)
SEGX_DEFINE_ERROR(IoError, ErrorKind::kIo)
SEGX_DEFINE_ERROR(CapabilityError, ErrorKind::kCapability)
SEGX_DEFINE_ERROR(NumericalError, ErrorKind::kNumerical)

#undef SEGX_DEFINE_ERROR

}  // namespace segx

#endif  // SEGX_ERROR_H_
