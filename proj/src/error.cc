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

#include "segx/error.h"

namespace segx {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument:
      return "argument error";
    case ErrorKind::kConfig:
      return "config error";
    case ErrorKind::kValidation:
      return "validation error";
    case ErrorKind::kState:
      return "state error";
    case ErrorKind::kFormat:
      return "format error";
    case ErrorKind::kIo:
      return "I/O error";
    case ErrorKind::kCapability:
      return "capability error";
    case ErrorKind::kNumerical:
      return "numerical error";
  }
  return "error";
}

}  // namespace segx
