// sdvad/common.h

// Copyright 2026 SDVAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SDVAD_COMMON_H_
#define SDVAD_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sdvad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Error classes. Each maps to a CLI exit code via ExitCode().
enum class ErrorKind {
  kData,       // bad or insufficient input data
  kConfig,     // invalid configuration or contract violation by the caller
  kNumerical,  // divergence, singular systems
  kFormat,     // malformed model / label / audio file
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct DataError : Error {
  explicit DataError(const std::string &w) : Error(ErrorKind::kData, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string &w) : Error(ErrorKind::kConfig, w) {}
};
/// Caller passed arguments whose shapes or lengths do not agree.
struct ContractError : ConfigError {
  explicit ContractError(const std::string &w) : ConfigError(w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string &w) : Error(ErrorKind::kNumerical, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string &w) : Error(ErrorKind::kFormat, w) {}
};

/// 0 success, 1 data (format errors count as data), 2 configuration, 3 numerical.
inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kData:
    case ErrorKind::kFormat:
      return 1;
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kNumerical:
      return 3;
  }
  return 1;
}

/// Per-frame 0/1 decisions.
using Labels = std::vector<std::uint8_t>;

}  // namespace sdvad

#endif  // SDVAD_COMMON_H_
