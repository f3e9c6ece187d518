#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stratipw {

// Exit-code buckets used by the CLI: config/validation -> 2,
// structural positivity -> 3, numerical failure -> 4.
enum class ErrorCategory { config, positivity, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

/// A required column or model term is missing or unknown.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// Malformed cell contents; the message carries the 1-based data row.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// A stratum has an empty exposure arm, so per-stratum weighting is impossible.
class StructuralPositivityError : public Error {
 public:
  StructuralPositivityError(std::string stratum, const std::string& what)
      : Error(ErrorCategory::positivity, what), stratum_(std::move(stratum)) {}
  const std::string& stratum() const { return stratum_; }

 private:
  std::string stratum_;
};

/// Response vector is all zeros or all ones.
class DegenerateResponseError : public Error {
 public:
  explicit DegenerateResponseError(const std::string& what)
      : Error(ErrorCategory::numeric, what) {}
};

/// Weighted normal equations are singular; carries the offending columns.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(std::vector<std::string> columns, const std::string& what)
      : Error(ErrorCategory::numeric, what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

/// Iteration limit reached; carries the last iterate for post-mortem.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(std::vector<double> last_coefficients, const std::string& what)
      : Error(ErrorCategory::numeric, what), last_coefficients_(std::move(last_coefficients)) {}
  const std::vector<double>& last_coefficients() const { return last_coefficients_; }

 private:
  std::vector<double> last_coefficients_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

/// More than the tolerated share of bootstrap resamples failed.
class BootstrapUnstableError : public Error {
 public:
  explicit BootstrapUnstableError(const std::string& what)
      : Error(ErrorCategory::numeric, what) {}
};

}  // namespace stratipw
