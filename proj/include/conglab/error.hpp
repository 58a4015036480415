// Error taxonomy shared by all modules.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace conglab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input: bad schema, bad dimensions, bad flags.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

enum class EvalFault { DivisionByZero, LogDomain, SqrtDomain, PowDomain, NonFinite };

class EvalError : public Error {
 public:
  EvalError(EvalFault fault, const std::string& msg) : Error(msg), fault_(fault) {}
  EvalFault fault() const noexcept { return fault_; }

 private:
  EvalFault fault_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string expected, const std::string& msg)
      : Error(msg), offset_(offset), expected_(std::move(expected)) {}
  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnknownIdentifierError : public ParseError {
 public:
  UnknownIdentifierError(std::size_t offset, std::string name)
      : ParseError(offset, "a declared coordinate or function name",
                   "unknown identifier '" + name + "' at offset " + std::to_string(offset)),
        name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

// Numeric degeneracy detected at specific grid locations.  Carries a small
// sample of offending points plus the total count.
class PointwiseError : public Error {
 public:
  PointwiseError(const std::string& msg, std::vector<std::vector<double>> sample_points,
                 std::size_t total_count)
      : Error(msg), sample_points_(std::move(sample_points)), total_count_(total_count) {}
  const std::vector<std::vector<double>>& sample_points() const noexcept { return sample_points_; }
  std::size_t total_count() const noexcept { return total_count_; }

 private:
  std::vector<std::vector<double>> sample_points_;
  std::size_t total_count_;
};

class HyperbolicityError : public PointwiseError {
 public:
  HyperbolicityError(const std::string& msg, std::vector<double> point, std::pair<int, int> pair)
      : PointwiseError(msg, {std::move(point)}, 1), pair_(pair) {}
  std::pair<int, int> pair() const noexcept { return pair_; }

 private:
  std::pair<int, int> pair_;
};

class SingularityError : public PointwiseError {
 public:
  using PointwiseError::PointwiseError;
};

class EigenFrameError : public PointwiseError {
 public:
  enum class Kind { ComplexEigenvalues, EigenvalueCollision, IllConditioned };
  EigenFrameError(Kind kind, const std::string& msg, std::vector<double> point)
      : PointwiseError(msg, {std::move(point)}, 1), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class UmbilicError : public PointwiseError {
 public:
  using PointwiseError::PointwiseError;
};

class PathDependenceError : public PointwiseError {
 public:
  using PointwiseError::PointwiseError;
};

class CompatibilityError : public PointwiseError {
 public:
  using PointwiseError::PointwiseError;
};

class EnvelopeError : public PointwiseError {
 public:
  using PointwiseError::PointwiseError;
};

class MissingFluxError : public Error {
 public:
  explicit MissingFluxError(const std::string& density)
      : Error("commuting flow carries no flux for density '" + density + "'"), density_(density) {}
  const std::string& density() const noexcept { return density_; }

 private:
  std::string density_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

}  // namespace conglab
