#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dac {

using Real = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Count = std::int64_t;

/// Bad or inconsistent input data. Maps to exit code 1 in the CLI.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required column or logical field is missing from a source.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A single data row could not be parsed. Carries the 1-based line number.
class RowError : public DataError {
 public:
  RowError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid command-line usage or configuration. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept;

/// Seeded generator whose output is identical on every platform.
///
/// The standard distributions are implementation-defined, so the few we
/// need are written against the raw mt19937_64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  Real uniform();
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  Real normal();
  bool bernoulli(Real p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  /// k distinct values from [0, n), returned sorted ascending.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k);

 private:
  std::mt19937_64 engine_;
  std::optional<Real> spare_normal_;
};

/// Shortest decimal text that parses back to the same double.
std::string format_real(Real x);
Real parse_real(std::string_view text);
std::optional<Real> try_parse_real(std::string_view text);
std::optional<Count> try_parse_count(std::string_view text);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string to_lower(std::string_view s);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// visited exactly once; callers write results into slot i so the merged
/// output does not depend on scheduling.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= 0) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
  }
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Binary cross-entropy of probability p against a 0/1 target, clamped away
/// from log(0).
template <typename Scalar>
Scalar log_loss(Scalar p, Scalar y) {
  constexpr Scalar eps = Scalar(1e-15);
  const Scalar q = std::clamp(p, eps, Scalar(1) - eps);
  return -(y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q));
}

template <typename DerivedP, typename DerivedY>
typename DerivedP::Scalar mean_log_loss(const Eigen::DenseBase<DerivedP>& p,
                                        const Eigen::DenseBase<DerivedY>& y) {
  using Scalar = typename DerivedP::Scalar;
  Scalar total = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) total += log_loss<Scalar>(p(i), y(i));
  return p.size() == 0 ? Scalar(0) : total / Scalar(p.size());
}

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Silent = 4 };

/// Diagnostics go to standard error; data outputs never do.
void set_log_level(LogLevel level);
LogLevel log_level();
void log(LogLevel level, std::string_view message);

/// Median of the values; the mean of the two middle values for even sizes.
Real median(std::vector<Real> values);

}  // namespace dac
