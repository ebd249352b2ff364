#ifndef GROUPLEARN_CORE_HPP
#define GROUPLEARN_CORE_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace grouplearn {

using OptionId = std::size_t;
using UserId = std::size_t;
using GroupId = std::size_t;
using Step = std::uint64_t;
using Count = std::uint64_t;
using Engine = std::mt19937_64;

/// Raised for malformed inputs; `field` names the offending config entry
/// when one applies.
class ConfigError : public std::invalid_argument {
public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Raised when a caller reads information the disclosure regime withholds,
/// or otherwise breaks an operation's precondition.
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Dense row-major matrix. Only what the simulator needs.
template <typename T>
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const T* row(std::size_t r) const { return data_.data() + r * cols_; }
  T* row(std::size_t r) { return data_.data() + r * cols_; }

  void fill(const T& v) { std::fill(data_.begin(), data_.end(), v); }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Independent engine for one named purpose within a replication.
/// Streams: 0 world, 1 reward tape, 2 tie-breaking, 3 classifier.
enum class Stream : std::uint32_t { World = 0, Tape = 1, Ties = 2, Classifier = 3 };

inline Engine make_engine(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return Engine(seq);
}

/// n choose k, saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > UINT64_MAX) return UINT64_MAX;
  }
  return static_cast<std::uint64_t>(r);
}

} // namespace grouplearn

#endif // GROUPLEARN_CORE_HPP
