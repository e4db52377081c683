#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace svassess {

enum class ErrorKind {
  InvalidArgument,
  Parse,
  Schema,
  Io,
  Runtime,
};

// All library failures are reported through this type; the C API maps the
// kind onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

// Calendar date. Time-of-day is never stored.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
  bool operator==(const Date&) const = default;

  // Accepts "YYYY-MM-DD" optionally followed by a 'T'/' ' time part.
  static Date parse(std::string_view text);
  std::string iso() const;
};

// Seeded generator with a fixed algorithm for every derived draw, so results
// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);
  // Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Sub-seed derivation for independent streams (grid points, rounds, ...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string to_lower(std::string_view s);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace svassess
