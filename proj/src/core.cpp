#include "dac/core.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

namespace dac {

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(parent) ^ (stream * 0xd1342543de82ef95ULL + 1));
}

Rng::Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

std::uint64_t Rng::next_u64() { return engine_(); }

Real Rng::uniform() { return static_cast<Real>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  // Reject the top of the range that would bias the modulus.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Real Rng::normal() {
  if (spare_normal_) {
    const Real v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  Real u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const Real u2 = uniform();
  const Real r = std::sqrt(-2.0 * std::log(u1));
  const Real theta = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::vector<std::uint64_t> Rng::sample_without_replacement(std::uint64_t n, std::uint64_t k) {
  if (k > n) throw std::invalid_argument("sample larger than population");
  // Floyd's algorithm: k draws, no O(n) storage.
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

std::string format_real(Real x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return std::signbit(x) ? "-0" : "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::optional<Real> try_parse_real(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  if (t == "nan") return std::numeric_limits<Real>::quiet_NaN();
  if (t == "inf") return std::numeric_limits<Real>::infinity();
  if (t == "-inf") return -std::numeric_limits<Real>::infinity();
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  Real value = 0;
  auto res = std::from_chars(begin, t.data() + t.size(), value);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

Real parse_real(std::string_view text) {
  auto v = try_parse_real(text);
  if (!v) throw DataError("not a number: '" + std::string(text) + "'");
  return *v;
}

std::optional<Count> try_parse_count(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  Count value = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (res.ec == std::errc() && res.ptr == t.data() + t.size()) return value;
  // Some exports write integer counts as "12.0".
  auto real = try_parse_real(t);
  if (real && std::isfinite(*real) && *real == std::floor(*real) && std::abs(*real) < 9e15) {
    return static_cast<Count>(*real);
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  pool.reserve(count);
  for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {
std::atomic<int> g_log_level{static_cast<int>(LogLevel::Info)};
std::mutex g_log_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_log_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_log_level.load()); }

void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) < g_log_level.load()) return;
  static constexpr const char* tags[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_log_mutex);
  std::cerr << "[" << tags[static_cast<int>(level)] << "] " << message << '\n';
}

Real median(std::vector<Real> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const Real upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const Real lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace dac
