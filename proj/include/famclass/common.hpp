#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

// Shared plumbing: logging, error taxonomy, deterministic RNG and seed
// derivation, checksums, little-endian binary I/O, and a small parallel_for.
// Everything here is designed so that results are identical run-to-run and
// machine-to-machine (no std::shuffle / std::uniform_*_distribution, whose
// output is implementation-defined).

namespace famclass {

// ---------------------------------------------------------------------------
// Errors. Exit-code mapping: 1 usage, 2 data, 3 internal.
// ---------------------------------------------------------------------------

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 1;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 2;
};

struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 3;
};

struct MalformedManifest : DataError {
  using DataError::DataError;
};
struct EmptyCorpus : DataError {
  using DataError::DataError;
};
struct DegenerateLabels : DataError {
  using DataError::DataError;
};
struct DimensionMismatch : DataError {
  using DataError::DataError;
};
struct TooFewSamples : DataError {
  using DataError::DataError;
};
struct FamilyTooSmall : DataError {
  using DataError::DataError;
};
struct LengthMismatch : DataError {
  using DataError::DataError;
};
struct ExistingNonEmptyTarget : DataError {
  using DataError::DataError;
};
struct CorruptModel : DataError {
  using DataError::DataError;
};

// ---------------------------------------------------------------------------
// Logging (stderr; files stay byte-deterministic).
// ---------------------------------------------------------------------------

enum class LogLevel : int { trace = 0, debug, info, warn, error, quiet };

namespace detail {
inline LogLevel& log_level_ref() {
  static LogLevel level = LogLevel::info;
  return level;
}
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

inline void set_log_level(LogLevel level) { detail::log_level_ref() = level; }

inline LogLevel parse_log_level(std::string_view name) {
  if (name == "trace") return LogLevel::trace;
  if (name == "debug") return LogLevel::debug;
  if (name == "info") return LogLevel::info;
  if (name == "warn") return LogLevel::warn;
  if (name == "error") return LogLevel::error;
  if (name == "quiet") return LogLevel::quiet;
  throw UsageError("unknown log level: " + std::string(name));
}

inline void log_at(LogLevel level, const std::string& msg) {
  static constexpr const char* names[] = {"trace", "debug", "info", "warn", "error"};
  if (level < detail::log_level_ref() || level == LogLevel::quiet) return;
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::debug, msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::info, msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::warn, msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::error, msg); }

// ---------------------------------------------------------------------------
// Hashing / checksums.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stage-scoped child seeds: every random stage derives its own seed from the
// master seed, a stage name, and an index, so stages can run in any order (or
// in parallel) without perturbing each other.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(stage);
  h = fnv1a64(&index, sizeof(index), h);
  return splitmix64(master ^ h);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. xoshiro-free: splitmix64 stream is plenty for bootstrap
// sampling, shuffles and synthetic data, and is trivially portable.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, n). Rejection-sampled; exact and portable.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) throw InternalError("Rng::bounded(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// parallel_for: chunked, deterministic (workers write to disjoint indices;
// any reduction happens afterwards in index order).
// ---------------------------------------------------------------------------

namespace detail {
inline unsigned& thread_count_ref() {
  static unsigned n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}
}  // namespace detail

inline void set_thread_count(unsigned n) {
  detail::thread_count_ref() = n == 0 ? std::max(1u, std::thread::hardware_concurrency()) : n;
}
inline unsigned thread_count() { return detail::thread_count_ref(); }

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// String helpers.
// ---------------------------------------------------------------------------

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' ||
                        s.front() == '\n'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Little-endian binary I/O into byte buffers (file formats are fixed-endian).
// ---------------------------------------------------------------------------

namespace io {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_i32(std::string& buf, std::int32_t v) {
  put_u32(buf, static_cast<std::uint32_t>(v));
}
inline void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(buf, bits);
}
inline void put_str(std::string& buf, std::string_view s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s.data(), s.size());
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
  double get_f64() {
    std::uint64_t bits = get_u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string get_str() {
    std::uint32_t n = get_u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError("truncated binary section");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace io

}  // namespace famclass
