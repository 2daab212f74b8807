// Copyright (c) 2026 stabcone contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

namespace stabcone {

inline constexpr double kPreFaultVoltage = 1.0;   // flat-voltage assumption, p.u.
inline constexpr double kSingularRcond = 1e-12;   // below this a factorization counts as singular
inline constexpr double kStrictMargin = 1e-9;     // strict-inequality margin used by the repair step

// ---------------------------------------------------------------------------
// Error hierarchy. Everything user-facing derives from Error so the CLI can
// catch one type and still print a precise message.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input files (network, config, constraint).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Network violates a structural requirement (disconnected, degenerate branch).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// No grounded voltage source: the admittance matrix cannot be inverted.
class SingularNetworkError : public Error {
 public:
  using Error::Error;
};

// Iterative solver failed to converge within its budget.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Boundary fit could not zero its hinge penalties at the penalty cap.
class BandTooTightError : public Error {
 public:
  using Error::Error;
};

// Conservativeness repair pushed a safely-feasible sample across the limit.
class RepairConflictError : public Error {
 public:
  using Error::Error;
};

// The repartition/fit/repair loop ran out of band widenings.
class UnfittableMetricError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Logging: verbosity comes from the STABCONE_LOG environment variable only
// (error, warn, info, debug). Default is info.
// ---------------------------------------------------------------------------

enum class LogLevel : int { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("STABCONE_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "error") return LogLevel::kError;
    if (v == "warn") return LogLevel::kWarn;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void vlog(LogLevel level, const char* tag, const char* fmt, std::va_list args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::fprintf(stderr, "[%s] ", tag);
  std::vfprintf(stderr, fmt, args);
  std::fputc('\n', stderr);
}

inline void log_info(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  vlog(LogLevel::kInfo, "info", fmt, args);
  va_end(args);
}

inline void log_warn(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  vlog(LogLevel::kWarn, "warn", fmt, args);
  va_end(args);
}

inline void log_debug(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  vlog(LogLevel::kDebug, "debug", fmt, args);
  va_end(args);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 has a pinned-by-standard output stream;
// the mappings below avoid the implementation-defined std distributions so
// sampled scenario streams are reproducible across toolchains.
// ---------------------------------------------------------------------------

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n) by rejection; n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// Round-trip exact formatting for CSV output.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline bool nearly_equal(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace stabcone
