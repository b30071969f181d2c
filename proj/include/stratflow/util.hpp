#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace stratflow {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidModeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StepSizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Static-partition parallel map over [0, count). Chunks are fixed by (count,
// threads) alone, so writes to disjoint indices give run-to-run identical
// results. Reductions stay out of this helper on purpose.
inline void parallel_for(long count, int threads, const std::function<void(long, long)>& body) {
  if (count <= 0) return;
  if (threads <= 1 || count < 2 * threads) {
    body(0, count);
    return;
  }
  const long chunk = (count + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int k = 0; k < threads; ++k) {
    const long lo = k * chunk;
    const long hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

// Round-trip-exact double formatting, shared by every CSV/JSON writer so that
// regenerated reports are byte-identical.
std::string format_double(double x);

}  // namespace stratflow
