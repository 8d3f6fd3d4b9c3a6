#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hte {

// Error taxonomy, mapped to CLI exit codes by the tool layer.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; full-period bijection on 64-bit values.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic per-task seed stream: every parallel unit of work (tree,
// fold, candidate, bootstrap replicate) draws its seed as
// derive_seed(master, stream, index), so results never depend on scheduling.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0) {
  return mix64(mix64(base ^ mix64(a)) ^ mix64(b));
}

// Worker-count default used when a caller passes workers = 0.
int default_workers();
void set_default_workers(int workers);

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks, one per
// worker; iterations must be independent and write only to their own slots.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

inline bool is_missing(double x) { return std::isnan(x); }

double mean(std::span<const double> values);
// Sample standard deviation (n-1 denominator); 0 for n < 2.
double sample_sd(std::span<const double> values);
// Linear-interpolation quantile on a sorted vector, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Shortest round-trip decimal form; used everywhere a double is printed so
// artifacts are byte-stable.
std::string format_double(double value);

}  // namespace hte
