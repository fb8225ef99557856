#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "levyql/errors.hpp"

namespace levyql {

// Splittable pseudo-random stream.
//
// Contract: a stream is identified by the pair (seed, stream_id).  The
// underlying engine is std::mt19937_64, whose output sequence is fixed by the
// C++ standard, and every variate below is produced by explicit transforms of
// that output (never by std::*_distribution), so two streams built from the
// same pair yield bit-identical sequences on any conforming platform.
//
// Substreams: split(k) derives a child stream by hashing k into the stream
// id.  Monte Carlo replication k conventionally runs on
// RandomStream(base_seed, k); a replication then splits once per independent
// noise source (Wiener, jumps, optimizer).  Streams are single-owner: never
// share one instance across threads.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id), engine_(derive(seed, stream_id)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream (seed, hash(stream_id, k)).
  RandomStream split(std::uint64_t k) const {
    return RandomStream(seed_, hash_combine(stream_id_, k));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1), 53-bit resolution.  Strictly
  // positive so log(uniform()) is always finite.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the Marsaglia polar method with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double exponential() { return -std::log(uniform()); }

  // Poisson count by interarrival summation; exact for any mean.  Large means
  // are halved recursively (a Poisson sum is Poisson) to keep the loop short
  // and exp(-mean) away from underflow.
  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw InvalidDurationError("poisson: negative mean");
    if (mean == 0.0) return 0;
    if (mean > 60.0) return poisson(mean / 2.0) + poisson(mean / 2.0);
    const double limit = std::exp(-mean);
    std::uint64_t count = 0;
    double product = uniform();
    while (product > limit) {
      ++count;
      product *= uniform();
    }
    return count;
  }

  // Inverse-Gaussian draw, Michael-Schucany-Haas transform.
  // mean > 0, shape > 0; density proportional to
  // x^{-3/2} exp(-shape (x - mean)^2 / (2 mean^2 x)).
  double inverse_gaussian(double mean, double shape) {
    if (!(mean > 0.0) || !(shape > 0.0))
      throw InvalidDurationError("inverse_gaussian: mean and shape must be > 0");
    const double z = normal();
    const double y = z * z;
    const double x = mean + mean * mean * y / (2.0 * shape)
        - mean / (2.0 * shape)
              * std::sqrt(4.0 * mean * shape * y + mean * mean * y * y);
    if (uniform() <= mean / (mean + x)) return x;
    return mean * mean / x;
  }

 private:
  // SplitMix64 finalizer; the standard 64-bit avalanche mix.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t hash_combine(std::uint64_t a, std::uint64_t k) {
    return mix(a ^ (mix(k) + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
  }

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream_id) {
    return mix(mix(seed) ^ mix(stream_id + 0x632BE59BD9B4E019ULL));
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace levyql
