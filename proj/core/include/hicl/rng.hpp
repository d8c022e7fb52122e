#pragma once

#include <cstdint>
#include <string>

namespace hicl {

/// Purpose label of a random stream. Streams with different purposes are
/// independent even under the same seed, which is what lets the two
/// dropout branches of a positive pair draw unrelated masks.
enum class RngPurpose : std::uint64_t {
  kInit = 1,
  kDropoutA = 2,
  kDropoutB = 3,
  kData = 4,
  kRepetition = 5,
};

std::string to_string(RngPurpose p);

/// Counter-based splittable generator: the value at (seed, purpose, index)
/// is a pure function of its key, so any draw can be replayed exactly.
class RngStream {
 public:
  RngStream(std::uint64_t seed, RngPurpose purpose);

  std::uint64_t seed() const { return seed_; }
  RngPurpose purpose() const { return purpose_; }

  /// Stateless draws addressed by index.
  std::uint64_t bits_at(std::uint64_t index) const;
  double uniform_at(std::uint64_t index) const;  // [0, 1)
  double uniform_at(std::uint64_t index, double lo, double hi) const;
  /// Unbiased integer in [0, n) via rejection-free multiply-shift.
  std::uint64_t below_at(std::uint64_t index, std::uint64_t n) const;

  /// Derive an independent stream keyed off this one (e.g. per step or
  /// per input); same purpose, remixed seed.
  RngStream derived(std::uint64_t salt) const;

 private:
  std::uint64_t seed_;
  RngPurpose purpose_;
  std::uint64_t key_;
};

/// Thin stateful wrapper when sequential draws are more natural.
class RngCursor {
 public:
  explicit RngCursor(RngStream stream) : stream_(stream) {}

  double next_uniform() { return stream_.uniform_at(cursor_++); }
  double next_uniform(double lo, double hi) {
    return stream_.uniform_at(cursor_++, lo, hi);
  }
  std::uint64_t next_below(std::uint64_t n) {
    return stream_.below_at(cursor_++, n);
  }
  std::uint64_t position() const { return cursor_; }

 private:
  RngStream stream_;
  std::uint64_t cursor_ = 0;
};

}  // namespace hicl
