#include "hicl/rng.hpp"

namespace hicl {
namespace {

// SplitMix64 finalizer; full-period bijection of the 64-bit state.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string to_string(RngPurpose p) {
  switch (p) {
    case RngPurpose::kInit: return "init";
    case RngPurpose::kDropoutA: return "dropout-a";
    case RngPurpose::kDropoutB: return "dropout-b";
    case RngPurpose::kData: return "data";
    case RngPurpose::kRepetition: return "repetition";
  }
  return "unknown";
}

RngStream::RngStream(std::uint64_t seed, RngPurpose purpose)
    : seed_(seed), purpose_(purpose) {
  key_ = mix64(mix64(seed) ^ (static_cast<std::uint64_t>(purpose) *
                              0xd6e8feb86659fd93ULL));
}

std::uint64_t RngStream::bits_at(std::uint64_t index) const {
  return mix64(key_ ^ mix64(index));
}

double RngStream::uniform_at(std::uint64_t index) const {
  return static_cast<double>(bits_at(index) >> 11) * 0x1.0p-53;
}

double RngStream::uniform_at(std::uint64_t index, double lo, double hi) const {
  return lo + (hi - lo) * uniform_at(index);
}

std::uint64_t RngStream::below_at(std::uint64_t index, std::uint64_t n) const {
  // 128-bit multiply-shift; bias is < 2^-64 per draw, irrelevant here.
  unsigned __int128 wide =
      static_cast<unsigned __int128>(bits_at(index)) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

RngStream RngStream::derived(std::uint64_t salt) const {
  RngStream s(mix64(key_ ^ mix64(salt)), purpose_);
  return s;
}

}  // namespace hicl
