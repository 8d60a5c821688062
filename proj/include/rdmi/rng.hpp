#pragma once

#include <array>
#include <cstdint>

namespace rdmi {

// Counter-based random streams (Philox4x64-10).
//
// Every random draw in the engine comes from a stream addressed by
//   key     = (master_seed, tag)        tag packs lane/model/arm/visit/imputation
//   counter = (block, replicate, scenario_hash, 0)
// so any (scenario, replicate, model, imputation, visit, arm) cell regenerates
// its draws independently of scheduling, worker count, or call history.
class RngStream {
 public:
  RngStream(std::uint64_t key0, std::uint64_t key1,
            std::uint64_t ctr1 = 0, std::uint64_t ctr2 = 0, std::uint64_t ctr3 = 0)
      : key_{key0, key1}, ctr_{0, ctr1, ctr2, ctr3} {}

  std::uint64_t next_u64() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  // Strictly inside (0,1): ((x >> 11) + 0.5) * 2^-53.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  }

  // Standard normal via Box-Muller; second variate of each pair is cached.
  double normal();

  // One block of raw Philox output (testing hook).
  static std::array<std::uint64_t, 4> block(const std::array<std::uint64_t, 4>& counter,
                                            const std::array<std::uint64_t, 2>& key);

 private:
  void refill();

  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> ctr_;
  std::array<std::uint64_t, 4> buf_{};
  int pos_ = 4;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Stream address space. Lanes separate the independent uses of randomness.
enum class Lane : std::uint8_t {
  counterfactual = 1,   // copula draws, per (replicate, arm)
  ie_select = 2,        // v_i draws, per (replicate, arm)
  withdraw = 3,         // u_{i,j} draws, per (replicate, arm)
  impute = 4,           // beta* and Bernoulli fills, per (replicate, model, m, visit, arm)
  oracle_counterfactual = 5,
  oracle_ie_select = 6,
};

// arm_code: 0 = n/a, 1 = active, 2 = control, 3 = pooled slice.
inline std::uint64_t stream_tag(Lane lane, int model = 0, int arm_code = 0, int visit = 0,
                                int imputation = 0) {
  return static_cast<std::uint64_t>(lane) |
         (static_cast<std::uint64_t>(model & 0xff) << 8) |
         (static_cast<std::uint64_t>(arm_code & 0xff) << 16) |
         (static_cast<std::uint64_t>(visit & 0xff) << 24) |
         (static_cast<std::uint64_t>(imputation & 0xffff) << 32);
}

inline RngStream make_stream(std::uint64_t master_seed, std::uint64_t scenario_hash,
                             std::int64_t replicate, std::uint64_t tag) {
  return RngStream(master_seed, tag, static_cast<std::uint64_t>(replicate), scenario_hash);
}

// FNV-1a, used for scenario/estimand hashing.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace rdmi
