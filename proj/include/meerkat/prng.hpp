/*
 * Copyright 2026 The Meerkat Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MEERKAT_PRNG_HPP
#define MEERKAT_PRNG_HPP

#include <Eigen/Core>
#include <cstdint>

#include "meerkat/masking.hpp"

namespace meerkat {

// Deterministic, replayable perturbation generation. Client and server must
// regenerate identical Gaussian vectors from shared seeds, so the whole
// construction is pinned: seeds derive from a keyed splitmix64 mix of
// (master_seed, round, step); each seed keys an independent splitmix64
// stream; Gaussians come from the inverse normal CDF applied to 53-bit
// uniforms. Everything here is a pure function of its arguments.

/// 64-bit finalizer/mixer (splitmix64 output function).
std::uint64_t mix64(std::uint64_t x);

/// Pure map (round, step) -> 64-bit seed, keyed by master_seed.
struct SeedSchedule {
  std::uint64_t master_seed = 0;
};

std::uint64_t derive_seed(const SeedSchedule& schedule, std::uint64_t round,
                          std::uint64_t step);

/// Counter-based stream of uniforms / standard normals keyed by one seed.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : state_(mix64(seed ^ kStreamTag)) {}

  std::uint64_t next_u64();
  /// Uniform in (0, 1), 53-bit resolution, never exactly 0 or 1.
  double next_uniform();
  /// Standard normal via inverse CDF.
  double next_normal();

 private:
  static constexpr std::uint64_t kStreamTag = 0xA5A5F00DD00DF00Dull;
  std::uint64_t state_;
};

/// Inverse of the standard normal CDF (Wichura's AS 241 double-precision
/// rational approximations). p must be in (0, 1).
double normal_quantile(double p);

/// Standard-normal values for the mask support, assigned in ascending index
/// order; length equals |support|. The full-dimension embedding is zero
/// off-support. Deterministic in (seed, mask).
Eigen::VectorXd masked_gaussian(std::uint64_t seed, const SparseMask& mask);

}  // namespace meerkat

#endif  // MEERKAT_PRNG_HPP
