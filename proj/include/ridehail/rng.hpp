#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ridehail {

using Rng = std::mt19937_64;

/// Derives an independent sub-seed from a master seed, a component label and
/// a counter. Labels keep streams of different components apart, so adding
/// a consumer never shifts another consumer's draws; the counter gives
/// per-tree / per-day / per-iteration streams that can be generated in any
/// order (or in parallel) with the same result.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view label,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, label, index));
}

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// k distinct values from [0, n), returned in ascending order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace ridehail
