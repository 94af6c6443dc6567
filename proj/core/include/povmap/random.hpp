#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace povmap {

using Rng = std::mt19937_64;

/// Mixes a parent seed with a label into an independent child seed
/// (splitmix64 finalizer over an FNV-1a hash of the label).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);

}  // namespace povmap
