#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fmc {

using Rng = std::mt19937_64;

// Independent, reproducible generator for a named purpose ("init",
// "subsample", "batches", ...) derived from one user seed.
Rng make_stream(std::uint64_t seed, std::string_view name);

} // namespace fmc
