#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/error.hpp"
#include "fmc/mixture.hpp"
#include "fmc/rng.hpp"

namespace fmc::testing {

// Two isotropic blobs at (-separation/2, 0) and (separation/2, 0) with unit
// scale and equal weights. Component 0 draws group 0 with probability
// bias[0], component 1 with probability bias[1].
Dataset biased_fixture(std::size_t n, std::uint64_t seed, double separation = 4.0,
                       std::vector<double> bias = {0.9, 0.1});

// K planted multinoulli components over `features` columns of the given
// cardinality, groups drawn with the given per-component bias.
Dataset categorical_fixture(std::size_t n, std::uint64_t seed, std::size_t features = 5,
                            std::size_t cardinality = 4);

// Three 2-d blobs, each dominated (probability 0.8) by one of three groups.
Dataset three_group_fixture(std::size_t n, std::uint64_t seed);

// Unstructured rows: d continuous columns ~ N(0, 2^2), categorical columns
// uniform over their cardinality, groups uniform over m labels.
Dataset random_dataset(Rng& rng, std::size_t n, std::size_t d, std::vector<std::size_t> cards, std::size_t m);

// Parameters with random logits, means, scales in [0.5, 2] and logits.
ModelParams random_params(Rng& rng, Structure s, std::size_t k, std::size_t d, std::vector<std::size_t> cards);

// Adjusted Rand index between two labelings.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// Fresh path under the system temp directory; `name` keeps it readable.
std::string temp_path(const std::string& name);
void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

// Code of the fmc::Error thrown by f, or nullopt when f returns normally.
template <class F>
std::optional<ErrorCode> error_code(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// Relative error |a - b| / max(1, |a|, |b|).
double rel_err(double a, double b);

} // namespace fmc::testing
