#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmc/matrix.hpp"
#include "fmc/rng.hpp"

namespace fmc {

enum class ColumnRole { Continuous, Categorical, Sensitive, Ignored };

// Column name -> role. Header columns not named here are ignored.
struct CsvSchema {
    std::vector<std::pair<std::string, ColumnRole>> columns;

    // "age:cont,sex:sensitive,workclass:cat,fnlwgt:ignore"
    static CsvSchema parse(const std::string& text);
    std::string to_string() const;
    std::optional<ColumnRole> role_of(const std::string& name) const;
};

// Standardization / normalization applied to the continuous block. Stored
// so unseen rows can be mapped into the training coordinates.
struct PreprocessStats {
    bool standardized = false;
    bool l2_normalized = false;
    std::vector<double> mean;
    std::vector<double> std;
};

// Immutable after construction. All indices are 0-based: categorical codes
// lie in [0, cardinality), sensitive labels in [0, num_groups).
struct Dataset {
    MatrixD cont;
    MatrixI cate;
    std::vector<std::size_t> cardinalities;
    std::vector<int> sensitive;
    std::size_t num_groups = 0;

    std::vector<std::string> cont_names;
    std::vector<std::string> cate_names;
    std::string sensitive_name = "group";
    // Original string value for each categorical code / group label.
    std::vector<std::vector<std::string>> cate_levels;
    std::vector<std::string> group_levels;
    // Header of the source file, used to reject files with a different layout.
    std::vector<std::string> header;

    // Planted component labels for synthetic data.
    std::optional<std::vector<int>> truth;
    PreprocessStats preprocess;

    std::size_t size() const noexcept { return sensitive.size(); }
    std::size_t d_cont() const noexcept { return cont.cols(); }
    std::size_t d_cate() const noexcept { return cardinalities.size(); }
    std::vector<std::size_t> group_sizes() const;

    // Throws Error(Precondition) when an invariant does not hold.
    void validate() const;
};

// Loads a CSV with a header row. Categorical strings are encoded in order of
// first appearance. With `require_sensitive` false the sensitive column may
// be absent (used when assigning unseen rows).
Dataset load_csv(const std::string& path, const CsvSchema& schema, bool require_sensitive = true);

// Same as load_csv but reuses the level dictionaries of `reference`, so
// codes agree with the training data. Unknown levels raise E_SCHEMA.
Dataset load_csv_like(const std::string& path, const Dataset& reference, bool require_sensitive);

void write_csv(const std::string& path, const Dataset& ds);

// Population standard deviation. Constant columns become zeros (warning).
Dataset standardize(const Dataset& ds);
Dataset l2_normalize(const Dataset& ds);

// Re-applies stored statistics to new rows.
Dataset apply_preprocess(const Dataset& ds, const PreprocessStats& stats);

// Indices drawn with replacement; multiplicity is meaningful.
struct SubSample {
    std::vector<std::size_t> indices;
    std::vector<std::size_t> group_counts;
    std::size_t size() const noexcept { return indices.size(); }
};

inline constexpr int kSubsampleRetries = 100;

SubSample subsample(const Dataset& ds, std::size_t n, Rng& rng);

// Every row exactly once, in order.
SubSample identity_subsample(const Dataset& ds);

// Keeps only the listed rows (duplicates allowed), preserving metadata.
Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& rows);

struct SyntheticSpec {
    std::vector<double> weights;                 // K, on the simplex
    std::vector<std::vector<double>> centers;    // K x d_cont (may be empty)
    std::vector<std::vector<double>> scales;     // K x d_cont, or K x 1 (isotropic)
    // P(group | component): K x M. A binary bias b_k expands to (b_k, 1 - b_k).
    std::vector<std::vector<double>> group_probs;
    std::vector<std::size_t> cardinalities;      // categorical block (may be empty)
    // K x d_cate x l_j probability tables.
    std::vector<std::vector<std::vector<double>>> cat_tables;
    std::size_t n = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Exact ancestral sampling; ground-truth component labels land in `truth`.
Dataset make_synthetic_mixture(const SyntheticSpec& spec);

} // namespace fmc
