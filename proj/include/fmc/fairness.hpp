#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/mixture.hpp"

namespace fmc {

// Partition of row positions by sensitive group. Positions refer to the rows
// of whatever responsibility matrix the index is paired with.
struct GroupIndex {
    std::vector<std::vector<std::size_t>> members;

    std::size_t num_groups() const noexcept { return members.size(); }
    std::size_t count(std::size_t s) const { return members[s].size(); }
    std::size_t total() const;

    static GroupIndex from_labels(std::span<const int> labels, std::size_t num_groups);
    static GroupIndex from_dataset(const Dataset& ds);
    // Positions 0..n-1 of the subsample, grouped by the label of the row
    // each position points at.
    static GroupIndex from_subsample(const Dataset& ds, const SubSample& sub);

    // Throws GroupDegenerate when M < 2 or a group is empty.
    void require_nondegenerate() const;
};

struct DeltaValue {
    double value = 0.0;
    std::size_t argmax_k = 0;
};

// Per-group mean responsibility: result(s, k) = mean_{i in group s} psi_ik.
MatrixD group_means(const MatrixD& psi, const GroupIndex& groups);

// Binary groups: max_k |mean_1 psi_k - mean_2 psi_k|.
DeltaValue soft_delta(const Responsibilities& psi, const GroupIndex& groups);
// Any M >= 2: max_k of the average absolute gap over the M(M-1)/2 group
// pairs. Equal to soft_delta when M = 2.
DeltaValue soft_delta_multinary(const Responsibilities& psi, const GroupIndex& groups);
// soft_delta for two groups, soft_delta_multinary otherwise.
DeltaValue fairness_delta(const Responsibilities& psi, const GroupIndex& groups);

// Hard-assignment analogues. For M > 2 hard_gap averages pairwise gaps the
// same way soft_delta_multinary does.
double hard_gap(std::span<const int> labels, const GroupIndex& groups, std::size_t k);
double additive_gap(std::span<const int> labels, const GroupIndex& groups, std::size_t k);
// min over clusters of the smallest between-group count ratio. A cluster
// empty for every group is skipped; one missing a group contributes 0.
double balance(std::span<const int> labels, const GroupIndex& groups, std::size_t k);

// Delta with responsibilities computed only on the subsample rows;
// duplicate indices count with multiplicity.
DeltaValue subsampled_delta(const ModelParams& params, const SubSample& sub, const Dataset& ds);

} // namespace fmc
