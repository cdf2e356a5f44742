#include "fmc/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fmc/error.hpp"

namespace fmc {

std::size_t GroupIndex::total() const {
    std::size_t n = 0;
    for (const auto& m : members) n += m.size();
    return n;
}

GroupIndex GroupIndex::from_labels(std::span<const int> labels, std::size_t num_groups) {
    GroupIndex g;
    g.members.resize(num_groups);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto s = static_cast<std::size_t>(labels[i]);
        if (labels[i] < 0 || s >= num_groups)
            throw Error(ErrorCode::Precondition, "group label out of range");
        g.members[s].push_back(i);
    }
    return g;
}

GroupIndex GroupIndex::from_dataset(const Dataset& ds) {
    return from_labels(ds.sensitive, ds.num_groups);
}

GroupIndex GroupIndex::from_subsample(const Dataset& ds, const SubSample& sub) {
    GroupIndex g;
    g.members.resize(ds.num_groups);
    for (std::size_t p = 0; p < sub.indices.size(); ++p)
        g.members[static_cast<std::size_t>(ds.sensitive[sub.indices[p]])].push_back(p);
    return g;
}

void GroupIndex::require_nondegenerate() const {
    if (members.size() < 2) throw Error(ErrorCode::GroupDegenerate, "need at least two sensitive groups");
    for (std::size_t s = 0; s < members.size(); ++s)
        if (members[s].empty())
            throw Error(ErrorCode::GroupDegenerate, "sensitive group " + std::to_string(s) + " is empty");
}

MatrixD group_means(const MatrixD& psi, const GroupIndex& groups) {
    MatrixD means(groups.num_groups(), psi.cols());
    for (std::size_t s = 0; s < groups.num_groups(); ++s) {
        auto out = means.row(s);
        for (std::size_t i : groups.members[s]) {
            auto row = psi.row(i);
            for (std::size_t k = 0; k < row.size(); ++k) out[k] += row[k];
        }
        double inv = 1.0 / static_cast<double>(groups.count(s));
        for (double& v : out) v *= inv;
    }
    return means;
}

namespace {

// max_k of (2 / (M (M - 1))) * sum_{s < t} |means(s, k) - means(t, k)|.
DeltaValue pairwise_delta(const MatrixD& means) {
    const std::size_t m = means.rows();
    const double scale = 2.0 / static_cast<double>(m * (m - 1));
    DeltaValue best{-1.0, 0};
    for (std::size_t k = 0; k < means.cols(); ++k) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t t = s + 1; t < m; ++t) acc += std::abs(means(s, k) - means(t, k));
        double value = m == 2 ? acc : scale * acc;
        if (value > best.value) best = {value, k};
    }
    best.value = std::max(best.value, 0.0);
    return best;
}

MatrixD one_hot_counts(std::span<const int> labels, const GroupIndex& groups, std::size_t k) {
    MatrixD counts(groups.num_groups(), k);
    for (std::size_t s = 0; s < groups.num_groups(); ++s)
        for (std::size_t i : groups.members[s]) {
            auto c = static_cast<std::size_t>(labels[i]);
            if (labels[i] < 0 || c >= k) throw Error(ErrorCode::Precondition, "cluster label out of range");
            counts(s, c) += 1.0;
        }
    return counts;
}

} // namespace

DeltaValue soft_delta(const Responsibilities& psi, const GroupIndex& groups) {
    groups.require_nondegenerate();
    if (groups.num_groups() != 2)
        throw Error(ErrorCode::GroupDegenerate, "soft_delta needs exactly two groups");
    return pairwise_delta(group_means(psi.psi, groups));
}

DeltaValue soft_delta_multinary(const Responsibilities& psi, const GroupIndex& groups) {
    groups.require_nondegenerate();
    return pairwise_delta(group_means(psi.psi, groups));
}

DeltaValue fairness_delta(const Responsibilities& psi, const GroupIndex& groups) {
    return groups.num_groups() == 2 ? soft_delta(psi, groups) : soft_delta_multinary(psi, groups);
}

double hard_gap(std::span<const int> labels, const GroupIndex& groups, std::size_t k) {
    groups.require_nondegenerate();
    MatrixD props = one_hot_counts(labels, groups, k);
    for (std::size_t s = 0; s < groups.num_groups(); ++s)
        for (double& v : props.row(s)) v /= static_cast<double>(groups.count(s));
    return pairwise_delta(props).value;
}

double additive_gap(std::span<const int> labels, const GroupIndex& groups, std::size_t k) {
    groups.require_nondegenerate();
    MatrixD props = one_hot_counts(labels, groups, k);
    const std::size_t m = groups.num_groups();
    for (std::size_t s = 0; s < m; ++s)
        for (double& v : props.row(s)) v /= static_cast<double>(groups.count(s));
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t t = s + 1; t < m; ++t) acc += std::abs(props(s, c) - props(t, c));
        total += m == 2 ? acc : 2.0 * acc / static_cast<double>(m * (m - 1));
    }
    return total;
}

double balance(std::span<const int> labels, const GroupIndex& groups, std::size_t k) {
    groups.require_nondegenerate();
    MatrixD counts = one_hot_counts(labels, groups, k);
    const std::size_t m = groups.num_groups();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (std::size_t s = 0; s < m; ++s) {
            lo = std::min(lo, counts(s, c));
            hi = std::max(hi, counts(s, c));
        }
        if (hi == 0.0) continue;
        best = std::min(best, lo / hi);
    }
    return std::isfinite(best) ? best : 0.0;
}

DeltaValue subsampled_delta(const ModelParams& params, const SubSample& sub, const Dataset& ds) {
    GroupIndex groups = GroupIndex::from_subsample(ds, sub);
    return fairness_delta(responsibilities(ds, params, sub.indices), groups);
}

} // namespace fmc
