#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/fairness.hpp"
#include "fmc/mixture.hpp"

namespace fmc {

enum class CostKind { Distance, SquaredDistance };

std::string to_string(CostKind c);
CostKind cost_kind_from_string(const std::string& s);

// sum_i dist(x_i, centers[label_i]) over the continuous block.
double cost(const Dataset& ds, std::span<const int> labels, const MatrixD& centers,
            CostKind kind = CostKind::Distance);

// Per-sample negative log-likelihood, -loglik / N.
double nll(const Dataset& ds, const ModelParams& params);

struct Metrics {
    double loglik = 0.0;      // mean log-likelihood per row
    double nll = 0.0;         // -loglik
    double delta_soft = 0.0;
    std::size_t delta_argmax = 0;
    double gap_hard = 0.0;
    double additive_gap = 0.0;
    double balance = 0.0;
    double cost = 0.0;
};

// Metrics over `rows` of ds (duplicates allowed) grouped by `groups`
// (positions into rows). `psi_out`, when given, receives the
// responsibilities of those rows.
Metrics evaluate_rows(const Dataset& ds, const ModelParams& params, std::span<const std::size_t> rows,
                      const GroupIndex& groups, CostKind kind, Responsibilities* psi_out = nullptr);

// Metrics over the whole data set.
Metrics evaluate(const Dataset& ds, const ModelParams& params, CostKind kind = CostKind::Distance);

} // namespace fmc
