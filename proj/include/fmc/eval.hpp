#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/metrics.hpp"
#include "fmc/mixture.hpp"
#include "fmc/optim.hpp"

namespace fmc {

struct SweepRun {
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double cost = 0.0;
    double nll = 0.0;
    double delta_soft = 0.0;
    double gap_hard = 0.0;
    double balance = 0.0;
    std::size_t iterations = 0;
    double seconds = 0.0;
    // "converged", "max_iter", "stalled", "diverged" or "error:<code>".
    std::string status;
    bool pareto = false;

    bool ok() const { return status.rfind("error", 0) != 0 && status != "diverged"; }
};

struct SeriesStat {
    double mean = 0.0;
    double std = 0.0;
};

// Seed-averaged row per lambda, in grid order.
struct SweepSummary {
    double lambda = 0.0;
    std::size_t runs = 0;     // successful runs entering the averages
    SeriesStat cost;
    SeriesStat nll;
    SeriesStat delta_soft;
    SeriesStat gap_hard;
    SeriesStat balance;
    bool pareto = false;
};

struct SweepResult {
    FitConfig base;
    std::vector<SweepRun> runs;   // lambda-major, then seed
    std::vector<SweepSummary> summaries;
};

// Fits every (lambda, seed) pair on up to `jobs` threads. Results do not
// depend on the number of jobs. A failing run is recorded, never rethrown.
SweepResult sweep(const Dataset& ds, const FitConfig& base, const std::vector<double>& lambdas,
                  const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

// flags[i] is true when no other point is at least as good on both
// coordinates and strictly better on one (both minimized). NaN points are
// never flagged and never dominate.
std::vector<bool> pareto_flags(std::span<const double> a, std::span<const double> b);

// Spearman rank correlation with average ranks for ties. NaN when either
// series is constant.
double spearman(std::span<const double> x, std::span<const double> y);

// Best agreement of binary cluster labels with binary truth over the two
// label mappings.
double accuracy_best_mapping(std::span<const int> labels, std::span<const int> truth);

struct BoundReport {
    std::size_t rows = 0;
    std::size_t violations = 0;
    double min_slack = 0.0;       // min over rows of max_k psi_ik - bound
    double min_row_max = 1.0;     // min over rows of max_k psi_ik
};

// Checks max_k psi_ik >= 1 / (1 + (1 - pi_k1) / pi_k1 * exp(-D / (2 sigma^2)))
// for every row, where k_1, k_2 are the nearest and second-nearest means and
// D = |x - mu_k2|^2 - |x - mu_k1|^2. With uniform weights the bound reads
// 1 / (1 + (K - 1) exp(-D / (2 sigma^2))). Requires an isotropic model.
BoundReport soft_assignment_bound_check(const Dataset& ds, const ModelParams& params, double slack = 1e-12);

} // namespace fmc
