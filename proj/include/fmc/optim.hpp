#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/metrics.hpp"
#include "fmc/mixture.hpp"
#include "fmc/objective.hpp"
#include "fmc/rng.hpp"

namespace fmc {

enum class Algorithm { GD, EM, EMMiniBatch };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct FitConfig {
    Algorithm algorithm = Algorithm::EM;
    std::size_t K = 2;
    double lambda = 0.0;
    std::size_t T = 200;
    std::size_t R = 10;
    double gamma = 1e-2;
    // Share of rows refreshed per outer step (mini-batch EM only).
    double batch_fraction = 1.0;
    // Size of the fixed Delta subsample relative to N; 1 means the full data.
    double subsample_fraction = 1.0;
    Structure structure = Structure::GaussianIso;
    PenaltyForm penalty_form = PenaltyForm::Abs;
    CostKind cost = CostKind::Distance;
    std::uint64_t seed = 0;
    // Relative change of the monitored objective that counts as converged.
    double tol = 1e-6;
    std::size_t kmeans_max_iter = 100;
    // Learning-rate halvings allowed per M-step before giving up.
    int max_halvings = 10;

    // (T, gamma) = (10000, 1e-3) for GD, (T, R, gamma) = (200, 10, 1e-2) otherwise.
    static FitConfig defaults(Algorithm algo);
    void validate() const;
    Penalty penalty() const { return {lambda, penalty_form}; }
};

struct IterationRecord {
    std::size_t iteration = 0;
    // Monitored objective before and after the update: the penalized
    // log-likelihood for GD, Q_fair(. | theta_t) for the EM variants.
    double objective_before = 0.0;
    double objective = 0.0;
    double gamma = 0.0;
    // Evaluated at the updated parameters on the full data (GD, EM) or on
    // the Delta subsample (mini-batch EM).
    Metrics metrics;
};

struct FitReport {
    ModelParams params;
    ModelParams initial_params;
    std::vector<IterationRecord> trajectory;
    Metrics initial;
    Metrics final_metrics;  // always on the full data set
    std::size_t iterations = 0;
    bool converged = false;
    bool diverged = false;
    // The GEM safeguard could not find an improving step.
    bool stalled = false;
    std::string message;
    double seconds = 0.0;
    FitConfig config;
    std::optional<PreprocessStats> preprocess;
};

struct KMeansResult {
    MatrixD centers;
    std::vector<int> labels;
    // Sum of squared distances after every assignment pass.
    std::vector<double> cost_history;
    std::size_t iterations = 0;
};

// Lloyd's algorithm on the continuous block, seeded with K distinct random
// rows. An empty cluster is re-seeded with the point farthest from its center.
KMeansResult kmeans(const Dataset& ds, std::size_t k, Rng& rng, std::size_t max_iter = 100);

// Uniform weights, K-means means, unit scales, Unif(0,1) categorical logits.
ModelParams init_params(const Dataset& ds, const FitConfig& config, Rng& rng);

FitReport fit_fmc_gd(const Dataset& ds, const FitConfig& config);
FitReport fit_fmc_em(const Dataset& ds, const FitConfig& config);
FitReport fit_fmc_em_minibatch(const Dataset& ds, const FitConfig& config);
// Dispatches on config.algorithm.
FitReport fit(const Dataset& ds, const FitConfig& config);

struct Assignment {
    Responsibilities resp;
    std::vector<int> labels;
};

// Soft and hard assignment of rows that took no part in training. The rows
// must already be in the training coordinates (see apply_preprocess).
Assignment post_assign(const ModelParams& params, const Dataset& rows);

} // namespace fmc
