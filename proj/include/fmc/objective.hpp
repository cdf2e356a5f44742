#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/fairness.hpp"
#include "fmc/mixture.hpp"

namespace fmc {

// `Abs` penalizes lambda * Delta. `Squared` penalizes lambda * Delta^2, which
// is what the closed-form "2 x gap x d(gap)" gradient corresponds to.
enum class PenaltyForm { Abs, Squared };

std::string to_string(PenaltyForm f);
PenaltyForm penalty_form_from_string(const std::string& s);

struct Penalty {
    double lambda = 0.0;
    PenaltyForm form = PenaltyForm::Abs;

    double apply(double delta) const {
        return lambda * (form == PenaltyForm::Squared ? delta * delta : delta);
    }
};

// Rows on which Delta is evaluated: the full data set or a fixed subsample
// (duplicates allowed), together with their group partition.
struct FairnessTarget {
    std::vector<std::size_t> rows;
    GroupIndex groups;

    static FairnessTarget full(const Dataset& ds);
    static FairnessTarget from_subsample(const Dataset& ds, const SubSample& sub);

    DeltaValue delta(const Dataset& ds, const ModelParams& params) const;
};

// Ascent direction in the unconstrained coordinates: mixture logits, means,
// log scales and categorical logits. Shapes follow ModelParams.
struct Gradient {
    std::vector<double> d_eta;
    MatrixD d_means;
    std::vector<double> d_scale;
    std::vector<double> d_cat_logits;

    static Gradient zeros_like(const ModelParams& params);
    std::vector<double> flatten() const;
    bool all_finite() const;
    double norm() const;
};

std::vector<double> pack(const ModelParams& params);
ModelParams unpack(const ModelParams& shape, std::span<const double> coords);

// params + gamma * grad in unconstrained coordinates, then floors.
ModelParams ascent_step(const ModelParams& params, const Gradient& grad, double gamma);

// The likelihood enters every objective as a per-sample mean, so lambda is
// measured in nats per sample.
double penalized_objective(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                           const Penalty& penalty);

// Q(params | frozen) / rows - penalty(Delta(params)). Delta is evaluated at
// the free parameters, not at the frozen ones.
double q_fair(const ModelParams& params, const SufficientStats& frozen, const Dataset& ds,
              const FairnessTarget& target, const Penalty& penalty);
double q_fair(const ModelParams& params, const ModelParams& params_t, const Dataset& ds,
              const FairnessTarget& target, const Penalty& penalty);

// Gradient of penalized_objective (frozen == nullptr) or of q_fair with the
// given frozen statistics. The maximizing cluster of Delta is held fixed and
// sign(0) = 0, which yields a subgradient at ties. Throws NonFinite.
Gradient grad_penalized(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                        const Penalty& penalty, const SufficientStats* frozen = nullptr);

// Gradient of lambda-free penalty term alone, i.e. d Delta / d theta (or
// d Delta^2) with the same subgradient conventions; exposed for testing.
Gradient grad_delta(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                    PenaltyForm form);

// Central differences on the unconstrained coordinates.
Gradient finite_diff_gradient(const ModelParams& params,
                              const std::function<double(const ModelParams&)>& objective, double step);
// Same on a plain vector, used for checking the differencing itself.
std::vector<double> finite_diff_gradient(std::span<const double> point,
                                         const std::function<double(std::span<const double>)>& objective,
                                         double step);

// Distance from the nearest non-differentiable configuration of Delta: the
// smaller of (best - runner-up cluster value) and the smallest |pairwise
// gap| entering the chosen cluster.
double delta_tie_margin(const ModelParams& params, const Dataset& ds, const FairnessTarget& target);

} // namespace fmc
