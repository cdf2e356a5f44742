#include "fmc/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "fmc/error.hpp"
#include "fmc/log.hpp"

namespace fmc {

std::string to_string(Algorithm a) {
    switch (a) {
    case Algorithm::GD: return "gd";
    case Algorithm::EM: return "em";
    case Algorithm::EMMiniBatch: return "em-minibatch";
    }
    return "em";
}

Algorithm algorithm_from_string(const std::string& s) {
    if (s == "gd") return Algorithm::GD;
    if (s == "em") return Algorithm::EM;
    if (s == "em-minibatch") return Algorithm::EMMiniBatch;
    throw Error(ErrorCode::Config, "unknown algorithm '" + s + "'");
}

FitConfig FitConfig::defaults(Algorithm algo) {
    FitConfig c;
    c.algorithm = algo;
    if (algo == Algorithm::GD) {
        c.T = 10000;
        c.R = 1;
        c.gamma = 1e-3;
    } else {
        c.T = 200;
        c.R = 10;
        c.gamma = 1e-2;
    }
    return c;
}

void FitConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::Config, what); };
    if (K < 1) fail("K must be at least 1");
    if (T < 1) fail("T must be at least 1");
    if (R < 1) fail("R must be at least 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail("lambda must be non-negative");
    if (!(batch_fraction > 0.0 && batch_fraction <= 1.0)) fail("batch_fraction must lie in (0, 1]");
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0))
        fail("subsample_fraction must lie in (0, 1]");
    if (!(tol > 0.0)) fail("tol must be positive");
    if (max_halvings < 0) fail("max_halvings must be non-negative");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sq = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
    return sq;
}

// Nearest center per row (lowest index on ties); returns the total cost.
double assign_nearest(const Dataset& ds, const MatrixD& centers, std::vector<int>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.cont.row(i);
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (std::size_t k = 0; k < centers.rows(); ++k) {
            double sq = squared_distance(x, centers.row(k));
            if (sq < best) {
                best = sq;
                arg = static_cast<int>(k);
            }
        }
        labels[i] = arg;
        total += best;
    }
    return total;
}

bool relative_change_below(double before, double after, double tol) {
    return std::abs(after - before) < tol * std::max(1.0, std::abs(before));
}

void check_fit_inputs(const Dataset& ds, const FitConfig& config) {
    config.validate();
    if (ds.size() < config.K)
        throw Error(ErrorCode::Precondition, "need at least K = " + std::to_string(config.K) + " rows");
    GroupIndex::from_dataset(ds).require_nondegenerate();
}

// Rows on which Delta is evaluated: the full data, or a with-replacement
// subsample drawn once per run.
FairnessTarget make_target(const Dataset& ds, const FitConfig& config) {
    if (config.subsample_fraction >= 1.0) return FairnessTarget::full(ds);
    auto n = static_cast<std::size_t>(std::llround(config.subsample_fraction * static_cast<double>(ds.size())));
    Rng rng = make_stream(config.seed, "subsample");
    return FairnessTarget::from_subsample(ds, subsample(ds, std::max<std::size_t>(n, 2), rng));
}

FitReport start_report(const Dataset& ds, const FitConfig& config, const ModelParams& init) {
    FitReport report;
    report.config = config;
    report.initial_params = init;
    report.params = init;
    report.initial = evaluate(ds, init, config.cost);
    if (ds.preprocess.standardized || ds.preprocess.l2_normalized) report.preprocess = ds.preprocess;
    return report;
}

void finish_report(const Dataset& ds, FitReport& report, Clock::time_point start) {
    report.final_metrics = evaluate(ds, report.params, report.config.cost);
    report.seconds = seconds_since(start);
    if (report.message.empty())
        report.message = report.converged ? "converged" : "reached the iteration cap";
    logger().info("{} finished after {} iterations: {} (nll {:.6g}, gap {:.4g})",
                  to_string(report.config.algorithm), report.iterations, report.message,
                  report.final_metrics.nll, report.final_metrics.gap_hard);
}

struct MStepResult {
    ModelParams params;
    double q_before = 0.0;
    double q_after = 0.0;
    double gamma = 0.0;
    bool accepted = false;
};

// R ascent steps on Q_fair(. | frozen). When the result falls below the
// starting value the step size is halved and the M-step redone.
MStepResult gem_m_step(const ModelParams& start, const SufficientStats& frozen, const Dataset& ds,
                       const FairnessTarget& target, const FitConfig& config) {
    const Penalty penalty = config.penalty();
    MStepResult out;
    out.params = start;
    out.q_before = q_fair(start, frozen, ds, target, penalty);
    out.q_after = out.q_before;
    double gamma = config.gamma;
    for (int attempt = 0; attempt <= config.max_halvings; ++attempt, gamma *= 0.5) {
        ModelParams cand = start;
        double q = -std::numeric_limits<double>::infinity();
        try {
            for (std::size_t r = 0; r < config.R; ++r)
                cand = ascent_step(cand, grad_penalized(cand, ds, target, penalty, &frozen), gamma);
            q = q_fair(cand, frozen, ds, target, penalty);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFinite) throw;
        }
        out.gamma = gamma;
        if (std::isfinite(q) && q >= out.q_before) {
            out.params = std::move(cand);
            out.q_after = q;
            out.accepted = true;
            return out;
        }
        if (std::isfinite(q)) out.q_after = q;
        logger().debug("M-step rejected at gamma {:.3g} ({:.12g} < {:.12g})", gamma, q, out.q_before);
    }
    return out;
}

// Shared driver of the full and mini-batch EM variants. With both fractions
// equal to 1 every outer step refreshes all rows, which is plain FMC-EM.
FitReport run_em(const Dataset& ds, const FitConfig& config) {
    auto start = Clock::now();
    check_fit_inputs(ds, config);
    Rng init_rng = make_stream(config.seed, "init");
    ModelParams params = init_params(ds, config, init_rng);
    FitReport report = start_report(ds, config, params);
    const FairnessTarget target = make_target(ds, config);
    const std::size_t n = ds.size();
    const bool full_batch = config.batch_fraction >= 1.0;
    const auto batch_size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(config.batch_fraction * static_cast<double>(n))), 1, n);
    Rng batch_rng = make_stream(config.seed, "batches");
    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

    // Frozen per-row responsibilities and their sums.
    Responsibilities frozen = responsibilities(ds, params);
    SufficientStats stats = SufficientStats::from(ds, frozen);
    const bool target_is_full = target.rows.size() == n && config.subsample_fraction >= 1.0;

    for (std::size_t t = 0; t < config.T; ++t) {
        MStepResult step = gem_m_step(params, stats, ds, target, config);
        if (!step.accepted) {
            if (relative_change_below(step.q_before, step.q_after, config.tol)) {
                report.converged = true;
                report.message = "converged (no improving step left)";
            } else {
                report.stalled = true;
                report.message = "stalled: no step size increased Q_fair";
            }
            break;
        }
        params = std::move(step.params);
        report.iterations = t + 1;

        IterationRecord rec;
        rec.iteration = t + 1;
        rec.objective_before = step.q_before;
        rec.objective = step.q_after;
        rec.gamma = step.gamma;
        Responsibilities psi_target;
        rec.metrics = evaluate_rows(ds, params, target.rows, target.groups, config.cost, &psi_target);
        report.trajectory.push_back(rec);
        logger().debug("iter {} q_fair {:.10g} -> {:.10g} delta {:.4g} gamma {:.3g}", t + 1, step.q_before,
                       step.q_after, rec.metrics.delta_soft, step.gamma);

        if (relative_change_below(step.q_before, step.q_after, config.tol)) {
            report.converged = true;
            break;
        }

        // E-step for the next outer iteration.
        if (full_batch) {
            frozen = target_is_full ? std::move(psi_target) : responsibilities(ds, params);
            stats = SufficientStats::from(ds, frozen);
        } else {
            std::vector<std::size_t> batch;
            batch.reserve(batch_size);
            std::sample(all_rows.begin(), all_rows.end(), std::back_inserter(batch), batch_size, batch_rng);
            Responsibilities fresh = responsibilities(ds, params, batch);
            for (std::size_t b = 0; b < batch.size(); ++b) {
                auto old_row = frozen.psi.row(batch[b]);
                stats.add_row(ds, batch[b], old_row, -1.0);
                std::copy(fresh.psi.row(b).begin(), fresh.psi.row(b).end(), old_row.begin());
                stats.add_row(ds, batch[b], old_row, 1.0);
            }
            // Periodic rebuild keeps the running sums from drifting.
            if ((t + 1) % 50 == 0) stats = SufficientStats::from(ds, frozen);
        }
    }
    report.params = params;
    finish_report(ds, report, start);
    return report;
}

} // namespace

KMeansResult kmeans(const Dataset& ds, std::size_t k, Rng& rng, std::size_t max_iter) {
    const std::size_t n = ds.size();
    if (k < 1 || n < k) throw Error(ErrorCode::Precondition, "kmeans needs 1 <= K <= N");
    const std::size_t d = ds.d_cont();
    KMeansResult res;
    res.centers = MatrixD(k, d);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    for (std::size_t c = 0; c < k; ++c) {
        auto x = ds.cont.row(all[c]);
        std::copy(x.begin(), x.end(), res.centers.row(c).begin());
    }

    res.labels.assign(n, 0);
    res.cost_history.push_back(assign_nearest(ds, res.centers, res.labels));
    std::vector<int> next(n);
    std::vector<double> counts(k);
    for (std::size_t it = 0; it < max_iter; ++it) {
        MatrixD sums(k, d);
        std::fill(counts.begin(), counts.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = static_cast<std::size_t>(res.labels[i]);
            counts[c] += 1.0;
            auto x = ds.cont.row(i);
            auto s = sums.row(c);
            for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0.0) {
                // Re-seed with the point worst served by its current center.
                std::size_t far = 0;
                double far_sq = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double sq = squared_distance(ds.cont.row(i),
                                                 res.centers.row(static_cast<std::size_t>(res.labels[i])));
                    if (sq > far_sq) {
                        far_sq = sq;
                        far = i;
                    }
                }
                auto x = ds.cont.row(far);
                std::copy(x.begin(), x.end(), res.centers.row(c).begin());
                res.labels[far] = static_cast<int>(c);
                continue;
            }
            for (std::size_t j = 0; j < d; ++j) res.centers(c, j) = sums(c, j) / counts[c];
        }
        double total = assign_nearest(ds, res.centers, next);
        res.cost_history.push_back(total);
        res.iterations = it + 1;
        bool stable = next == res.labels;
        res.labels.swap(next);
        if (stable) break;
    }
    return res;
}

ModelParams init_params(const Dataset& ds, const FitConfig& config, Rng& rng) {
    if (ds.size() < config.K) throw Error(ErrorCode::Precondition, "need at least K rows");
    ModelParams p = ModelParams::zeros(config.structure, config.K,
                                       has_gaussian(config.structure) ? ds.d_cont() : 0,
                                       has_categorical(config.structure) ? ds.cardinalities
                                                                         : std::vector<std::size_t>{});
    p.check_compatible(ds);
    if (has_gaussian(config.structure)) p.means = kmeans(ds, config.K, rng, config.kmeans_max_iter).centers;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (double& v : p.cat_logits) v = unif(rng);
    p.enforce_floors();
    return p;
}

FitReport fit_fmc_gd(const Dataset& ds, const FitConfig& config) {
    auto start = Clock::now();
    check_fit_inputs(ds, config);
    Rng init_rng = make_stream(config.seed, "init");
    ModelParams params = init_params(ds, config, init_rng);
    FitReport report = start_report(ds, config, params);
    const FairnessTarget target = make_target(ds, config);
    const Penalty penalty = config.penalty();

    double obj = penalized_objective(params, ds, target, penalty);
    ModelParams best = params;
    double best_obj = obj;
    int flat_steps = 0;
    for (std::size_t t = 0; t < config.T; ++t) {
        ModelParams next;
        double next_obj = 0.0;
        try {
            next = ascent_step(params, grad_penalized(params, ds, target, penalty), config.gamma);
            next_obj = penalized_objective(next, ds, target, penalty);
            if (!std::isfinite(next_obj)) throw Error(ErrorCode::NonFinite, "objective is not finite");
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NonFinite) throw;
            report.diverged = true;
            report.message = std::string("diverged: ") + e.what();
            break;
        }
        IterationRecord rec;
        rec.iteration = t + 1;
        rec.objective_before = obj;
        rec.objective = next_obj;
        rec.gamma = config.gamma;
        rec.metrics = evaluate_rows(ds, next, target.rows, target.groups, config.cost);
        report.trajectory.push_back(rec);
        report.iterations = t + 1;

        flat_steps = next_obj - obj < config.tol * std::max(1.0, std::abs(obj)) ? flat_steps + 1 : 0;
        params = std::move(next);
        obj = next_obj;
        if (obj > best_obj) {
            best_obj = obj;
            best = params;
        }
        if (flat_steps >= 5) {
            report.converged = true;
            break;
        }
    }
    report.params = best;
    finish_report(ds, report, start);
    return report;
}

FitReport fit_fmc_em(const Dataset& ds, const FitConfig& config) {
    FitConfig c = config;
    c.algorithm = Algorithm::EM;
    c.batch_fraction = 1.0;
    c.subsample_fraction = 1.0;
    return run_em(ds, c);
}

FitReport fit_fmc_em_minibatch(const Dataset& ds, const FitConfig& config) {
    FitConfig c = config;
    c.algorithm = Algorithm::EMMiniBatch;
    return run_em(ds, c);
}

FitReport fit(const Dataset& ds, const FitConfig& config) {
    switch (config.algorithm) {
    case Algorithm::GD: return fit_fmc_gd(ds, config);
    case Algorithm::EM: return fit_fmc_em(ds, config);
    case Algorithm::EMMiniBatch: return fit_fmc_em_minibatch(ds, config);
    }
    throw Error(ErrorCode::Config, "unknown algorithm");
}

Assignment post_assign(const ModelParams& params, const Dataset& rows) {
    Assignment a;
    a.resp = responsibilities(rows, params);
    a.labels = hard_assign(a.resp);
    return a;
}

} // namespace fmc
