#include "fmc/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "fmc/error.hpp"
#include "fmc/log.hpp"

namespace fmc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SweepRun run_one(const Dataset& ds, FitConfig config, double lambda, std::uint64_t seed) {
    SweepRun run;
    run.lambda = lambda;
    run.seed = seed;
    config.lambda = lambda;
    config.seed = seed;
    try {
        FitReport rep = fit(ds, config);
        const Metrics& m = rep.final_metrics;
        run.cost = m.cost;
        run.nll = m.nll;
        run.delta_soft = m.delta_soft;
        run.gap_hard = m.gap_hard;
        run.balance = m.balance;
        run.iterations = rep.iterations;
        run.seconds = rep.seconds;
        run.status = rep.diverged ? "diverged" : rep.stalled ? "stalled" : rep.converged ? "converged" : "max_iter";
    } catch (const Error& e) {
        run.cost = run.nll = run.delta_soft = run.gap_hard = run.balance = kNaN;
        run.status = "error:" + std::string(code_name(e.code()));
        logger().warn("sweep run lambda={} seed={} failed: {}", lambda, seed, e.what());
    }
    return run;
}

SeriesStat mean_std(const std::vector<double>& v) {
    if (v.empty()) return {kNaN, kNaN};
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

std::vector<double> ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t p = i; p <= j; ++p) r[order[p]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

SweepResult sweep(const Dataset& ds, const FitConfig& base, const std::vector<double>& lambdas,
                  const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    if (lambdas.empty()) throw Error(ErrorCode::Config, "lambda grid is empty");
    if (seeds.empty()) throw Error(ErrorCode::Config, "seed list is empty");
    base.validate();
    SweepResult res;
    res.base = base;
    const std::size_t total = lambdas.size() * seeds.size();
    res.runs.resize(total);

    // Each task writes only its own slot, so the outcome is independent of
    // scheduling and of the job count.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t idx = next++; idx < total; idx = next++)
            res.runs[idx] = run_one(ds, base, lambdas[idx / seeds.size()], seeds[idx % seeds.size()]);
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, total);
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<double> cost(total), gap(total);
    for (std::size_t i = 0; i < total; ++i) {
        bool ok = res.runs[i].ok();
        cost[i] = ok ? res.runs[i].cost : kNaN;
        gap[i] = ok ? res.runs[i].gap_hard : kNaN;
    }
    auto flags = pareto_flags(cost, gap);
    for (std::size_t i = 0; i < total; ++i) res.runs[i].pareto = flags[i];

    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        SweepSummary s;
        s.lambda = lambdas[l];
        std::vector<double> c, n, d, g, b;
        for (std::size_t j = 0; j < seeds.size(); ++j) {
            const SweepRun& r = res.runs[l * seeds.size() + j];
            if (!r.ok()) continue;
            c.push_back(r.cost);
            n.push_back(r.nll);
            d.push_back(r.delta_soft);
            g.push_back(r.gap_hard);
            b.push_back(r.balance);
        }
        s.runs = c.size();
        s.cost = mean_std(c);
        s.nll = mean_std(n);
        s.delta_soft = mean_std(d);
        s.gap_hard = mean_std(g);
        s.balance = mean_std(b);
        res.summaries.push_back(s);
    }
    std::vector<double> mc, mg;
    for (const auto& s : res.summaries) {
        mc.push_back(s.cost.mean);
        mg.push_back(s.gap_hard.mean);
    }
    auto summary_flags = pareto_flags(mc, mg);
    for (std::size_t l = 0; l < res.summaries.size(); ++l) res.summaries[l].pareto = summary_flags[l];
    return res;
}

std::vector<bool> pareto_flags(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::Dim, "pareto coordinates differ in length");
    const std::size_t n = a.size();
    std::vector<bool> flags(n, false);
    auto valid = [&](std::size_t i) { return std::isfinite(a[i]) && std::isfinite(b[i]); };
    for (std::size_t i = 0; i < n; ++i) {
        if (!valid(i)) continue;
        bool dominated = false;
        for (std::size_t j = 0; j < n && !dominated; ++j) {
            if (j == i || !valid(j)) continue;
            dominated = a[j] <= a[i] && b[j] <= b[i] && (a[j] < a[i] || b[j] < b[i]);
        }
        flags[i] = !dominated;
    }
    return flags;
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorCode::Dim, "spearman series differ in length");
    if (x.size() < 2) return kNaN;
    auto rx = ranks(x);
    auto ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return kNaN;
    return sxy / std::sqrt(sxx * syy);
}

double accuracy_best_mapping(std::span<const int> labels, std::span<const int> truth) {
    if (labels.size() != truth.size()) throw Error(ErrorCode::Dim, "labels and truth differ in length");
    if (labels.empty()) throw Error(ErrorCode::Empty, "no labels");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] > 1 || truth[i] < 0 || truth[i] > 1)
            throw Error(ErrorCode::Precondition, "best-mapping accuracy needs binary labels");
        agree += labels[i] == truth[i];
    }
    double acc = static_cast<double>(agree) / static_cast<double>(labels.size());
    return std::max(acc, 1.0 - acc);
}

BoundReport soft_assignment_bound_check(const Dataset& ds, const ModelParams& params, double slack) {
    if (params.structure != Structure::GaussianIso)
        throw Error(ErrorCode::Precondition, "the soft-assignment bound needs an isotropic Gaussian model");
    Responsibilities psi = responsibilities(ds, params);
    const auto pi = params.pi();
    const double two_var = 2.0 * params.sigma() * params.sigma();
    const std::size_t k_count = params.K();
    BoundReport rep;
    rep.rows = ds.size();
    rep.min_slack = std::numeric_limits<double>::infinity();
    std::vector<double> dist(k_count);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto x = ds.cont.row(i);
        for (std::size_t k = 0; k < k_count; ++k) {
            double sq = 0.0;
            auto mu = params.means.row(k);
            for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - mu[j]) * (x[j] - mu[j]);
            dist[k] = sq;
        }
        auto k1 = static_cast<std::size_t>(std::min_element(dist.begin(), dist.end()) - dist.begin());
        double bound = 1.0;
        if (k_count > 1) {
            double d2 = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < k_count; ++k)
                if (k != k1) d2 = std::min(d2, dist[k]);
            double gap = d2 - dist[k1];
            bound = 1.0 / (1.0 + (1.0 - pi[k1]) / pi[k1] * std::exp(-gap / two_var));
        }
        auto row = psi.psi.row(i);
        double row_max = *std::max_element(row.begin(), row.end());
        double s = row_max - bound;
        rep.min_slack = std::min(rep.min_slack, s);
        rep.min_row_max = std::min(rep.min_row_max, row_max);
        if (s < -slack) ++rep.violations;
    }
    return rep;
}

} // namespace fmc
