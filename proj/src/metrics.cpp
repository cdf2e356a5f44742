#include "fmc/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "fmc/error.hpp"

namespace fmc {

std::string to_string(CostKind c) { return c == CostKind::SquaredDistance ? "sqdist" : "dist"; }

CostKind cost_kind_from_string(const std::string& s) {
    if (s == "dist") return CostKind::Distance;
    if (s == "sqdist") return CostKind::SquaredDistance;
    throw Error(ErrorCode::Config, "unknown cost kind '" + s + "'");
}

double cost(const Dataset& ds, std::span<const int> labels, const MatrixD& centers, CostKind kind) {
    if (labels.size() != ds.size()) throw Error(ErrorCode::Dim, "one label per row expected");
    if (centers.cols() != ds.d_cont()) throw Error(ErrorCode::Dim, "center dimension differs from data");
    double total = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto c = static_cast<std::size_t>(labels[i]);
        if (labels[i] < 0 || c >= centers.rows())
            throw Error(ErrorCode::Precondition, "cluster label out of range");
        auto x = ds.cont.row(i);
        auto mu = centers.row(c);
        double sq = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - mu[j]) * (x[j] - mu[j]);
        total += kind == CostKind::SquaredDistance ? sq : std::sqrt(sq);
    }
    return total;
}

double nll(const Dataset& ds, const ModelParams& params) {
    return -log_likelihood(ds, params) / static_cast<double>(ds.size());
}

namespace {

bool groups_usable(const GroupIndex& groups) {
    if (groups.num_groups() < 2) return false;
    for (std::size_t s = 0; s < groups.num_groups(); ++s)
        if (groups.count(s) == 0) return false;
    return true;
}

} // namespace

Metrics evaluate_rows(const Dataset& ds, const ModelParams& params, std::span<const std::size_t> rows,
                      const GroupIndex& groups, CostKind kind, Responsibilities* psi_out) {
    params.check_compatible(ds);
    if (rows.empty()) throw Error(ErrorCode::Empty, "no rows to evaluate");
    const std::size_t k_count = params.K();
    ComponentCache cache(params);
    Responsibilities psi{MatrixD(rows.size(), k_count)};
    double ll = 0.0;
    for (std::size_t p = 0; p < rows.size(); ++p) {
        auto out = psi.psi.row(p);
        cache.log_scores(ds, rows[p], out);
        double lse = log_sum_exp(out);
        ll += lse;
        for (double& v : out) v = std::exp(v - lse);
    }

    Metrics m;
    m.loglik = ll / static_cast<double>(rows.size());
    m.nll = -m.loglik;
    auto labels = hard_assign(psi);
    if (groups_usable(groups)) {
        DeltaValue d = fairness_delta(psi, groups);
        m.delta_soft = d.value;
        m.delta_argmax = d.argmax_k;
        m.gap_hard = hard_gap(labels, groups, k_count);
        m.additive_gap = additive_gap(labels, groups, k_count);
        m.balance = balance(labels, groups, k_count);
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        m.delta_soft = m.gap_hard = m.additive_gap = m.balance = nan;
    }
    if (has_gaussian(params.structure)) {
        for (std::size_t p = 0; p < rows.size(); ++p) {
            auto x = ds.cont.row(rows[p]);
            auto mu = params.means.row(static_cast<std::size_t>(labels[p]));
            double sq = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - mu[j]) * (x[j] - mu[j]);
            m.cost += kind == CostKind::SquaredDistance ? sq : std::sqrt(sq);
        }
    }
    if (psi_out) *psi_out = std::move(psi);
    return m;
}

Metrics evaluate(const Dataset& ds, const ModelParams& params, CostKind kind) {
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    GroupIndex groups = GroupIndex::from_labels(ds.sensitive, ds.num_groups);
    return evaluate_rows(ds, params, rows, groups, kind);
}

} // namespace fmc
