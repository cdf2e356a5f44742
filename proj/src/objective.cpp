#include "fmc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fmc/error.hpp"

namespace fmc {

std::string to_string(PenaltyForm f) { return f == PenaltyForm::Squared ? "squared" : "abs"; }

PenaltyForm penalty_form_from_string(const std::string& s) {
    if (s == "abs") return PenaltyForm::Abs;
    if (s == "squared") return PenaltyForm::Squared;
    throw Error(ErrorCode::Config, "unknown penalty form '" + s + "'");
}

FairnessTarget FairnessTarget::full(const Dataset& ds) {
    FairnessTarget t;
    t.rows.resize(ds.size());
    std::iota(t.rows.begin(), t.rows.end(), std::size_t{0});
    t.groups = GroupIndex::from_dataset(ds);
    return t;
}

FairnessTarget FairnessTarget::from_subsample(const Dataset& ds, const SubSample& sub) {
    return {sub.indices, GroupIndex::from_subsample(ds, sub)};
}

DeltaValue FairnessTarget::delta(const Dataset& ds, const ModelParams& params) const {
    return fairness_delta(responsibilities(ds, params, rows), groups);
}

Gradient Gradient::zeros_like(const ModelParams& params) {
    Gradient g;
    g.d_eta.assign(params.K(), 0.0);
    g.d_means = MatrixD(params.means.rows(), params.means.cols());
    g.d_scale.assign(params.scale.size(), 0.0);
    g.d_cat_logits.assign(params.cat_logits.size(), 0.0);
    return g;
}

std::vector<double> Gradient::flatten() const {
    std::vector<double> out = d_eta;
    out.insert(out.end(), d_means.data().begin(), d_means.data().end());
    out.insert(out.end(), d_scale.begin(), d_scale.end());
    out.insert(out.end(), d_cat_logits.begin(), d_cat_logits.end());
    return out;
}

bool Gradient::all_finite() const {
    auto v = flatten();
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double Gradient::norm() const {
    double sq = 0.0;
    for (double x : flatten()) sq += x * x;
    return std::sqrt(sq);
}

std::vector<double> pack(const ModelParams& params) {
    std::vector<double> out = params.eta;
    out.insert(out.end(), params.means.data().begin(), params.means.data().end());
    for (double s : params.scale) out.push_back(std::log(s));
    out.insert(out.end(), params.cat_logits.begin(), params.cat_logits.end());
    return out;
}

ModelParams unpack(const ModelParams& shape, std::span<const double> coords) {
    ModelParams p = shape;
    std::size_t pos = 0;
    auto take = [&](std::span<double> dst) {
        if (pos + dst.size() > coords.size())
            throw Error(ErrorCode::Precondition, "coordinate vector too short");
        std::copy_n(coords.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
        pos += dst.size();
    };
    take(p.eta);
    take(p.means.data());
    take(p.scale);
    for (double& s : p.scale) s = std::exp(s);
    take(p.cat_logits);
    if (pos != coords.size()) throw Error(ErrorCode::Precondition, "coordinate vector too long");
    return p;
}

ModelParams ascent_step(const ModelParams& params, const Gradient& grad, double gamma) {
    ModelParams next = params;
    for (std::size_t k = 0; k < next.eta.size(); ++k) next.eta[k] += gamma * grad.d_eta[k];
    auto& means = next.means.data();
    for (std::size_t i = 0; i < means.size(); ++i) means[i] += gamma * grad.d_means.data()[i];
    for (std::size_t i = 0; i < next.scale.size(); ++i) next.scale[i] *= std::exp(gamma * grad.d_scale[i]);
    for (std::size_t i = 0; i < next.cat_logits.size(); ++i)
        next.cat_logits[i] += gamma * grad.d_cat_logits[i];
    next.enforce_floors();
    return next;
}

double penalized_objective(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                           const Penalty& penalty) {
    double ll = log_likelihood(ds, params) / static_cast<double>(ds.size());
    if (penalty.lambda == 0.0) return ll;
    return ll - penalty.apply(target.delta(ds, params).value);
}

double q_fair(const ModelParams& params, const SufficientStats& frozen, const Dataset& ds,
              const FairnessTarget& target, const Penalty& penalty) {
    double q = frozen.q_value(params) / frozen.rows;
    if (penalty.lambda == 0.0) return q;
    return q - penalty.apply(target.delta(ds, params).value);
}

double q_fair(const ModelParams& params, const ModelParams& params_t, const Dataset& ds,
              const FairnessTarget& target, const Penalty& penalty) {
    params.check_compatible(ds);
    auto stats = SufficientStats::from(ds, responsibilities(ds, params_t));
    return q_fair(params, stats, ds, target, penalty);
}

namespace {

// Adds sum_l weights[l] * d(log pi_l + log f(x; theta_l)) / d(coords) for one row.
void accumulate_row(const ModelParams& params, const std::vector<double>& pi,
                    const std::vector<double>& cat_probs, const Dataset& ds, std::size_t row,
                    std::span<const double> weights, Gradient& grad) {
    const std::size_t k_count = params.K();
    const std::size_t d = params.d_cont();
    double weight_sum = 0.0;
    for (std::size_t l = 0; l < k_count; ++l) {
        grad.d_eta[l] += weights[l];
        weight_sum += weights[l];
    }
    for (std::size_t l = 0; l < k_count; ++l) grad.d_eta[l] -= pi[l] * weight_sum;

    if (has_gaussian(params.structure)) {
        auto x = ds.cont.row(row);
        const bool diag = is_diagonal(params.structure);
        for (std::size_t l = 0; l < k_count; ++l) {
            const double w = weights[l];
            if (w == 0.0) continue;
            auto mu = params.means.row(l);
            auto g_mu = grad.d_means.row(l);
            double quad = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double s = params.scale_of(l, j);
                double inv_var = 1.0 / (s * s);
                double diff = x[j] - mu[j];
                g_mu[j] += w * diff * inv_var;
                if (diag) grad.d_scale[l * d + j] += w * (diff * diff * inv_var - 1.0);
                else quad += diff * diff * inv_var;
            }
            if (!diag) grad.d_scale[0] += w * (quad - static_cast<double>(d));
        }
    }
    if (has_categorical(params.structure)) {
        auto c = ds.cate.row(row);
        const std::size_t width = params.cat_width();
        for (std::size_t l = 0; l < k_count; ++l) {
            const double w = weights[l];
            if (w == 0.0) continue;
            std::size_t offset = l * width;
            for (std::size_t j = 0; j < params.cardinalities.size(); ++j) {
                for (std::size_t v = 0; v < params.cardinalities[j]; ++v)
                    grad.d_cat_logits[offset + v] -= w * cat_probs[offset + v];
                grad.d_cat_logits[offset + static_cast<std::size_t>(c[j])] += w;
                offset += params.cardinalities[j];
            }
        }
    }
}

// Softmax of every categorical table, in the cat_logits layout.
std::vector<double> flat_cat_probs(const ModelParams& params) {
    std::vector<double> out(params.cat_logits.size());
    const std::size_t width = params.cat_width();
    for (std::size_t k = 0; k < params.K(); ++k)
        for (std::size_t j = 0; j < params.cardinalities.size(); ++j) {
            auto probs = params.cat_probs(k, j);
            std::copy(probs.begin(), probs.end(), out.begin() + static_cast<std::ptrdiff_t>(k * width + params.cat_offset(j)));
        }
    return out;
}

void add_q_gradient(const ModelParams& params, const SufficientStats& st, double scale, Gradient& grad) {
    const auto pi = params.pi();
    const std::size_t d = params.d_cont();
    double total = 0.0;
    for (double w : st.weight) total += w;
    for (std::size_t k = 0; k < params.K(); ++k) {
        grad.d_eta[k] += scale * (st.weight[k] - pi[k] * total);
        if (has_gaussian(params.structure)) {
            const bool diag = is_diagonal(params.structure);
            double quad = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double mu = params.means(k, j);
                double s = params.scale_of(k, j);
                double inv_var = 1.0 / (s * s);
                double ss = st.second(k, j) - 2.0 * mu * st.first(k, j) + mu * mu * st.weight[k];
                grad.d_means(k, j) += scale * (st.first(k, j) - mu * st.weight[k]) * inv_var;
                if (diag) grad.d_scale[k * d + j] += scale * (ss * inv_var - st.weight[k]);
                else quad += ss * inv_var;
            }
            if (!diag) grad.d_scale[0] += scale * (quad - static_cast<double>(d) * st.weight[k]);
        }
        if (has_categorical(params.structure)) {
            const std::size_t width = params.cat_width();
            for (std::size_t j = 0; j < params.cardinalities.size(); ++j) {
                auto probs = params.cat_probs(k, j);
                std::size_t base = k * width + params.cat_offset(j);
                for (std::size_t v = 0; v < probs.size(); ++v)
                    grad.d_cat_logits[base + v] += scale * (st.counts[base + v] - st.weight[k] * probs[v]);
            }
        }
    }
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Adds factor * d g(Delta) / d coords, where g is the identity or the square.
void add_delta_gradient(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                        PenaltyForm form, double factor, Gradient& grad) {
    target.groups.require_nondegenerate();
    Responsibilities psi = responsibilities(ds, params, target.rows);
    MatrixD means = group_means(psi.psi, target.groups);
    DeltaValue delta = fairness_delta(psi, target.groups);
    const std::size_t kt = delta.argmax_k;
    const std::size_t m = target.groups.num_groups();
    const double pair_scale = m == 2 ? 1.0 : 2.0 / static_cast<double>(m * (m - 1));
    const double outer = factor * (form == PenaltyForm::Squared ? 2.0 * delta.value : 1.0);
    if (outer == 0.0) return;

    // d Delta / d mean_s = pair_scale * sum_{t != s} sign(mean_s - mean_t).
    std::vector<double> group_coef(m, 0.0);
    for (std::size_t s = 0; s < m; ++s) {
        double acc = 0.0;
        for (std::size_t t = 0; t < m; ++t)
            if (t != s) acc += sign_of(means(s, kt) - means(t, kt));
        group_coef[s] = outer * pair_scale * acc / static_cast<double>(target.groups.count(s));
    }

    const auto pi = params.pi();
    const auto cat_probs = flat_cat_probs(params);
    std::vector<double> weights(params.K());
    for (std::size_t s = 0; s < m; ++s) {
        if (group_coef[s] == 0.0) continue;
        for (std::size_t p : target.groups.members[s]) {
            auto row = psi.psi.row(p);
            // d psi_kt / d a_l = psi_kt (delta_{kt,l} - psi_l)
            for (std::size_t l = 0; l < weights.size(); ++l)
                weights[l] = group_coef[s] * row[kt] * ((l == kt ? 1.0 : 0.0) - row[l]);
            accumulate_row(params, pi, cat_probs, ds, target.rows[p], weights, grad);
        }
    }
}

} // namespace

Gradient grad_delta(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                    PenaltyForm form) {
    params.check_compatible(ds);
    Gradient grad = Gradient::zeros_like(params);
    add_delta_gradient(params, ds, target, form, 1.0, grad);
    return grad;
}

Gradient grad_penalized(const ModelParams& params, const Dataset& ds, const FairnessTarget& target,
                        const Penalty& penalty, const SufficientStats* frozen) {
    params.check_compatible(ds);
    Gradient grad = Gradient::zeros_like(params);
    if (frozen) {
        add_q_gradient(params, *frozen, 1.0 / frozen->rows, grad);
    } else {
        const auto pi = params.pi();
        const auto cat_probs = flat_cat_probs(params);
        ComponentCache cache(params);
        std::vector<double> weights(params.K());
        const double inv_n = 1.0 / static_cast<double>(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            cache.log_scores(ds, i, weights);
            double lse = log_sum_exp(weights);
            for (double& w : weights) w = std::exp(w - lse) * inv_n;
            accumulate_row(params, pi, cat_probs, ds, i, weights, grad);
        }
    }
    if (penalty.lambda != 0.0) add_delta_gradient(params, ds, target, penalty.form, -penalty.lambda, grad);
    if (!grad.all_finite()) throw Error(ErrorCode::NonFinite, "gradient has a non-finite entry");
    return grad;
}

std::vector<double> finite_diff_gradient(std::span<const double> point,
                                         const std::function<double(std::span<const double>)>& objective,
                                         double step) {
    if (!(step > 0.0)) throw Error(ErrorCode::Precondition, "finite-difference step must be positive");
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        double up = objective(x);
        x[i] = orig - step;
        double down = objective(x);
        x[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

Gradient finite_diff_gradient(const ModelParams& params,
                              const std::function<double(const ModelParams&)>& objective, double step) {
    auto flat = finite_diff_gradient(
        pack(params), [&](std::span<const double> c) { return objective(unpack(params, c)); }, step);
    Gradient g = Gradient::zeros_like(params);
    std::size_t pos = 0;
    auto take = [&](std::span<double> dst) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), dst.size(), dst.begin());
        pos += dst.size();
    };
    take(g.d_eta);
    take(g.d_means.data());
    take(g.d_scale);
    take(g.d_cat_logits);
    return g;
}

double delta_tie_margin(const ModelParams& params, const Dataset& ds, const FairnessTarget& target) {
    Responsibilities psi = responsibilities(ds, params, target.rows);
    MatrixD means = group_means(psi.psi, target.groups);
    const std::size_t m = means.rows();
    const double pair_scale = m == 2 ? 1.0 : 2.0 / static_cast<double>(m * (m - 1));
    std::vector<double> values(means.cols());
    for (std::size_t k = 0; k < means.cols(); ++k) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t t = s + 1; t < m; ++t) acc += std::abs(means(s, k) - means(t, k));
        values[k] = pair_scale * acc;
    }
    auto best = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
    double margin = std::numeric_limits<double>::infinity();
    // With two clusters psi_1 = 1 - psi_0, so both clusters always carry the
    // same value and the argmax is a permanent, harmless tie.
    if (values.size() > 2)
        for (std::size_t k = 0; k < values.size(); ++k)
            if (k != best) margin = std::min(margin, values[best] - values[k]);
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t t = s + 1; t < m; ++t)
            margin = std::min(margin, std::abs(means(s, best) - means(t, best)));
    return margin;
}

} // namespace fmc
