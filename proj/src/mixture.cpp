#include "fmc/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "fmc/error.hpp"

namespace fmc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112; // log(2 pi)

void softmax_into(std::span<const double> logits, std::span<double> out) {
    double lse = log_sum_exp(logits);
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - lse);
}

} // namespace

std::string to_string(Structure s) {
    switch (s) {
    case Structure::GaussianIso: return "iso";
    case Structure::GaussianDiag: return "diag";
    case Structure::Multinoulli: return "multinoulli";
    case Structure::Mixed: return "mixed";
    }
    return "iso";
}

Structure structure_from_string(const std::string& s) {
    if (s == "iso" || s == "gaussian-iso") return Structure::GaussianIso;
    if (s == "diag" || s == "gaussian-diag") return Structure::GaussianDiag;
    if (s == "multinoulli") return Structure::Multinoulli;
    if (s == "mixed") return Structure::Mixed;
    throw Error(ErrorCode::Config, "unknown structure '" + s + "'");
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) return -std::numeric_limits<double>::infinity();
    double mx = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(mx)) return mx;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - mx);
    return mx + std::log(sum);
}

std::size_t ModelParams::cat_width() const noexcept {
    return std::accumulate(cardinalities.begin(), cardinalities.end(), std::size_t{0});
}

std::size_t ModelParams::cat_offset(std::size_t j) const {
    return std::accumulate(cardinalities.begin(), cardinalities.begin() + static_cast<std::ptrdiff_t>(j),
                           std::size_t{0});
}

std::vector<double> ModelParams::pi() const {
    std::vector<double> out(eta.size());
    softmax_into(eta, out);
    return out;
}

std::vector<double> ModelParams::cat_probs(std::size_t k, std::size_t j) const {
    std::size_t begin = k * cat_width() + cat_offset(j);
    std::vector<double> out(cardinalities[j]);
    softmax_into(std::span<const double>(cat_logits).subspan(begin, cardinalities[j]), out);
    return out;
}

ModelParams ModelParams::zeros(Structure s, std::size_t k, std::size_t d_cont,
                               std::vector<std::size_t> cardinalities) {
    ModelParams p;
    p.structure = s;
    p.eta.assign(k, 0.0);
    p.means = MatrixD(k, has_gaussian(s) ? d_cont : 0);
    if (has_gaussian(s)) p.scale.assign(is_diagonal(s) ? k * d_cont : 1, 1.0);
    if (has_categorical(s)) {
        p.cardinalities = std::move(cardinalities);
        p.cat_logits.assign(k * p.cat_width(), 0.0);
    }
    return p;
}

void ModelParams::enforce_floors() {
    if (!eta.empty()) {
        double mx = *std::max_element(eta.begin(), eta.end());
        for (double& e : eta) e = std::max(e, mx - kLogitSpread);
    }
    for (double& s : scale) s = std::max(s, kScaleFloor);
    const std::size_t width = cat_width();
    for (std::size_t k = 0; k < K() && width > 0; ++k) {
        for (std::size_t j = 0; j < cardinalities.size(); ++j) {
            auto table = std::span<double>(cat_logits).subspan(k * width + cat_offset(j), cardinalities[j]);
            double mx = *std::max_element(table.begin(), table.end());
            // p_c >= exp(L_c - max) / l_j, so this bound keeps p_c >= kProbFloor.
            double lo = mx + std::log(kProbFloor * static_cast<double>(cardinalities[j]));
            for (double& v : table) v = std::max(v, lo);
        }
    }
}

void ModelParams::validate() const {
    const std::size_t k = K();
    if (k == 0) throw Error(ErrorCode::Precondition, "model has no components");
    if (means.rows() != k) throw Error(ErrorCode::Precondition, "means must have K rows");
    for (double e : eta)
        if (!std::isfinite(e)) throw Error(ErrorCode::NonFinite, "non-finite mixture logit");
    for (double m : means.data())
        if (!std::isfinite(m)) throw Error(ErrorCode::NonFinite, "non-finite component mean");
    if (has_gaussian(structure)) {
        std::size_t expected = is_diagonal(structure) ? k * d_cont() : 1;
        if (scale.size() != expected) throw Error(ErrorCode::Precondition, "scale has the wrong shape");
        for (double s : scale)
            if (!(s >= kScaleFloor) || !std::isfinite(s))
                throw Error(ErrorCode::Precondition, "scale below floor or non-finite");
    } else if (d_cont() != 0 || !scale.empty()) {
        throw Error(ErrorCode::Precondition, "multinoulli model carries Gaussian parameters");
    }
    if (has_categorical(structure)) {
        if (cat_logits.size() != k * cat_width())
            throw Error(ErrorCode::Precondition, "categorical logits have the wrong shape");
        for (double v : cat_logits)
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite categorical logit");
    } else if (!cat_logits.empty()) {
        throw Error(ErrorCode::Precondition, "Gaussian model carries categorical parameters");
    }
}

void ModelParams::check_compatible(const Dataset& ds) const {
    if (has_gaussian(structure) && ds.d_cont() != d_cont())
        throw Error(ErrorCode::Dim, "model expects " + std::to_string(d_cont()) +
                                        " continuous features, data has " + std::to_string(ds.d_cont()));
    if (has_gaussian(structure) && d_cont() == 0)
        throw Error(ErrorCode::Dim, "Gaussian structure needs at least one continuous feature");
    if (has_categorical(structure)) {
        if (ds.cardinalities != cardinalities)
            throw Error(ErrorCode::Dim, "categorical features do not match the model");
        if (cardinalities.empty())
            throw Error(ErrorCode::Dim, "categorical structure needs at least one categorical feature");
    }
}

ComponentCache::ComponentCache(const ModelParams& params) : params_(params) {
    const std::size_t k = params.K();
    const std::size_t d = params.d_cont();
    log_pi_.resize(k);
    double lse = log_sum_exp(params.eta);
    for (std::size_t c = 0; c < k; ++c) log_pi_[c] = params.eta[c] - lse;

    if (has_gaussian(params.structure)) {
        inv_var_.resize(params.scale.size());
        for (std::size_t i = 0; i < params.scale.size(); ++i)
            inv_var_[i] = 1.0 / (params.scale[i] * params.scale[i]);
        log_norm_.assign(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            double norm = -0.5 * static_cast<double>(d) * kLog2Pi;
            for (std::size_t j = 0; j < d; ++j) norm -= std::log(params.scale_of(c, j));
            log_norm_[c] = norm;
        }
    }
    if (has_categorical(params.structure)) {
        cat_log_.resize(params.cat_logits.size());
        const std::size_t width = params.cat_width();
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t j = 0; j < params.cardinalities.size(); ++j) {
                std::size_t begin = c * width + params.cat_offset(j);
                auto table = std::span<const double>(params.cat_logits).subspan(begin, params.cardinalities[j]);
                double lse_t = log_sum_exp(table);
                for (std::size_t v = 0; v < table.size(); ++v) cat_log_[begin + v] = table[v] - lse_t;
            }
    }
}

double ComponentCache::cat_log_prob(std::size_t k, std::size_t j, int c) const {
    return cat_log_[k * params_.cat_width() + params_.cat_offset(j) + static_cast<std::size_t>(c)];
}

double ComponentCache::log_density(std::span<const double> cont, std::span<const int> cate,
                                   std::size_t k) const {
    double value = 0.0;
    if (has_gaussian(params_.structure)) {
        const std::size_t d = params_.d_cont();
        auto mu = params_.means.row(k);
        double quad = 0.0;
        if (is_diagonal(params_.structure)) {
            for (std::size_t j = 0; j < d; ++j) {
                double diff = cont[j] - mu[j];
                quad += diff * diff * inv_var_[k * d + j];
            }
        } else {
            for (std::size_t j = 0; j < d; ++j) {
                double diff = cont[j] - mu[j];
                quad += diff * diff;
            }
            quad *= inv_var_[0];
        }
        value += log_norm_[k] - 0.5 * quad;
    }
    if (has_categorical(params_.structure)) {
        const std::size_t base = k * params_.cat_width();
        std::size_t offset = 0;
        for (std::size_t j = 0; j < params_.cardinalities.size(); ++j) {
            value += cat_log_[base + offset + static_cast<std::size_t>(cate[j])];
            offset += params_.cardinalities[j];
        }
    }
    return value;
}

double ComponentCache::log_density(const Dataset& ds, std::size_t row, std::size_t k) const {
    return log_density(ds.cont.row(row), ds.cate.row(row), k);
}

void ComponentCache::log_scores(const Dataset& ds, std::size_t row, std::span<double> out) const {
    for (std::size_t k = 0; k < log_pi_.size(); ++k) out[k] = log_pi_[k] + log_density(ds, row, k);
}

double log_component_density(std::span<const double> cont, std::span<const int> cate, std::size_t k,
                             const ModelParams& params) {
    return ComponentCache(params).log_density(cont, cate, k);
}

namespace {

// Normalizes log scores in place into probabilities; returns the row's
// log mixture density.
double normalize_row(std::span<double> scores) {
    double lse = log_sum_exp(scores);
    for (double& s : scores) s = std::exp(s - lse);
    return lse;
}

} // namespace

Responsibilities responsibilities(const Dataset& ds, const ModelParams& params,
                                  std::vector<double>* row_loglik) {
    params.check_compatible(ds);
    ComponentCache cache(params);
    Responsibilities r{MatrixD(ds.size(), params.K())};
    if (row_loglik) row_loglik->resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = r.psi.row(i);
        cache.log_scores(ds, i, row);
        double lse = normalize_row(row);
        if (row_loglik) (*row_loglik)[i] = lse;
    }
    return r;
}

Responsibilities responsibilities(const Dataset& ds, const ModelParams& params,
                                  std::span<const std::size_t> rows) {
    params.check_compatible(ds);
    ComponentCache cache(params);
    Responsibilities r{MatrixD(rows.size(), params.K())};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto row = r.psi.row(i);
        cache.log_scores(ds, rows[i], row);
        normalize_row(row);
    }
    return r;
}

std::vector<int> hard_assign(const Responsibilities& r) {
    std::vector<int> labels(r.rows());
    for (std::size_t i = 0; i < r.rows(); ++i) {
        auto row = r.psi.row(i);
        // max_element returns the first maximum, i.e. the lowest index on ties.
        labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return labels;
}

double log_likelihood(const Dataset& ds, const ModelParams& params) {
    std::vector<double> per_row;
    responsibilities(ds, params, &per_row);
    double total = 0.0;
    for (double v : per_row) total += v;
    return total;
}

SufficientStats::SufficientStats(std::size_t k, std::size_t d_cont, std::vector<std::size_t> cards)
    : K(k), d(d_cont), cardinalities(std::move(cards)), weight(k, 0.0), first(k, d_cont),
      second(k, d_cont) {
    counts.assign(k * std::accumulate(cardinalities.begin(), cardinalities.end(), std::size_t{0}), 0.0);
}

void SufficientStats::add_row(const Dataset& ds, std::size_t row, std::span<const double> r, double sign) {
    auto x = ds.cont.row(row);
    auto c = ds.cate.row(row);
    const std::size_t width = K ? counts.size() / K : 0;
    for (std::size_t k = 0; k < K; ++k) {
        double w = sign * r[k];
        weight[k] += w;
        for (std::size_t j = 0; j < d; ++j) {
            first(k, j) += w * x[j];
            second(k, j) += w * x[j] * x[j];
        }
        std::size_t offset = k * width;
        for (std::size_t j = 0; j < cardinalities.size(); ++j) {
            counts[offset + static_cast<std::size_t>(c[j])] += w;
            offset += cardinalities[j];
        }
    }
    rows += sign;
}

SufficientStats SufficientStats::from(const Dataset& ds, const Responsibilities& r) {
    SufficientStats stats(r.K(), ds.d_cont(), ds.cardinalities);
    for (std::size_t i = 0; i < ds.size(); ++i) stats.add_row(ds, i, r.psi.row(i));
    return stats;
}

double SufficientStats::q_value(const ModelParams& params) const {
    ComponentCache cache(params);
    const std::size_t dm = params.d_cont();
    double q = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        q += weight[k] * cache.log_pi(k);
        if (has_gaussian(params.structure)) {
            double quad = 0.0;
            double log_norm = -0.5 * static_cast<double>(dm) * kLog2Pi;
            for (std::size_t j = 0; j < dm; ++j) {
                double mu = params.means(k, j);
                double s = params.scale_of(k, j);
                double ss = second(k, j) - 2.0 * mu * first(k, j) + mu * mu * weight[k];
                quad += ss / (s * s);
                log_norm -= std::log(s);
            }
            q += weight[k] * log_norm - 0.5 * quad;
        }
        if (has_categorical(params.structure)) {
            const std::size_t width = params.cat_width();
            for (std::size_t j = 0; j < params.cardinalities.size(); ++j)
                for (std::size_t v = 0; v < params.cardinalities[j]; ++v) {
                    std::size_t idx = k * width + params.cat_offset(j) + v;
                    if (counts[idx] != 0.0)
                        q += counts[idx] * cache.cat_log_prob(k, j, static_cast<int>(v));
                }
        }
    }
    return q;
}

double q_function(const ModelParams& params, const ModelParams& params_t, const Dataset& ds) {
    params.check_compatible(ds);
    return SufficientStats::from(ds, responsibilities(ds, params_t)).q_value(params);
}

} // namespace fmc
