#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fmc/data.hpp"
#include "fmc/matrix.hpp"

namespace fmc {

enum class Structure { GaussianIso, GaussianDiag, Multinoulli, Mixed };

std::string to_string(Structure s);
Structure structure_from_string(const std::string& s);

inline bool has_gaussian(Structure s) { return s != Structure::Multinoulli; }
inline bool has_categorical(Structure s) { return s == Structure::Multinoulli || s == Structure::Mixed; }
// Mixed pairs an isotropic Gaussian block with the categorical block.
inline bool is_diagonal(Structure s) { return s == Structure::GaussianDiag; }

inline constexpr double kScaleFloor = 1e-4;
inline constexpr double kProbFloor = 1e-8;
// Largest allowed gap between the biggest and smallest mixture logit, so
// that every pi_k stays representable and strictly positive.
inline constexpr double kLogitSpread = 700.0;

// Mixture parameters. Weights and categorical tables are stored as logits
// and materialized through softmax; the Gaussian block stores scales
// (one shared sigma for isotropic models, K x d otherwise).
struct ModelParams {
    Structure structure = Structure::GaussianIso;
    std::vector<double> eta;
    MatrixD means;
    std::vector<double> scale;
    std::vector<std::size_t> cardinalities;
    // Flattened K x sum(cardinalities); table (k, j) starts at
    // k * cat_width() + cat_offset(j).
    std::vector<double> cat_logits;

    std::size_t K() const noexcept { return eta.size(); }
    std::size_t d_cont() const noexcept { return means.cols(); }
    std::size_t cat_width() const noexcept;
    std::size_t cat_offset(std::size_t j) const;

    std::vector<double> pi() const;
    double sigma() const { return scale.at(0); }
    double scale_of(std::size_t k, std::size_t j) const {
        return is_diagonal(structure) ? scale[k * d_cont() + j] : scale[0];
    }
    std::vector<double> cat_probs(std::size_t k, std::size_t j) const;

    // Fresh parameters with the right shapes: eta = 0, means = 0, scale = 1,
    // categorical logits = 0.
    static ModelParams zeros(Structure s, std::size_t k, std::size_t d_cont,
                             std::vector<std::size_t> cardinalities);

    // Clamps scales to kScaleFloor, categorical probabilities to kProbFloor
    // and the logit spread to kLogitSpread.
    void enforce_floors();

    // Throws Error(Precondition) on shape or floor violations.
    void validate() const;
    void check_compatible(const Dataset& ds) const;
};

// Per-call cache of log pi, scale terms and categorical log tables.
class ComponentCache {
public:
    explicit ComponentCache(const ModelParams& params);

    double log_pi(std::size_t k) const { return log_pi_[k]; }
    double log_density(const Dataset& ds, std::size_t row, std::size_t k) const;
    double log_density(std::span<const double> cont, std::span<const int> cate, std::size_t k) const;
    // log pi_k + log f(x; theta_k) for every k, written into `out`.
    void log_scores(const Dataset& ds, std::size_t row, std::span<double> out) const;
    const ModelParams& params() const { return params_; }
    double cat_log_prob(std::size_t k, std::size_t j, int c) const;

private:
    const ModelParams& params_;
    std::vector<double> log_pi_;
    std::vector<double> inv_var_;      // 1 / scale^2, same layout as scale
    std::vector<double> log_norm_;     // per component Gaussian normalizer
    std::vector<double> cat_log_;      // same layout as cat_logits
};

double log_component_density(std::span<const double> cont, std::span<const int> cate, std::size_t k,
                             const ModelParams& params);

double log_sum_exp(std::span<const double> values);

// N x K row-stochastic soft assignments.
struct Responsibilities {
    MatrixD psi;
    std::size_t rows() const noexcept { return psi.rows(); }
    std::size_t K() const noexcept { return psi.cols(); }
};

// Posterior P(Z = k | x) via max-shifted log-sum-exp. With `row_loglik`
// given, the per-row log mixture density is written there as well.
Responsibilities responsibilities(const Dataset& ds, const ModelParams& params,
                                  std::vector<double>* row_loglik = nullptr);
// Restricted to `rows` (duplicates allowed), in that order.
Responsibilities responsibilities(const Dataset& ds, const ModelParams& params,
                                  std::span<const std::size_t> rows);

// Row argmax; ties go to the lowest index.
std::vector<int> hard_assign(const Responsibilities& r);

double log_likelihood(const Dataset& ds, const ModelParams& params);

// Sufficient statistics of frozen responsibilities. Q(theta | theta_t) and
// its gradient depend on the data only through these sums, which is what
// lets the mini-batch variant refresh a few rows at a time.
struct SufficientStats {
    std::size_t K = 0;
    std::size_t d = 0;
    std::vector<std::size_t> cardinalities;
    std::vector<double> weight;     // sum_i r_ik
    MatrixD first;                  // sum_i r_ik x_i
    MatrixD second;                 // sum_i r_ik x_i^2 (coordinate-wise)
    std::vector<double> counts;     // sum_i r_ik [x_ij = c], cat_logits layout
    double rows = 0.0;              // sum_i 1

    SufficientStats() = default;
    SufficientStats(std::size_t k, std::size_t d_cont, std::vector<std::size_t> cards);

    // Adds sign * r_i. sign = -1 removes a previously added row.
    void add_row(const Dataset& ds, std::size_t row, std::span<const double> r, double sign = 1.0);

    static SufficientStats from(const Dataset& ds, const Responsibilities& r);

    // sum_i sum_k r_ik [log pi_k + log f(x_i; theta_k)].
    double q_value(const ModelParams& params) const;
};

// Expected complete-data log-likelihood with responsibilities frozen at params_t.
double q_function(const ModelParams& params, const ModelParams& params_t, const Dataset& ds);

} // namespace fmc
