#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "fmc/objective.hpp"

using namespace fmc;
using namespace fmc::testing;

namespace {

const std::vector<Structure> kStructures{Structure::GaussianIso, Structure::GaussianDiag, Structure::Multinoulli,
                                         Structure::Mixed};

double max_rel_diff(const Gradient& a, const Gradient& b) {
    auto fa = a.flatten();
    auto fb = b.flatten();
    REQUIRE(fa.size() == fb.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) worst = std::max(worst, rel_err(fa[i], fb[i]));
    return worst;
}

} // namespace

TEST_CASE("finite differences are exact on a quadratic") {
    std::vector<double> a{1.0, -2.0, 0.5};
    std::vector<double> b{3.0, 0.0, -1.0};
    auto f = [&](std::span<const double> x) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) v += a[i] * x[i] * x[i] + b[i] * x[i];
        return v;
    };
    std::vector<double> x{0.3, -1.2, 2.0};
    auto g = finite_diff_gradient(x, f, 1e-3);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(g[i] == doctest::Approx(2.0 * a[i] * x[i] + b[i]).epsilon(1e-9));
    CHECK(error_code([&] { finite_diff_gradient(x, f, 0.0); }) == ErrorCode::Precondition);
}

TEST_CASE("pack and unpack are inverse") {
    Rng rng = make_stream(31, "test");
    for (Structure s : kStructures) {
        ModelParams p = random_params(rng, s, 3, 2, {3, 2});
        ModelParams q = unpack(p, pack(p));
        CHECK(q.eta == p.eta);
        CHECK(q.means.data() == p.means.data());
        for (std::size_t i = 0; i < p.scale.size(); ++i) CHECK(q.scale[i] == doctest::Approx(p.scale[i]).epsilon(1e-15));
        CHECK(q.cat_logits == p.cat_logits);
    }
}

TEST_CASE("penalty forms") {
    CHECK(Penalty{2.0, PenaltyForm::Abs}.apply(0.3) == doctest::Approx(0.6));
    CHECK(Penalty{2.0, PenaltyForm::Squared}.apply(0.3) == doctest::Approx(0.18));
    CHECK(penalty_form_from_string(to_string(PenaltyForm::Squared)) == PenaltyForm::Squared);
    CHECK(penalty_form_from_string(to_string(PenaltyForm::Abs)) == PenaltyForm::Abs);
    CHECK(error_code([] { penalty_form_from_string("cubic"); }) == ErrorCode::Config);
}

TEST_CASE("objectives compose from their parts") {
    Rng rng = make_stream(32, "test");
    Dataset ds = random_dataset(rng, 50, 2, {3}, 2);
    ModelParams p = random_params(rng, Structure::Mixed, 3, 2, {3});
    ModelParams pt = random_params(rng, Structure::Mixed, 3, 2, {3});
    auto target = FairnessTarget::full(ds);
    const double n = static_cast<double>(ds.size());
    double ll = log_likelihood(ds, p) / n;
    double delta = target.delta(ds, p).value;
    CHECK(delta == fairness_delta(responsibilities(ds, p), GroupIndex::from_dataset(ds)).value);

    CHECK(penalized_objective(p, ds, target, {0.0, PenaltyForm::Abs}) == doctest::Approx(ll).epsilon(1e-14));
    CHECK(penalized_objective(p, ds, target, {3.0, PenaltyForm::Abs}) ==
          doctest::Approx(ll - 3.0 * delta).epsilon(1e-14));
    CHECK(penalized_objective(p, ds, target, {3.0, PenaltyForm::Squared}) ==
          doctest::Approx(ll - 3.0 * delta * delta).epsilon(1e-14));

    double q = q_function(p, pt, ds) / n;
    CHECK(q_fair(p, pt, ds, target, {0.0, PenaltyForm::Abs}) == doctest::Approx(q).epsilon(1e-12));
    CHECK(q_fair(p, pt, ds, target, {2.0, PenaltyForm::Abs}) == doctest::Approx(q - 2.0 * delta).epsilon(1e-12));
}

TEST_CASE("log-likelihood gradient matches finite differences") {
    Rng rng = make_stream(33, "test");
    for (Structure s : kStructures) {
        for (int rep = 0; rep < 3; ++rep) {
            Dataset ds = random_dataset(rng, 25, 2, {3, 2}, 2);
            ModelParams p = random_params(rng, s, 3, 2, {3, 2});
            auto target = FairnessTarget::full(ds);
            Penalty none{0.0, PenaltyForm::Abs};
            auto analytic = grad_penalized(p, ds, target, none);
            auto numeric = finite_diff_gradient(
                p, [&](const ModelParams& q) { return penalized_objective(q, ds, target, none); }, 1e-5);
            CHECK(max_rel_diff(analytic, numeric) < 1e-6);
        }
    }
}

TEST_CASE("mixture-logit gradient sums to zero") {
    Rng rng = make_stream(34, "test");
    for (Structure s : kStructures) {
        Dataset ds = random_dataset(rng, 30, 2, {3}, 2);
        ModelParams p = random_params(rng, s, 4, 2, {3});
        auto target = FairnessTarget::full(ds);
        for (double lambda : {0.0, 5.0}) {
            auto g = grad_penalized(p, ds, target, {lambda, PenaltyForm::Abs});
            double total = std::accumulate(g.d_eta.begin(), g.d_eta.end(), 0.0);
            CHECK(std::abs(total) < 1e-12);
        }
    }
}

TEST_CASE("delta gradient matches finite differences away from ties") {
    Rng rng = make_stream(35, "test");
    int checked = 0;
    for (Structure s : kStructures) {
        for (std::size_t m : {2u, 3u}) {
            for (int rep = 0; rep < 4; ++rep) {
                Dataset ds = random_dataset(rng, 30, 2, {3}, m);
                ModelParams p = random_params(rng, s, 3, 2, {3});
                auto target = FairnessTarget::full(ds);
                if (delta_tie_margin(p, ds, target) < 1e-3) continue;
                for (PenaltyForm form : {PenaltyForm::Abs, PenaltyForm::Squared}) {
                    auto analytic = grad_delta(p, ds, target, form);
                    auto numeric = finite_diff_gradient(
                        p,
                        [&](const ModelParams& q) {
                            double d = target.delta(ds, q).value;
                            return form == PenaltyForm::Squared ? d * d : d;
                        },
                        1e-6);
                    CHECK(max_rel_diff(analytic, numeric) < 1e-6);
                }
                ++checked;
            }
        }
    }
    CHECK(checked >= 16);
}

TEST_CASE("penalized gradient matches finite differences") {
    Rng rng = make_stream(36, "test");
    int checked = 0;
    for (Structure s : kStructures) {
        for (int rep = 0; rep < 4; ++rep) {
            Dataset ds = random_dataset(rng, 30, 2, {2, 4}, 2);
            ModelParams p = random_params(rng, s, 2, 2, {2, 4});
            auto target = FairnessTarget::full(ds);
            if (delta_tie_margin(p, ds, target) < 1e-3) continue;
            Penalty pen{4.0, rep % 2 ? PenaltyForm::Squared : PenaltyForm::Abs};
            auto analytic = grad_penalized(p, ds, target, pen);
            auto numeric = finite_diff_gradient(
                p, [&](const ModelParams& q) { return penalized_objective(q, ds, target, pen); }, 1e-6);
            CHECK(max_rel_diff(analytic, numeric) < 1e-6);
            ++checked;
        }
    }
    CHECK(checked >= 12);
}

TEST_CASE("surrogate gradient matches finite differences") {
    Rng rng = make_stream(37, "test");
    for (Structure s : kStructures) {
        Dataset ds = random_dataset(rng, 30, 2, {3}, 2);
        ModelParams p = random_params(rng, s, 3, 2, {3});
        ModelParams pt = random_params(rng, s, 3, 2, {3});
        auto target = FairnessTarget::full(ds);
        if (delta_tie_margin(p, ds, target) < 1e-3) continue;
        auto stats = SufficientStats::from(ds, responsibilities(ds, pt));
        Penalty pen{2.0, PenaltyForm::Abs};
        auto analytic = grad_penalized(p, ds, target, pen, &stats);
        auto numeric = finite_diff_gradient(
            p, [&](const ModelParams& q) { return q_fair(q, stats, ds, target, pen); }, 1e-6);
        CHECK(max_rel_diff(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("surrogate and likelihood gradients coincide at the expansion point") {
    Rng rng = make_stream(38, "test");
    for (Structure s : kStructures) {
        Dataset ds = random_dataset(rng, 40, 2, {3}, 2);
        ModelParams p = random_params(rng, s, 3, 2, {3});
        auto target = FairnessTarget::full(ds);
        auto stats = SufficientStats::from(ds, responsibilities(ds, p));
        Penalty pen{1.5, PenaltyForm::Abs};
        auto direct = grad_penalized(p, ds, target, pen);
        auto surrogate = grad_penalized(p, ds, target, pen, &stats);
        CHECK(max_rel_diff(direct, surrogate) < 1e-10);
    }
}

TEST_CASE("subsampled target uses only its rows") {
    Rng rng = make_stream(39, "test");
    Dataset ds = random_dataset(rng, 40, 2, {}, 2);
    ModelParams p = random_params(rng, Structure::GaussianIso, 2, 2, {});
    Rng draw = make_stream(39, "subsample");
    SubSample sub = subsample(ds, 15, draw);
    auto target = FairnessTarget::from_subsample(ds, sub);
    CHECK(target.rows == sub.indices);
    CHECK(target.delta(ds, p).value == subsampled_delta(p, sub, ds).value);

    auto identity = FairnessTarget::from_subsample(ds, identity_subsample(ds));
    CHECK(identity.delta(ds, p).value == FairnessTarget::full(ds).delta(ds, p).value);
}

TEST_CASE("a zero step leaves parameters unchanged") {
    Rng rng = make_stream(40, "test");
    Dataset ds = random_dataset(rng, 20, 2, {3}, 2);
    ModelParams p = random_params(rng, Structure::Mixed, 2, 2, {3});
    auto g = grad_penalized(p, ds, FairnessTarget::full(ds), {1.0, PenaltyForm::Abs});
    CHECK(g.all_finite());
    CHECK(g.norm() > 0.0);
    ModelParams q = ascent_step(p, g, 0.0);
    CHECK(q.eta == p.eta);
    CHECK(q.means.data() == p.means.data());
    CHECK(q.scale == p.scale);
    CHECK(q.cat_logits == p.cat_logits);
}

TEST_CASE("a small ascent step increases the penalized objective") {
    Rng rng = make_stream(41, "test");
    Dataset ds = random_dataset(rng, 60, 2, {}, 2);
    ModelParams p = random_params(rng, Structure::GaussianDiag, 3, 2, {});
    auto target = FairnessTarget::full(ds);
    Penalty pen{1.0, PenaltyForm::Squared};
    auto g = grad_penalized(p, ds, target, pen);
    double before = penalized_objective(p, ds, target, pen);
    double after = penalized_objective(ascent_step(p, g, 1e-4), ds, target, pen);
    CHECK(after > before);
}
