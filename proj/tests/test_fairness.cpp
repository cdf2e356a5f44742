#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "fmc/fairness.hpp"

using namespace fmc;
using namespace fmc::testing;

namespace {

Responsibilities make_psi(std::vector<std::vector<double>> rows) {
    MatrixD m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
    return {m};
}

// Direct transcription: for every k and every ordered group pair, the
// absolute difference of group means, averaged over unordered pairs.
double brute_delta(const MatrixD& psi, const std::vector<int>& labels, std::size_t m) {
    double best = 0.0;
    for (std::size_t k = 0; k < psi.cols(); ++k) {
        std::vector<double> sum(m, 0.0);
        std::vector<double> cnt(m, 0.0);
        for (std::size_t i = 0; i < psi.rows(); ++i) {
            sum[static_cast<std::size_t>(labels[i])] += psi(i, k);
            cnt[static_cast<std::size_t>(labels[i])] += 1.0;
        }
        double acc = 0.0;
        double pairs = 0.0;
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t t = 0; t < m; ++t) {
                if (s == t) continue;
                acc += std::abs(sum[s] / cnt[s] - sum[t] / cnt[t]);
                pairs += 1.0;
            }
        best = std::max(best, acc / pairs);
    }
    return best;
}

} // namespace

TEST_CASE("binary delta on a hand-computed example") {
    // Group 0 rows: (0.9, 0.1), (0.7, 0.3) -> mean (0.8, 0.2)
    // Group 1 rows: (0.2, 0.8), (0.4, 0.6) -> mean (0.3, 0.7)
    auto psi = make_psi({{0.9, 0.1}, {0.2, 0.8}, {0.7, 0.3}, {0.4, 0.6}});
    std::vector<int> labels{0, 1, 0, 1};
    auto groups = GroupIndex::from_labels(labels, 2);
    auto d = soft_delta(psi, groups);
    CHECK(d.value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(d.argmax_k == 0);
}

TEST_CASE("delta picks the cluster with the widest gap") {
    auto psi = make_psi({{0.5, 0.1, 0.4}, {0.5, 0.5, 0.0}});
    // Gaps: k0 = 0, k1 = 0.4, k2 = 0.4; the first maximizer wins.
    auto d = soft_delta(psi, GroupIndex::from_labels(std::vector<int>{0, 1}, 2));
    CHECK(d.value == doctest::Approx(0.4));
    CHECK(d.argmax_k == 1);
}

TEST_CASE("identical group means give zero delta") {
    auto psi = make_psi({{0.3, 0.7}, {0.6, 0.4}, {0.6, 0.4}, {0.3, 0.7}});
    auto d = soft_delta(psi, GroupIndex::from_labels(std::vector<int>{0, 0, 1, 1}, 2));
    CHECK(d.value == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("delta agrees with a brute-force transcription") {
    Rng rng = make_stream(21, "test");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t m : {2u, 3u, 4u}) {
        for (int rep = 0; rep < 10; ++rep) {
            const std::size_t n = 30, k = 4;
            MatrixD psi(n, k);
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t c = 0; c < k; ++c) s += psi(i, c) = u(rng);
                for (std::size_t c = 0; c < k; ++c) psi(i, c) /= s;
            }
            std::vector<int> labels(n);
            for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % m);
            std::shuffle(labels.begin(), labels.end(), rng);
            auto groups = GroupIndex::from_labels(labels, m);
            double got = fairness_delta({psi}, groups).value;
            CHECK(std::abs(got - brute_delta(psi, labels, m)) < 1e-14);
        }
    }
}

TEST_CASE("three-group delta on a hand-computed example") {
    // Group means for cluster 0: 0.9, 0.5, 0.3.
    // Pairwise gaps 0.4, 0.6, 0.2 average to 0.4.
    auto psi = make_psi({{0.9, 0.1}, {0.5, 0.5}, {0.3, 0.7}});
    auto groups = GroupIndex::from_labels(std::vector<int>{0, 1, 2}, 3);
    auto d = soft_delta_multinary(psi, groups);
    CHECK(d.value == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("multinary delta reduces to binary delta for two groups") {
    Rng rng = make_stream(22, "test");
    Dataset ds = random_dataset(rng, 40, 2, {}, 2);
    ModelParams p = random_params(rng, Structure::GaussianIso, 3, 2, {});
    auto psi = responsibilities(ds, p);
    auto g = GroupIndex::from_dataset(ds);
    CHECK(soft_delta_multinary(psi, g).value == soft_delta(psi, g).value);
    CHECK(fairness_delta(psi, g).value == soft_delta(psi, g).value);
}

TEST_CASE("degenerate groups are rejected") {
    auto psi = make_psi({{0.5, 0.5}, {0.5, 0.5}});
    CHECK(error_code([&] { soft_delta(psi, GroupIndex::from_labels(std::vector<int>{0, 0}, 2)); }) ==
          ErrorCode::GroupDegenerate);
    CHECK(error_code([&] { soft_delta(psi, GroupIndex::from_labels(std::vector<int>{0, 0}, 1)); }) ==
          ErrorCode::GroupDegenerate);
    CHECK(error_code([&] { soft_delta(psi, GroupIndex::from_labels(std::vector<int>{0, 1}, 3)); }) ==
          ErrorCode::GroupDegenerate);
}

TEST_CASE("hard gap equals soft delta on one-hot responsibilities") {
    Rng rng = make_stream(23, "test");
    std::uniform_int_distribution<int> pick(0, 2);
    for (std::size_t m : {2u, 3u}) {
        const std::size_t n = 50;
        std::vector<int> labels(n);
        std::vector<int> groups_l(n);
        MatrixD psi(n, 3);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = pick(rng);
            groups_l[i] = static_cast<int>(i % m);
            psi(i, static_cast<std::size_t>(labels[i])) = 1.0;
        }
        auto groups = GroupIndex::from_labels(groups_l, m);
        CHECK(hard_gap(labels, groups, 3) == doctest::Approx(fairness_delta({psi}, groups).value).epsilon(1e-15));
    }
}

TEST_CASE("additive gap sums per-cluster gaps") {
    // Group 0: clusters {0, 0, 1, 1}; group 1: clusters {0, 1, 1, 1}.
    std::vector<int> labels{0, 0, 0, 1, 1, 1, 1, 1};
    std::vector<int> g{0, 0, 1, 0, 0, 1, 1, 1};
    auto groups = GroupIndex::from_labels(g, 2);
    CHECK(hard_gap(labels, groups, 2) == doctest::Approx(0.25));
    CHECK(additive_gap(labels, groups, 2) == doctest::Approx(0.5));
}

TEST_CASE("balance examples") {
    auto groups = GroupIndex::from_labels(std::vector<int>{0, 1, 0, 1}, 2);
    CHECK(balance(std::vector<int>{0, 0, 1, 1}, groups, 2) == doctest::Approx(1.0));
    CHECK(balance(std::vector<int>{0, 1, 0, 1}, groups, 2) == doctest::Approx(0.0));

    auto six = GroupIndex::from_labels(std::vector<int>{0, 0, 1, 0, 1, 1}, 2);
    // Cluster 0 holds two of group 0 and one of group 1; cluster 1 the reverse.
    CHECK(balance(std::vector<int>{0, 0, 0, 1, 1, 1}, six, 2) == doctest::Approx(0.5));
    // An empty cluster is skipped.
    CHECK(balance(std::vector<int>{0, 0, 0, 0}, groups, 3) == doctest::Approx(1.0));
}

TEST_CASE("identity subsample reproduces the full-data delta") {
    Rng rng = make_stream(24, "test");
    Dataset ds = random_dataset(rng, 60, 2, {3}, 3);
    ModelParams p = random_params(rng, Structure::Mixed, 3, 2, {3});
    auto full = fairness_delta(responsibilities(ds, p), GroupIndex::from_dataset(ds));
    auto sub = subsampled_delta(p, identity_subsample(ds), ds);
    CHECK(sub.value == full.value);
    CHECK(sub.argmax_k == full.argmax_k);
}

TEST_CASE("duplicated subsample rows count with multiplicity") {
    Rng rng = make_stream(25, "test");
    Dataset ds = random_dataset(rng, 10, 1, {}, 2);
    ModelParams p = random_params(rng, Structure::GaussianIso, 2, 1, {});
    SubSample sub;
    sub.indices = {0, 0, 0, 1, 2, 3};
    sub.group_counts = {4, 2};
    std::vector<std::size_t> rows = sub.indices;
    Dataset expanded = select_rows(ds, rows);
    auto expected = fairness_delta(responsibilities(expanded, p), GroupIndex::from_dataset(expanded));
    CHECK(subsampled_delta(p, sub, ds).value == doctest::Approx(expected.value).epsilon(1e-15));
}
