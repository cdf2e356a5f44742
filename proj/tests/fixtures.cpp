#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>
#include <map>
#include <random>

namespace fmc::testing {

Dataset biased_fixture(std::size_t n, std::uint64_t seed, double separation, std::vector<double> bias) {
    SyntheticSpec spec;
    spec.weights = {0.5, 0.5};
    spec.centers = {{-separation / 2.0, 0.0}, {separation / 2.0, 0.0}};
    spec.scales = {{1.0}, {1.0}};
    spec.group_probs = {{bias[0], 1.0 - bias[0]}, {bias[1], 1.0 - bias[1]}};
    spec.n = n;
    spec.seed = seed;
    return make_synthetic_mixture(spec);
}

Dataset categorical_fixture(std::size_t n, std::uint64_t seed, std::size_t features, std::size_t cardinality) {
    SyntheticSpec spec;
    spec.weights = {0.5, 0.5};
    spec.group_probs = {{0.8, 0.2}, {0.2, 0.8}};
    spec.cardinalities.assign(features, cardinality);
    spec.cat_tables.resize(2);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t j = 0; j < features; ++j) {
            std::vector<double> table(cardinality, 0.1 / static_cast<double>(cardinality - 1));
            // Component 0 favours level j mod c, component 1 the level after it.
            table[(j + k) % cardinality] = 0.9;
            spec.cat_tables[k].push_back(table);
        }
    spec.n = n;
    spec.seed = seed;
    return make_synthetic_mixture(spec);
}

Dataset three_group_fixture(std::size_t n, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    spec.centers = {{-2.0, 0.0}, {2.0, 0.0}, {0.0, 3.0}};
    spec.scales = {{1.0}, {1.0}, {1.0}};
    spec.group_probs = {{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}};
    spec.n = n;
    spec.seed = seed;
    return make_synthetic_mixture(spec);
}

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t d, std::vector<std::size_t> cards, std::size_t m) {
    Dataset ds;
    std::normal_distribution<double> normal(0.0, 2.0);
    std::vector<double> x(d);
    std::vector<int> c(cards.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (double& v : x) v = normal(rng);
        for (std::size_t j = 0; j < cards.size(); ++j)
            c[j] = std::uniform_int_distribution<int>(0, static_cast<int>(cards[j]) - 1)(rng);
        ds.cont.append_row(x);
        ds.cate.append_row(c);
        // Round-robin first so that every group is present.
        ds.sensitive.push_back(i < m ? static_cast<int>(i)
                                     : std::uniform_int_distribution<int>(0, static_cast<int>(m) - 1)(rng));
    }
    if (d == 0) ds.cont = MatrixD(n, 0);
    if (cards.empty()) ds.cate = MatrixI(n, 0);
    ds.cardinalities = cards;
    ds.num_groups = m;
    for (std::size_t j = 0; j < d; ++j) ds.cont_names.push_back("x" + std::to_string(j + 1));
    for (std::size_t j = 0; j < cards.size(); ++j) {
        ds.cate_names.push_back("c" + std::to_string(j + 1));
        std::vector<std::string> levels;
        for (std::size_t v = 0; v < cards[j]; ++v) levels.push_back("v" + std::to_string(v + 1));
        ds.cate_levels.push_back(levels);
    }
    for (std::size_t s = 0; s < m; ++s) ds.group_levels.push_back("g" + std::to_string(s + 1));
    return ds;
}

ModelParams random_params(Rng& rng, Structure s, std::size_t k, std::size_t d, std::vector<std::size_t> cards) {
    ModelParams p = ModelParams::zeros(s, k, has_gaussian(s) ? d : 0,
                                       has_categorical(s) ? cards : std::vector<std::size_t>{});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.5, 2.0);
    for (double& v : p.eta) v = normal(rng);
    for (double& v : p.means.data()) v = 2.0 * normal(rng);
    for (double& v : p.scale) v = unif(rng);
    for (double& v : p.cat_logits) v = normal(rng);
    return p;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, v] : joint) index += c2(v);
    for (const auto& [key, v] : ra) sa += c2(v);
    for (const auto& [key, v] : rb) sb += c2(v);
    double expected = sa * sb / c2(static_cast<double>(a.size()));
    double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

std::string temp_path(const std::string& name) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() / ("fmc_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return (dir / (std::to_string(counter++) + "_" + name)).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

} // namespace fmc::testing
