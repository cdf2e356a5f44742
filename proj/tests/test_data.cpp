#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "fmc/data.hpp"
#include "fmc/error.hpp"
#include "fmc/rng.hpp"

using namespace fmc;
using namespace fmc::testing;

namespace {

std::string csv_file(const std::string& text) {
    auto path = temp_path("data.csv");
    write_file(path, text);
    return path;
}

double column_mean(const Dataset& ds, std::size_t j) {
    double s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) s += ds.cont(i, j);
    return s / static_cast<double>(ds.size());
}

double column_pop_std(const Dataset& ds, std::size_t j) {
    double m = column_mean(ds, j), s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) s += (ds.cont(i, j) - m) * (ds.cont(i, j) - m);
    return std::sqrt(s / static_cast<double>(ds.size()));
}

} // namespace

TEST_CASE("schema parsing round-trips and rejects unknown roles") {
    auto schema = CsvSchema::parse("age:cont, sex:sensitive,work:cat,id:ignore");
    CHECK(schema.columns.size() == 4);
    CHECK(schema.to_string() == "age:cont,sex:sensitive,work:cat,id:ignore");
    CHECK(schema.role_of("work") == ColumnRole::Categorical);
    CHECK_FALSE(schema.role_of("nope").has_value());
    CHECK(error_code([] { CsvSchema::parse("age:number"); }) == ErrorCode::Schema);
    CHECK(error_code([] { CsvSchema::parse("age"); }) == ErrorCode::Schema);
}

TEST_CASE("load_csv parses a small file") {
    auto path = csv_file("age,sex\n30,m\n41,f\n25,m\n");
    Dataset ds = load_csv(path, CsvSchema::parse("age:cont,sex:sensitive"));
    CHECK(ds.size() == 3);
    CHECK(ds.d_cont() == 1);
    CHECK(ds.num_groups == 2);
    CHECK(ds.cont(1, 0) == 41.0);
    CHECK(ds.sensitive == std::vector<int>{0, 1, 0});
    CHECK(ds.group_levels == std::vector<std::string>{"m", "f"});
    CHECK(ds.group_sizes() == std::vector<std::size_t>{2, 1});
}

TEST_CASE("categorical levels are coded in order of first appearance") {
    auto path = csv_file("x,c,g,junk\n1,red,a,z\n2,blue,b,z\n3,red,a,z\n4,green,b,z\n");
    Dataset ds = load_csv(path, CsvSchema::parse("x:cont,c:cat,g:sensitive"));
    CHECK(ds.cardinalities == std::vector<std::size_t>{3});
    CHECK(ds.cate_levels[0] == std::vector<std::string>{"red", "blue", "green"});
    CHECK(ds.cate(0, 0) == 0);
    CHECK(ds.cate(1, 0) == 1);
    CHECK(ds.cate(2, 0) == 0);
    CHECK(ds.cate(3, 0) == 2);
}

TEST_CASE("load_csv reports malformed input with specific codes") {
    auto schema = CsvSchema::parse("age:cont,sex:sensitive");
    CHECK(error_code([&] { load_csv("/nonexistent/file.csv", schema); }) == ErrorCode::Io);
    CHECK(error_code([&] { load_csv(csv_file("age,sex\n30,m\nabc,f\n"), schema); }) == ErrorCode::Parse);
    CHECK(error_code([&] { load_csv(csv_file("age,sex\n30,m\n40\n"), schema); }) == ErrorCode::Parse);
    CHECK(error_code([&] { load_csv(csv_file("age,sex\n30,m\n40,m\n"), schema); }) == ErrorCode::GroupDegenerate);
    CHECK(error_code([&] { load_csv(csv_file("age,sex\n"), schema); }) == ErrorCode::Empty);
    CHECK(error_code([&] { load_csv(csv_file("age,gender\n1,m\n2,f\n"), schema); }) == ErrorCode::Schema);
    CHECK(error_code([&] { load_csv(csv_file("a,b\n1,2\n"), CsvSchema::parse("a:cont,b:cont")); }) ==
          ErrorCode::Schema);
}

TEST_CASE("quoted fields keep embedded commas") {
    auto path = csv_file("x,\"c\",g\n1,\"a,b\",u\n2,plain,v\n");
    Dataset ds = load_csv(path, CsvSchema::parse("x:cont,c:cat,g:sensitive"));
    CHECK(ds.cate_levels[0][0] == "a,b");
}

TEST_CASE("write_csv then load_csv round-trips values and encodings") {
    auto path = csv_file("x,y,c,g\n1.5,-2,red,a\n0.1,3e-7,blue,b\n2,0,red,a\n");
    auto schema = CsvSchema::parse("x:cont,y:cont,c:cat,g:sensitive");
    Dataset ds = load_csv(path, schema);
    auto out = temp_path("roundtrip.csv");
    write_csv(out, ds);
    Dataset back = load_csv(out, schema);
    CHECK(back.cont == ds.cont);
    CHECK(back.cate == ds.cate);
    CHECK(back.sensitive == ds.sensitive);
    CHECK(back.cate_levels == ds.cate_levels);
}

TEST_CASE("load_csv_like reuses dictionaries and checks the layout") {
    auto schema = CsvSchema::parse("x:cont,c:cat,g:sensitive");
    Dataset train = load_csv(csv_file("x,c,g\n1,red,a\n2,blue,b\n"), schema);
    Dataset other = load_csv_like(csv_file("x,c,g\n5,blue,b\n6,red,a\n"), train, true);
    CHECK(other.cate(0, 0) == 1);
    CHECK(other.sensitive == std::vector<int>{1, 0});
    Dataset unlabeled = load_csv_like(csv_file("x,c\n5,blue\n"), train, false);
    CHECK(unlabeled.size() == 1);
    CHECK(error_code([&] { load_csv_like(csv_file("x,c,g\n5,green,a\n"), train, true); }) == ErrorCode::Schema);
    CHECK(error_code([&] { load_csv_like(csv_file("x,c,g,extra\n5,red,a,1\n"), train, true); }) == ErrorCode::Dim);
}

TEST_CASE("standardize uses the population standard deviation") {
    auto path = csv_file("x,k,g\n1,5,a\n2,5,b\n3,5,a\n");
    Dataset ds = standardize(load_csv(path, CsvSchema::parse("x:cont,k:cont,g:sensitive")));
    // (1,2,3) has mean 2 and population std sqrt(2/3).
    const double s = std::sqrt(2.0 / 3.0);
    CHECK(ds.cont(0, 0) == doctest::Approx(-1.0 / s).epsilon(1e-14));
    CHECK(ds.cont(1, 0) == doctest::Approx(0.0));
    CHECK(ds.cont(2, 0) == doctest::Approx(1.0 / s).epsilon(1e-14));
    // A constant column becomes zeros.
    for (std::size_t i = 0; i < 3; ++i) CHECK(ds.cont(i, 1) == 0.0);
    CHECK(ds.preprocess.standardized);
}

TEST_CASE("standardize is idempotent on random data") {
    Rng rng = make_stream(1, "test");
    Dataset ds = standardize(random_dataset(rng, 200, 3, {}, 2));
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::abs(column_mean(ds, j)) < 1e-9);
        CHECK(std::abs(column_pop_std(ds, j) - 1.0) < 1e-9);
    }
    Dataset twice = standardize(ds);
    for (std::size_t k = 0; k < ds.cont.data().size(); ++k)
        CHECK(std::abs(twice.cont.data()[k] - ds.cont.data()[k]) < 1e-9);
}

TEST_CASE("l2_normalize gives unit rows and rejects zero rows") {
    auto path = csv_file("x,y,g\n3,4,a\n0.6,0.8,b\n");
    Dataset ds = l2_normalize(load_csv(path, CsvSchema::parse("x:cont,y:cont,g:sensitive")));
    CHECK(ds.cont(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(ds.cont(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(std::abs(ds.cont(1, 0) - 0.6) < 1e-12);
    Rng rng = make_stream(2, "test");
    Dataset r = l2_normalize(random_dataset(rng, 100, 4, {}, 2));
    for (std::size_t i = 0; i < r.size(); ++i) {
        double sq = 0.0;
        for (double v : r.cont.row(i)) sq += v * v;
        CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-12);
    }
    auto zero = csv_file("x,y,g\n0,0,a\n1,1,b\n");
    CHECK(error_code([&] { l2_normalize(load_csv(zero, CsvSchema::parse("x:cont,y:cont,g:sensitive"))); }) ==
          ErrorCode::ZeroVector);
}

TEST_CASE("apply_preprocess maps new rows with stored statistics") {
    Rng rng = make_stream(3, "test");
    Dataset raw = random_dataset(rng, 50, 2, {}, 2);
    Dataset train = l2_normalize(standardize(raw));
    Dataset again = apply_preprocess(raw, train.preprocess);
    for (std::size_t k = 0; k < train.cont.data().size(); ++k)
        CHECK(again.cont.data()[k] == doctest::Approx(train.cont.data()[k]).epsilon(1e-14));
    Dataset narrow = random_dataset(rng, 5, 1, {}, 2);
    CHECK(error_code([&] { apply_preprocess(narrow, train.preprocess); }) == ErrorCode::Dim);
}

TEST_CASE("subsample is reproducible and keeps every group") {
    Dataset ds = biased_fixture(10000, 4, 4.0, {0.5, 0.5});
    Rng a = make_stream(9, "subsample");
    Rng b = make_stream(9, "subsample");
    SubSample s1 = subsample(ds, 1000, a);
    SubSample s2 = subsample(ds, 1000, b);
    CHECK(s1.indices == s2.indices);
    CHECK(s1.size() == 1000);
    CHECK(s1.group_counts.size() == 2);
    // Binomial(1000, ~0.5): a count outside (300, 700) is a > 12 sigma event.
    for (std::size_t c : s1.group_counts) {
        CHECK(c > 300);
        CHECK(c < 700);
    }
    CHECK(std::accumulate(s1.group_counts.begin(), s1.group_counts.end(), std::size_t{0}) == 1000);
}

TEST_CASE("subsample of one row cannot cover two groups") {
    Dataset ds = biased_fixture(100, 4);
    Rng rng = make_stream(1, "subsample");
    CHECK(error_code([&] { subsample(ds, 1, rng); }) == ErrorCode::GroupMissing);
}

TEST_CASE("identity subsample and select_rows") {
    Dataset ds = biased_fixture(20, 4);
    SubSample id = identity_subsample(ds);
    CHECK(id.size() == 20);
    for (std::size_t i = 0; i < 20; ++i) CHECK(id.indices[i] == i);
    Dataset sel = select_rows(ds, {3, 3, 0});
    CHECK(sel.size() == 3);
    CHECK(sel.cont(0, 0) == ds.cont(3, 0));
    CHECK(sel.cont(1, 1) == ds.cont(3, 1));
    CHECK(sel.sensitive[2] == ds.sensitive[0]);
}

TEST_CASE("synthetic sampler honours group bias") {
    auto gap_of_truth = [](const Dataset& ds) {
        std::vector<double> count(2, 0.0), in_first(2, 0.0);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            auto s = static_cast<std::size_t>(ds.sensitive[i]);
            count[s] += 1.0;
            in_first[s] += (*ds.truth)[i] == 0 ? 1.0 : 0.0;
        }
        return std::abs(in_first[0] / count[0] - in_first[1] / count[1]);
    };
    CHECK(gap_of_truth(biased_fixture(10000, 1, 4.0, {0.5, 0.5})) < 0.05);
    CHECK(gap_of_truth(biased_fixture(10000, 1, 4.0, {1.0, 0.0})) > 0.9);
    Dataset a = biased_fixture(500, 3);
    Dataset b = biased_fixture(500, 3);
    CHECK(a.cont == b.cont);
    CHECK(a.sensitive == b.sensitive);
}

TEST_CASE("synthetic sampler with one component") {
    SyntheticSpec spec;
    spec.weights = {1.0};
    spec.centers = {{0.0}};
    spec.scales = {{1.0}};
    spec.group_probs = {{0.5, 0.5}};
    spec.n = 200;
    Dataset ds = make_synthetic_mixture(spec);
    for (int z : *ds.truth) CHECK(z == 0);
}

TEST_CASE("synthetic spec validation names the bad field") {
    SyntheticSpec spec;
    spec.weights = {0.7, 0.7};
    spec.centers = {{0.0}, {1.0}};
    spec.scales = {{1.0}, {1.0}};
    spec.group_probs = {{0.5, 0.5}, {0.5, 0.5}};
    spec.n = 10;
    try {
        spec.validate();
        FAIL("expected a simplex error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Simplex);
        CHECK(std::string(e.what()).find("weights") != std::string::npos);
    }
}
