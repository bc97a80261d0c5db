#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cobias/synthdata.hpp"
#include "doctest.h"

using namespace cobias;

TEST_SUITE_BEGIN("synthdata");

namespace {

std::string tmp_path(const std::string& name) { return "/tmp/cobias_test_" + name; }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

double match_rate(const LabeledDataset& ds) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ds.n(); ++i)
        hit += ds.Z[i] == static_cast<int>(static_cast<std::size_t>(ds.Y[i]) % ds.B);
    return static_cast<double>(hit) / static_cast<double>(ds.n());
}

double class_mean(const LabeledDataset& ds, int label, bool by_z, std::size_t col) {
    double s = 0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        if ((by_z ? ds.Z[i] : ds.Y[i]) != label) continue;
        s += ds.X(i, col);
        ++cnt;
    }
    REQUIRE(cnt > 0);
    return s / static_cast<double>(cnt);
}

SpuriousSpec small_spec() {
    SpuriousSpec s;
    s.n = 4000;
    s.d_core = 2;
    s.d_bias = 2;
    s.d_noise = 6;
    s.corr = 0.9;
    s.signal_sep = 2.0;
    s.seed = 11;
    return s;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    auto spec = small_spec();
    auto a = generate(spec);
    auto b = generate(spec);
    CHECK(a.train.X.data() == b.train.X.data());
    CHECK(a.train.Y == b.train.Y);
    CHECK(a.train.Z == b.train.Z);
    CHECK(a.test.X.data() == b.test.X.data());
    spec.seed = 12;
    auto c = generate(spec);
    CHECK(a.train.X.data() != c.train.X.data());
}

TEST_CASE("correlation holds on train, test split is balanced") {
    auto spec = small_spec();
    auto pair = generate(spec);
    CHECK(match_rate(pair.train) == doctest::Approx(0.9).epsilon(0.033));
    CHECK(match_rate(pair.test) == doctest::Approx(0.5).epsilon(0.08));
    // labels roughly uniform
    std::size_t ones = 0;
    for (int y : pair.train.Y) ones += y == 1;
    CHECK(static_cast<double>(ones) / 4000.0 == doctest::Approx(0.5).epsilon(0.08));
    CHECK(pair.train.A == 2);
    CHECK(pair.train.B == 2);
    CHECK(pair.train.X.rows() == 4000);
    CHECK(pair.train.X.cols() == spec.input_dim());
}

TEST_CASE("signal structure lands on the right dimensions") {
    auto spec = small_spec();
    auto ds = generate(spec).train;
    // core dims follow Y
    CHECK(class_mean(ds, 0, false, 0) == doctest::Approx(2.0).epsilon(0.08));
    CHECK(class_mean(ds, 0, false, 1) == doctest::Approx(0.0).scale(1.0).epsilon(0.12));
    CHECK(class_mean(ds, 1, false, 1) == doctest::Approx(2.0).epsilon(0.08));
    // bias dims follow Z
    CHECK(class_mean(ds, 0, true, 2) == doctest::Approx(2.0).epsilon(0.08));
    CHECK(class_mean(ds, 1, true, 3) == doctest::Approx(2.0).epsilon(0.08));
    CHECK(class_mean(ds, 1, true, 2) == doctest::Approx(0.0).scale(1.0).epsilon(0.12));
    // noise dims carry nothing
    for (std::size_t j = 4; j < spec.input_dim(); ++j) {
        double s = 0;
        for (std::size_t i = 0; i < ds.n(); ++i) s += ds.X(i, j);
        CHECK(std::abs(s / static_cast<double>(ds.n())) < 0.08);
    }
}

TEST_CASE("shift override changes the test split only") {
    auto spec = small_spec();
    spec.shift = ShiftSpec{0.9, 0.5};
    auto pair = generate(spec);
    CHECK(match_rate(pair.train) == doctest::Approx(0.9).epsilon(0.033));
    CHECK(match_rate(pair.test) == doctest::Approx(0.9).epsilon(0.033));
    // weaker test-split separation
    CHECK(class_mean(pair.test, 0, false, 0) == doctest::Approx(0.5).epsilon(0.25));
    CHECK(class_mean(pair.train, 0, false, 0) == doctest::Approx(2.0).epsilon(0.08));
}

TEST_CASE("every group must be populated") {
    auto spec = small_spec();
    spec.n = 16;
    spec.corr = 1.0;  // off-diagonal groups cannot occur
    CHECK_THROWS_WITH_AS(generate(spec), doctest::Contains("received no samples"),
                         std::runtime_error);
}

TEST_CASE("spec validation") {
    auto spec = small_spec();
    spec.corr = 0.3;  // below 1/B
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = small_spec();
    spec.n = 3;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = small_spec();
    spec.d_core = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = small_spec();
    spec.noise_sigma = -1.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
    spec = small_spec();
    spec.shift = ShiftSpec{0.2, 1.0};
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("csv round trip is exact") {
    auto spec = small_spec();
    spec.n = 64;
    auto ds = generate(spec).train;
    auto path = tmp_path("roundtrip.csv");
    save_csv(ds, path);
    auto back = load_csv(path);
    REQUIRE(back.n() == ds.n());
    REQUIRE(back.X.cols() == ds.X.cols());
    CHECK(std::memcmp(back.X.data().data(), ds.X.data().data(),
                      ds.X.data().size() * sizeof(double)) == 0);
    CHECK(back.Y == ds.Y);
    CHECK(back.Z == ds.Z);
    CHECK(back.A == ds.A);
    CHECK(back.B == ds.B);
    std::remove(path.c_str());
}

TEST_CASE("csv loader reports the offending line") {
    auto path = tmp_path("bad.csv");
    write_file(path, "x0,x1,y,z\n1.0,2.0,0,0\n1.0,2.0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 3"), std::runtime_error);
    write_file(path, "x0,x1,y,z\n1.0,oops,0,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 2"), std::runtime_error);
    write_file(path, "x0,x1,y,z\n1.0,2.0,-1,0\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("negative label"), std::runtime_error);
    write_file(path, "x0,x9,y,z\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("x1"), std::runtime_error);
    write_file(path, "x0,x1,y\n");
    CHECK_THROWS_AS(load_csv(path), std::runtime_error);
    write_file(path, "x0,x1,y,z\n");
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("no data rows"), std::runtime_error);
    CHECK_THROWS_AS(load_csv(tmp_path("does_not_exist.csv")), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("label noise channel") {
    std::vector<int> y(20000, 0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);

    SUBCASE("rho zero is the identity and consumes no randomness") {
        RngState r1(42), r2(42);
        auto out = apply_label_noise(y, 0.0, 2, r1);
        CHECK(out == y);
        CHECK(r1.next_u64() == r2.next_u64());
    }
    SUBCASE("flip rate approaches rho") {
        RngState rng(43);
        auto out = apply_label_noise(y, 0.3, 2, rng);
        std::size_t flips = 0;
        for (std::size_t i = 0; i < y.size(); ++i) flips += out[i] != y[i];
        CHECK(static_cast<double>(flips) / static_cast<double>(y.size()) ==
              doctest::Approx(0.3).epsilon(0.05));
    }
    SUBCASE("flips spread over the other classes") {
        RngState rng(44);
        std::vector<int> zeros(30000, 0);
        auto out = apply_label_noise(zeros, 0.4, 3, rng);
        std::size_t to1 = 0, to2 = 0;
        for (int v : out) {
            to1 += v == 1;
            to2 += v == 2;
        }
        CHECK(static_cast<double>(to1) / 30000.0 == doctest::Approx(0.2).epsilon(0.08));
        CHECK(static_cast<double>(to2) / 30000.0 == doctest::Approx(0.2).epsilon(0.08));
    }
    SUBCASE("validation") {
        RngState rng(45);
        CHECK_THROWS_AS(apply_label_noise(y, 0.5, 2, rng), std::invalid_argument);
        CHECK_THROWS_AS(apply_label_noise(y, -0.1, 2, rng), std::invalid_argument);
        CHECK_THROWS_AS(apply_label_noise(y, 0.1, 1, rng), std::invalid_argument);
        CHECK_THROWS_AS(apply_label_noise({0, 2}, 0.1, 2, rng), std::invalid_argument);
    }
}

TEST_CASE("class-balanced resampling") {
    auto spec = small_spec();
    spec.corr = 0.95;
    auto ds = generate(spec).train;

    SUBCASE("deterministic given the stream") {
        RngState r1(7), r2(7);
        auto a = resample_by_class(ds, r1);
        auto b = resample_by_class(ds, r2);
        CHECK(a.Y == b.Y);
        CHECK(a.X.data() == b.X.data());
    }
    SUBCASE("classes come out balanced, size preserved") {
        RngState rng(8);
        auto out = resample_by_class(ds, rng);
        REQUIRE(out.n() == ds.n());
        std::size_t ones = 0;
        for (int v : out.Y) ones += v == 1;
        CHECK(static_cast<double>(ones) / static_cast<double>(out.n()) ==
              doctest::Approx(0.5).epsilon(0.08));
        // rows are genuine copies of source rows
        bool found = false;
        for (std::size_t i = 0; i < ds.n() && !found; ++i)
            found = std::memcmp(&out.X(0, 0), &ds.X(i, 0), ds.X.cols() * sizeof(double)) == 0 &&
                    out.Y[0] == ds.Y[i];
        CHECK(found);
    }
    SUBCASE("single-class data passes through; a missing middle class does not") {
        LabeledDataset single;
        single.A = 2;
        single.B = 2;
        single.X = Matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8});
        single.Y = {0, 0, 0, 0};
        single.Z = {0, 1, 0, 1};
        RngState rng(9);
        auto out = resample_by_class(single, rng);
        CHECK(out.n() == 4);
        for (int v : out.Y) CHECK(v == 0);

        LabeledDataset gap = single;
        gap.A = 3;
        gap.Y = {0, 0, 2, 2};
        CHECK_THROWS_WITH_AS(resample_by_class(gap, rng), doctest::Contains("has no samples"),
                             std::invalid_argument);
        LabeledDataset empty;
        CHECK_THROWS_AS(resample_by_class(empty, rng), std::invalid_argument);
    }
}

TEST_SUITE_END();
