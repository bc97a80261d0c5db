#include <cmath>
#include <cstdlib>
#include <vector>

#include "cobias/matrix.hpp"
#include "cobias/mine.hpp"
#include "doctest.h"

using namespace cobias;

TEST_SUITE_BEGIN("mine");

namespace {

Matrix normal_column(std::size_t n, RngState& rng) {
    Matrix m(n, 1);
    for (std::size_t i = 0; i < n; ++i) m(i, 0) = rng.next_normal();
    return m;
}

double logmeanexp_ref(const Matrix& s) {
    double mx = s.at(0);
    for (std::size_t i = 1; i < s.size(); ++i) mx = std::max(mx, s.at(i));
    double acc = 0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += std::exp(s.at(i) - mx);
    return mx + std::log(acc / static_cast<double>(s.size()));
}

EstimatorConfig quick_cfg() {
    EstimatorConfig cfg;
    cfg.epochs = 30;
    cfg.batch = 256;
    cfg.hidden = {32};
    cfg.lr = 1e-3;
    cfg.final_avg_epochs = 5;
    return cfg;
}

}  // namespace

TEST_CASE("one hot encoding") {
    auto m = one_hot({0, 2, 1}, 3);
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 3);
    CHECK(m.data() == std::vector<double>{1, 0, 0, 0, 0, 1, 0, 1, 0});
    CHECK_THROWS_AS(one_hot({3}, 3), std::invalid_argument);
    CHECK_THROWS_AS(one_hot({-1}, 2), std::invalid_argument);
}

TEST_CASE("critic construction and validation") {
    CHECK_THROWS_AS(StatisticsNetwork::init(0, {8}, 30.0, RngState(1)), std::invalid_argument);
    CHECK_THROWS_AS(StatisticsNetwork::init(2, {8}, 0.0, RngState(1)), std::invalid_argument);
    auto net = StatisticsNetwork::init(2, {8, 8}, 30.0, RngState(1));
    CHECK(net.input_dim() == 2);
    CHECK(net.parameters().size() == 6);  // two hidden layers plus the scalar output
    Matrix bad(8, 3);
    CHECK_THROWS_AS(net.score(bad), std::invalid_argument);
}

TEST_CASE("soft clip bounds the critic output") {
    auto net = StatisticsNetwork::init(2, {4}, 2.0, RngState(2));
    for (auto& p : net.parameters())
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value.at(i) = 500.0;
    Matrix x(8, 2);
    for (std::size_t i = 0; i < x.size(); ++i) x.at(i) = static_cast<double>(i) - 4.0;
    auto s = net.score(x);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(std::abs(s.at(i)) <= 2.0 + 1e-12);
        CHECK(std::abs(s.at(i)) > 1.5);  // deep in the saturated regime
    }
}

TEST_CASE("zero critic gives a zero bound") {
    auto net = StatisticsNetwork::init(2, {4}, 30.0, RngState(3));
    for (auto& p : net.parameters())
        for (std::size_t i = 0; i < p->value.size(); ++i) p->value.at(i) = 0.0;
    RngState rng(4);
    Matrix u = normal_column(16, rng), v = normal_column(16, rng);
    auto r = dv_bound(net, u, v, rng);
    CHECK(r.joint_term == 0.0);
    CHECK(r.marginal_term == 0.0);
    CHECK(r.bound_value == 0.0);
}

TEST_CASE("bound node matches a direct evaluation under a pinned permutation") {
    auto net = StatisticsNetwork::init(2, {6}, 30.0, RngState(5));
    RngState rng(6);
    Matrix u = normal_column(8, rng), v = normal_column(8, rng);
    std::vector<std::size_t> perm = {1, 2, 3, 4, 5, 6, 7, 0};

    auto node = dv_bound_node(net, constant(u), constant(v), perm);
    Matrix s_joint = net.score(hstack(u, v));
    Matrix s_marg = net.score(hstack(u, take_rows(v, perm)));
    double joint = 0;
    for (std::size_t i = 0; i < 8; ++i) joint += s_joint(i, 0);
    joint /= 8.0;
    double expect = joint - logmeanexp_ref(s_marg);
    CHECK(node->value(0, 0) == doctest::Approx(expect).epsilon(1e-12));

    // graph and plain scorers agree row by row
    auto node_scores = net.score(constant(hstack(u, v)));
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(node_scores->value(i, 0) == doctest::Approx(s_joint(i, 0)).epsilon(1e-13));
}

TEST_CASE("pairing validation") {
    auto net = StatisticsNetwork::init(2, {4}, 30.0, RngState(7));
    RngState rng(8);
    Matrix u7 = normal_column(7, rng), v7 = normal_column(7, rng);
    CHECK_THROWS_WITH_AS(dv_bound(net, u7, v7, rng), doctest::Contains("minimum of 8"),
                         std::invalid_argument);
    Matrix u8 = normal_column(8, rng), v9 = normal_column(9, rng);
    CHECK_THROWS_AS(dv_bound(net, u8, v9, rng), std::invalid_argument);
    Matrix v8 = normal_column(8, rng);
    CHECK_THROWS_WITH_AS(dv_bound_node(net, constant(u8), constant(v8), {0, 1, 2}),
                         doctest::Contains("permutation length"), std::invalid_argument);
}

TEST_CASE("estimator recovers dependence and rejects tiny samples") {
    auto cfg = quick_cfg();
    RngState rng(9);
    Matrix u = normal_column(2000, rng);

    SUBCASE("identical variables push the bound well up") {
        auto c = cfg;
        c.epochs = 60;
        c.lr = 3e-3;
        auto run = train_mi_estimator(u, u, c, RngState(10));
        CHECK(run.estimate.value > 0.5);
        CHECK(run.estimate.is_lower_bound);
        CHECK(run.estimate.estimator == Estimator::dv_neural);
        CHECK(run.estimate.n_samples == 2000);
        REQUIRE(run.history.size() == 60);
        for (std::size_t i = 0; i < run.history.size(); ++i)
            CHECK(run.history[i].first == static_cast<int>(i));
    }
    SUBCASE("independent variables stay near zero") {
        Matrix w = normal_column(2000, rng);
        auto run = train_mi_estimator(u, w, cfg, RngState(11));
        CHECK(std::abs(run.estimate.value) < 0.1);
    }
    SUBCASE("determinism in the seed") {
        auto a = train_mi_estimator(u, u, cfg, RngState(12));
        auto b = train_mi_estimator(u, u, cfg, RngState(12));
        CHECK(a.estimate.value == b.estimate.value);
        CHECK(a.history == b.history);
    }
    SUBCASE("moving-average gradient correction stays finite") {
        auto c = cfg;
        c.ma_correction = true;
        c.epochs = 5;
        auto run = train_mi_estimator(u, u, c, RngState(13));
        CHECK(std::isfinite(run.estimate.value));
        CHECK(run.estimate.value > -1.0);
    }
    SUBCASE("validation") {
        Matrix tiny = normal_column(999, rng);
        CHECK_THROWS_WITH_AS(train_mi_estimator(tiny, tiny, cfg, RngState(14)),
                             doctest::Contains(">= 1000"), std::invalid_argument);
        auto c = cfg;
        c.epochs = 0;
        CHECK_THROWS_AS(train_mi_estimator(u, u, c, RngState(15)), std::invalid_argument);
        c = cfg;
        c.batch = 4;
        CHECK_THROWS_AS(train_mi_estimator(u, u, c, RngState(16)), std::invalid_argument);
    }
    SUBCASE("divergence guard aborts") {
        auto c = cfg;
        c.diverge_abs = 1e-9;
        CHECK_THROWS_WITH_AS(train_mi_estimator(u, u, c, RngState(17)),
                             doctest::Contains("diverged"), std::runtime_error);
    }
}

TEST_CASE("conditional bias estimate separates leaky from clean features") {
    const std::size_t n = 1200;
    RngState rng(18);
    std::vector<int> Z(n), Y(n);
    for (std::size_t i = 0; i < n; ++i) {
        Z[i] = static_cast<int>(rng.next_below(2));
        Y[i] = static_cast<int>(rng.next_below(2));
    }
    auto cfg = quick_cfg();
    cfg.epochs = 60;
    cfg.lr = 3e-3;

    SUBCASE("features that copy Z") {
        Matrix F(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            F(i, 0) = Z[i] ? 1.0 : -1.0;
            F(i, 1) = Z[i] ? -1.0 : 1.0;
        }
        auto e = estimate_cobias(F, Z, Y, cfg, RngState(19));
        CHECK(e.value > 0.3);
        CHECK(e.clamped == e.value);
        CHECK(e.mi_f_zy.value > 0.4);
        CHECK(std::abs(e.mi_f_y.value) < 0.1);
    }
    SUBCASE("pure noise features") {
        Matrix F = normal_column(n, rng);
        auto e = estimate_cobias(F, Z, Y, cfg, RngState(20));
        CHECK(std::abs(e.value) < 0.1);
        CHECK(e.clamped >= 0.0);
    }
    SUBCASE("alignment is enforced") {
        Matrix F(n, 1);
        std::vector<int> shortz(n - 1, 0);
        CHECK_THROWS_AS(estimate_cobias(F, shortz, Y, cfg, RngState(21)), std::invalid_argument);
    }
}

TEST_CASE("surrogate term equals the bound on the concatenated pairing") {
    const std::size_t n = 8;
    RngState rng(22);
    Matrix F = normal_column(n, rng);
    std::vector<int> Y = {0, 1, 0, 1, 0, 1, 0, 1};
    std::vector<int> Z = {0, 0, 1, 1, 0, 0, 1, 1};
    std::vector<std::size_t> perm = {7, 6, 5, 4, 3, 2, 1, 0};
    auto net = StatisticsNetwork::init(1 + 2 + 2, {6}, 30.0, RngState(23));

    auto node = surrogate_bias_term(net, constant(F), Y, Z, 2, 2, perm);
    Matrix u = hstack(F, one_hot(Y, 2));
    auto ref = dv_bound_node(net, constant(u), constant(one_hot(Z, 2)), perm);
    CHECK(node->value(0, 0) == doctest::Approx(ref->value(0, 0)).epsilon(1e-13));
}

TEST_SUITE_END();
