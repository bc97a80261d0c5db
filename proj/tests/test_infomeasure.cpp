#include <cmath>
#include <sstream>
#include <vector>

#include "cobias/info.hpp"
#include "cobias/rng.hpp"
#include "doctest.h"

using namespace cobias;

TEST_SUITE_BEGIN("infomeasure");

namespace {

ContingencyTable random_table(const std::vector<std::size_t>& cards, RngState& rng) {
    std::size_t cells = 1;
    for (auto c : cards) cells *= c;
    std::vector<double> p(cells);
    double sum = 0;
    for (auto& x : p) {
        x = rng.next_unit() + 1e-4;
        sum += x;
    }
    for (auto& x : p) x /= sum;
    return ContingencyTable::from_probs(cards, p);
}

}  // namespace

TEST_CASE("exact mi pinned values") {
    auto t = ContingencyTable::from_probs({2, 2}, {0.4, 0.1, 0.1, 0.4});
    CHECK(exact_mi(t).value == doctest::Approx(0.19274475702175753).epsilon(1e-12));
    auto c9 = ContingencyTable::from_probs({2, 2}, {0.45, 0.05, 0.05, 0.45});
    CHECK(exact_mi(c9).value == doctest::Approx(0.36806420716849708).epsilon(1e-12));
    auto indep = ContingencyTable::from_probs({2, 2}, {0.25, 0.25, 0.25, 0.25});
    CHECK(exact_mi(indep).value == doctest::Approx(0.0));
    auto perfect = ContingencyTable::from_probs({2, 2}, {0.5, 0.0, 0.0, 0.5});
    CHECK(exact_mi(perfect).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(exact_mi(t).estimator == Estimator::exact_discrete);
    CHECK_FALSE(exact_mi(t).is_lower_bound);
}

TEST_CASE("entropy pinned values") {
    CHECK(entropy({0.8, 0.2}) == doctest::Approx(0.5004024235381879).epsilon(1e-14));
    CHECK(entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(entropy({1.0, 0.0}) == doctest::Approx(0.0));
    auto t = ContingencyTable::from_probs({2, 2}, {0.4, 0.1, 0.1, 0.4});
    CHECK(entropy(t, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("table validation") {
    CHECK_THROWS_AS(ContingencyTable::from_probs({2, 2}, {0.5, 0.5, 0.5, -0.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(ContingencyTable::from_probs({2, 2}, {0.3, 0.3, 0.3, 0.3}),
                    std::invalid_argument);
    CHECK_THROWS_AS(ContingencyTable::from_probs({2, 2}, {0.5, 0.5}), std::invalid_argument);
    // tiny slack renormalizes
    auto t = ContingencyTable::from_probs({2, 2}, {0.25, 0.25, 0.25, 0.25 + 1e-9});
    double s = 0;
    for (double p : t.probs()) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("from_counts and from_samples agree") {
    std::vector<int> u = {0, 0, 1, 1, 1, 0};
    std::vector<int> v = {0, 1, 1, 1, 0, 0};
    auto ts = ContingencyTable::from_samples(u, v, 2, 2);
    auto tc = ContingencyTable::from_counts({2, 2}, {2, 1, 1, 2});
    for (std::size_t i = 0; i < 4; ++i) CHECK(ts.probs()[i] == doctest::Approx(tc.probs()[i]));
}

TEST_CASE("mi properties on 1000 random tables") {
    RngState rng(101);
    for (int rep = 0; rep < 1000; ++rep) {
        auto cards = rep % 2 == 0 ? std::vector<std::size_t>{2, 2} : std::vector<std::size_t>{3, 4};
        auto t = random_table(cards, rng);
        double mi = exact_mi(t).value;
        CHECK(mi >= -1e-12);
        // symmetry via the transposed table
        std::vector<double> pt(t.probs().size());
        for (std::size_t i = 0; i < cards[0]; ++i)
            for (std::size_t j = 0; j < cards[1]; ++j)
                pt[j * cards[0] + i] = t.probs()[i * cards[1] + j];
        auto tt = ContingencyTable::from_probs({cards[1], cards[0]}, pt);
        CHECK(std::abs(mi - exact_mi(tt).value) < 1e-10);
        // I = H(U) + H(V) - H(U,V)
        double hu = entropy(t, 0), hv = entropy(t, 1), huv = entropy(t.probs());
        CHECK(std::abs(mi - (hu + hv - huv)) < 1e-10);
    }
}

TEST_CASE("chain rule on 1000 random three-way tables") {
    RngState rng(202);
    for (int rep = 0; rep < 1000; ++rep) {
        auto t = random_table({2, 2, 2}, rng);
        // I(U;V,W) from the flattened (V,W) axis
        std::vector<double> flat(t.probs());
        auto tf = ContingencyTable::from_probs({2, 4}, flat);  // row-major (u, (v,w))
        double i_u_vw = exact_mi(tf).value;
        double i_u_w = exact_mi(t.marginalize_to(0, 2)).value;
        double i_u_v_given_w = exact_conditional_mi(t, 2).value;
        CHECK(std::abs(i_u_vw - (i_u_w + i_u_v_given_w)) < 1e-10);
    }
}

TEST_CASE("conditional mi hand construction") {
    // W=0 (prob 0.3): U = V uniformly; W=1 (prob 0.7): U, V independent uniform
    std::vector<double> p(8, 0.0);
    auto at = [&](int u, int v, int w) -> double& { return p[(u * 2 + v) * 2 + w]; };
    at(0, 0, 0) = 0.15;
    at(1, 1, 0) = 0.15;
    for (int u = 0; u < 2; ++u)
        for (int v = 0; v < 2; ++v) at(u, v, 1) = 0.175;
    auto t = ContingencyTable::from_probs({2, 2, 2}, p);
    CHECK(exact_conditional_mi(t, 2).value == doctest::Approx(0.3 * std::log(2.0)).epsilon(1e-12));
    // conditioning on an axis with a zero-probability slice contributes nothing
    std::vector<double> q = {0.2, 0.0, 0.0, 0.3, 0.2, 0.0, 0.0, 0.3};
    // here W axis has both slices populated; zero-slice case:
    std::vector<double> r(8, 0.0);
    auto rat = [&](int u, int v, int w) -> double& { return r[(u * 2 + v) * 2 + w]; };
    rat(0, 0, 0) = 0.5;
    rat(1, 1, 0) = 0.5;
    auto tr = ContingencyTable::from_probs({2, 2, 2}, r);
    CHECK(exact_conditional_mi(tr, 2).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    (void)q;
}

TEST_CASE("miller-madow correction has the closed form") {
    std::vector<int> u, v;
    RngState rng(7);
    for (int i = 0; i < 500; ++i) {
        int ui = static_cast<int>(rng.next_below(2));
        u.push_back(ui);
        // dependent labels keep the MI well clear of the at-zero clamp
        v.push_back(rng.next_unit() < 0.7 ? ui : static_cast<int>(rng.next_below(3)));
    }
    auto t = ContingencyTable::from_samples(u, v, 2, 3);
    double plain = exact_mi(t).value;
    double corrected = exact_mi(t, u.size(), true).value;
    std::size_t mu = 0, mv = 0, muv = 0;
    auto margu = t.marginal(0);
    auto margv = t.marginal(1);
    for (double x : margu) mu += x > 0;
    for (double x : margv) mv += x > 0;
    for (double x : t.probs()) muv += x > 0;
    double expect = (static_cast<double>(mu - 1) + static_cast<double>(mv - 1) -
                     static_cast<double>(muv - 1)) /
                    (2.0 * static_cast<double>(u.size()));
    CHECK(corrected - plain == doctest::Approx(expect).epsilon(1e-12));
    CHECK(exact_mi(t, u.size(), false).value == plain);
}

TEST_CASE("gaussian oracle") {
    CHECK(gaussian_mi_oracle(0.0) == doctest::Approx(0.0));
    CHECK(gaussian_mi_oracle(0.2) == doctest::Approx(0.020410997260127583).epsilon(1e-14));
    CHECK(gaussian_mi_oracle(0.5) == doctest::Approx(0.14384103622589045).epsilon(1e-14));
    CHECK(gaussian_mi_oracle(0.8) == doctest::Approx(0.51082562376599083).epsilon(1e-14));
    CHECK(gaussian_mi_oracle(-0.8) == doctest::Approx(0.51082562376599083).epsilon(1e-14));
    CHECK_THROWS_AS(gaussian_mi_oracle(1.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_mi_oracle(-1.2), std::invalid_argument);
}

TEST_CASE("label noise curve matches the frozen oracle on the symmetric joint") {
    auto joint = ContingencyTable::from_probs({2, 2}, {0.4, 0.1, 0.1, 0.4});
    auto curve = label_noise_mi_curve(joint, {0.0, 0.1, 0.2, 0.4}, 2);
    REQUIRE(curve.size() == 4);
    const double iz[] = {0.19274475702175753, 0.12009026342852502, 0.066277722987518717,
                         0.0072173803075725254};
    const double rr[] = {0.2780719051126378, 0.32627531036602181, 0.34386265033417851,
                         0.35844033922470253};
    for (int i = 0; i < 4; ++i) {
        CHECK(curve[i].mi_z_ynoisy == doctest::Approx(iz[i]).epsilon(1e-9));
        REQUIRE(curve[i].ratio.has_value());
        CHECK(*curve[i].ratio == doctest::Approx(rr[i]).epsilon(1e-9));
    }
    // I(Z;Y~) strictly decreases with rho ...
    for (int i = 1; i < 4; ++i) CHECK(curve[i].mi_z_ynoisy < curve[i - 1].mi_z_ynoisy);
    // ... while on this symmetric joint the ratio R strictly INCREASES toward
    // the strong-data-processing limit (1 - 2*0.1)^2 = 0.36; a decreasing R
    // requires an asymmetric joint (see below)
    for (int i = 1; i < 4; ++i) CHECK(*curve[i].ratio > *curve[i - 1].ratio);
    CHECK(*curve[3].ratio < 0.36);
    // rho = 0 point reproduces the plain MIs
    CHECK(curve[0].mi_y_ynoisy == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("label noise curve ratio decreases on an asymmetric joint") {
    auto joint = ContingencyTable::from_probs({2, 2}, {0.50, 0.35, 0.14, 0.01});
    auto curve = label_noise_mi_curve(joint, {0.0, 0.1, 0.2, 0.3}, 2);
    const double rr[] = {0.0965403, 0.0832473, 0.0742679, 0.0692835};
    for (int i = 0; i < 4; ++i) {
        REQUIRE(curve[i].ratio.has_value());
        CHECK(*curve[i].ratio == doctest::Approx(rr[i]).epsilon(1e-5));
    }
    for (int i = 1; i < 4; ++i) CHECK(*curve[i].ratio < *curve[i - 1].ratio);
}

TEST_CASE("label noise curve validation") {
    auto joint = ContingencyTable::from_probs({2, 2}, {0.4, 0.1, 0.1, 0.4});
    CHECK_THROWS_AS(label_noise_mi_curve(joint, {0.5}, 2), std::invalid_argument);
    CHECK_THROWS_AS(label_noise_mi_curve(joint, {-0.1}, 2), std::invalid_argument);
    CHECK_THROWS_AS(label_noise_mi_curve(joint, {0.1}, 1), std::invalid_argument);
    // K above the label cardinality is allowed (extra classes receive noise mass)
    auto c = label_noise_mi_curve(joint, {0.2}, 4);
    CHECK(c[0].mi_z_ynoisy > 0.0);
}

TEST_CASE("contingency csv round trip") {
    RngState rng(5);
    auto t = random_table({3, 4}, rng);
    std::stringstream ss;
    t.save_csv(ss);
    auto back = ContingencyTable::load_csv(ss);
    REQUIRE(back.cardinalities() == t.cardinalities());
    for (std::size_t i = 0; i < t.probs().size(); ++i)
        CHECK(back.probs()[i] == doctest::Approx(t.probs()[i]).epsilon(1e-16));
    auto t3 = random_table({2, 2, 3}, rng);
    std::stringstream s3;
    t3.save_csv(s3);
    auto b3 = ContingencyTable::load_csv(s3);
    CHECK(b3.arity() == 3);
    CHECK(exact_conditional_mi(b3, 2).value ==
          doctest::Approx(exact_conditional_mi(t3, 2).value).epsilon(1e-12));
}

TEST_SUITE_END();
