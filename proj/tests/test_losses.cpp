#include <doctest.h>

#include <random>

#include "zsbc/losses.hpp"

using namespace zsbc;

namespace {

Tensor random_unit(std::vector<int64_t> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<real> uni(0.0, 1.0);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = uni(rng);
    return t;
}

}  // namespace

TEST_CASE("smoothness_loss hand cases") {
    CHECK(smoothness_loss(Tensor({1, 4, 4, 4}, 0.42)) == 0.0);

    Tensor pair({1, 2, 1, 1});
    pair[0] = 0.0;
    pair[1] = 0.5;
    CHECK(smoothness_loss(pair) == doctest::Approx(0.125));

    // degree-2 homogeneity
    Tensor m = random_unit({1, 3, 3, 3}, 1);
    const real base = smoothness_loss(m);
    CHECK(smoothness_loss(scale(m, 3.0)) == doctest::Approx(9.0 * base));

    // invariance under a global constant shift
    CHECK(smoothness_loss(add_scalar(m, 0.37)) == doctest::Approx(base));
}

TEST_CASE("spatial_consistency_loss hand cases") {
    Tensor y = random_unit({1, 8, 8, 8}, 2);
    CHECK(spatial_consistency_loss(y, y, 4, Neighborhood::Face6) == 0.0);

    // shifting hc globally leaves pooled pairwise differences unchanged
    CHECK(spatial_consistency_loss(add_scalar(y, 0.2), y, 4, Neighborhood::Face6) ==
          doctest::Approx(0.0));

    // two pooled blocks along depth: ((0.6-0.4)^2 per ordered pair) / 2 blocks
    Tensor yv({1, 2, 1, 1});
    yv[0] = 0.2;
    yv[1] = 0.6;
    Tensor hv({1, 2, 1, 1});
    hv[0] = 0.2;
    hv[1] = 0.8;
    CHECK(spatial_consistency_loss(hv, yv, 1, Neighborhood::Face6) == doctest::Approx(0.04));
}

TEST_CASE("exposure_loss hand cases") {
    Tensor at_target({1, 8, 8, 8}, 0.6);
    CHECK(exposure_loss(at_target, 8, 0.6) < 1e-28);

    Tensor dark({1, 8, 8, 8}, 0.1);
    CHECK(exposure_loss(dark, 8, 0.6) == doctest::Approx(0.25));
}

TEST_CASE("prior_loss hand cases") {
    Tensor y({1, 2, 2, 2}, 0.5);
    Tensor x({1, 2, 2, 2}, 1.0);
    Tensor b({1, 2, 2, 2}, 0.5);
    CHECK(prior_loss(y, x, b, 1600.0) == doctest::Approx(0.0));

    Tensor x2({1, 2, 2, 2}, 0.5);
    CHECK(prior_loss(y, x2, b, 1600.0) == doctest::Approx(0.25));
}

TEST_CASE("total_loss composed zero case and recomposition") {
    LossWeights w;
    const int64_t e = 8;
    Tensor y({1, e, e, e}, 0.6);  // constant at the exposure target
    Tensor alpha({1, e, e, e}, 0.0);
    Tensor hc = y;  // alpha = 0 leaves the image unchanged
    Tensor b({1, e, e, e}, 1.0);
    LossBreakdown lb = total_loss(y, hc, alpha, b, w);
    CHECK(lb.smo_alpha == 0.0);
    CHECK(lb.spa == 0.0);
    CHECK(lb.exp == doctest::Approx(0.0));
    CHECK(lb.fidelity == doctest::Approx(0.0));
    CHECK(lb.smo_bias == 0.0);
    CHECK(lb.total == doctest::Approx(0.0));

    Tensor yr = random_unit({1, e, e, e}, 3);
    Tensor hcr = random_unit({1, e, e, e}, 4);
    Tensor ar = random_unit({1, e, e, e}, 5);
    Tensor br = random_unit({1, e, e, e}, 6);
    lb = total_loss(yr, hcr, ar, br, w);
    const real manual = w.w_smo_alpha * lb.smo_alpha + w.w_spa * lb.spa + w.w_exp * lb.exp +
                        w.w_fidelity * lb.fidelity + w.w_smo_bias * lb.smo_bias;
    CHECK(lb.total == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("losses are non-negative on random inputs") {
    for (uint64_t s = 0; s < 5; ++s) {
        Tensor a = random_unit({1, 6, 6, 6}, 100 + s);
        Tensor b = random_unit({1, 6, 6, 6}, 200 + s);
        CHECK(smoothness_loss(a) >= 0.0);
        CHECK(spatial_consistency_loss(a, b, 2, Neighborhood::Face6) >= 0.0);
        CHECK(spatial_consistency_loss(a, b, 2, Neighborhood::Edge18) >= 0.0);
        CHECK(spatial_consistency_loss(a, b, 2, Neighborhood::Corner26) >= 0.0);
        CHECK(exposure_loss(a, 2, 0.6) >= 0.0);
        CHECK(prior_loss(a, b, b, 1600.0) >= 0.0);
    }
}

TEST_CASE("default LossWeights match the documented values") {
    LossWeights w;
    CHECK(w.w_smo_alpha == doctest::Approx(1600.0));
    CHECK(w.w_smo_bias == doctest::Approx(1600.0));
    CHECK(w.w_spa == doctest::Approx(1.0));
    CHECK(w.w_exp == doctest::Approx(1.0));
    CHECK(w.w_fidelity == doctest::Approx(1.0));
    CHECK(w.exposure_target == doctest::Approx(0.6));
    CHECK(w.spa_region == 4);
    CHECK(w.exp_region == 8);
}
