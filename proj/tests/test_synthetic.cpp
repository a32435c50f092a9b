#include <doctest.h>

#include <cmath>

#include "zsbc/evaluation.hpp"
#include "zsbc/synthetic.hpp"

using namespace zsbc;

TEST_CASE("phantom tissues are piecewise constant and non-empty") {
    PhantomSpec spec;
    auto [vol, mask] = make_phantom(spec);
    REQUIRE(mask.label_names.size() == 3);
    for (const auto& [label, name] : mask.label_names) {
        int64_t count = 0;
        for (int64_t i = 0; i < mask.data.size(); ++i)
            if (static_cast<int>(std::lround(mask.data[i])) == label) ++count;
        CHECK(count > 0);
        CHECK(coefficient_of_variation(vol, mask, label) < 1e-10);
    }
}

TEST_CASE("phantom generation is deterministic per seed") {
    PhantomSpec spec;
    spec.seed = 31;
    auto [v1, m1] = make_phantom(spec);
    auto [v2, m2] = make_phantom(spec);
    for (int64_t i = 0; i < v1.data.size(); ++i) {
        CHECK(v1.data[i] == v2.data[i]);
        CHECK(m1.data[i] == m2.data[i]);
    }
}

TEST_CASE("phantom spec validation") {
    PhantomSpec spec;
    spec.shape = {8, 64, 64};
    CHECK_THROWS_AS(make_phantom(spec), std::invalid_argument);

    spec = PhantomSpec{};
    spec.tissue_intensities = {0.6, 0.3, 0.9};
    CHECK_THROWS_AS(make_phantom(spec), std::invalid_argument);
}

TEST_CASE("zero-strength bias field is exactly 1") {
    BiasSpec spec;
    spec.strength = 0.0;
    Volume b = make_bias_field({32, 32, 32}, spec);
    for (int64_t i = 0; i < b.data.size(); ++i) CHECK(b.data[i] == 1.0);
}

TEST_CASE("bias field range and unit mean") {
    BiasSpec spec;
    spec.strength = 0.3;
    spec.seed = 5;
    Volume b = make_bias_field({48, 48, 48}, spec);
    double total = 0.0, lo = 1e300, hi = -1e300;
    for (int64_t i = 0; i < b.data.size(); ++i) {
        total += b.data[i];
        lo = std::min(lo, static_cast<double>(b.data[i]));
        hi = std::max(hi, static_cast<double>(b.data[i]));
    }
    const double m = total / static_cast<double>(b.data.size());
    CHECK(std::abs(m - 1.0) < 1e-6);
    CHECK(lo > 0.0);
    // pre-normalization range [0.7, 1.3] divided by a mean inside that range
    CHECK(lo >= 0.7 / 1.3 - 1e-9);
    CHECK(hi <= 1.3 / 0.7 + 1e-9);

    Volume b2 = make_bias_field({48, 48, 48}, spec);
    for (int64_t i = 0; i < b.data.size(); ++i) CHECK(b.data[i] == b2.data[i]);
}

TEST_CASE("bias field is smooth") {
    BiasSpec spec;
    spec.strength = 0.3;
    spec.seed = 9;
    const int64_t E = 48;
    Volume b = make_bias_field({E, E, E}, spec);
    // voxel-to-voxel steps stay well below the statistical bound 4s/min_extent
    const double bound = 4.0 * spec.strength / static_cast<double>(E);
    int64_t violations = 0, steps = 0;
    for (int64_t d = 0; d < E; ++d)
        for (int64_t h = 0; h < E; ++h)
            for (int64_t w = 0; w + 1 < E; ++w, ++steps)
                if (std::abs(b.data.at3(d, h, w + 1) - b.data.at3(d, h, w)) > bound) ++violations;
    CHECK(static_cast<double>(violations) / static_cast<double>(steps) < 0.01);
}

TEST_CASE("corrupt identities") {
    PhantomSpec spec;
    spec.shape = {32, 32, 32};
    auto [x, mask] = make_phantom(spec);

    BiasSpec ones;
    ones.strength = 0.0;
    Volume b1 = make_bias_field(spec.shape, ones);
    Volume y = corrupt(x, b1, 0.0, 0);
    for (int64_t i = 0; i < y.data.size(); ++i) CHECK(y.data[i] == x.data[i]);

    // constant clean volume: Y = c * B
    Volume c;
    c.data = Tensor({32, 32, 32}, 2.0);
    BiasSpec bs;
    bs.strength = 0.3;
    Volume b = make_bias_field(spec.shape, bs);
    y = corrupt(c, b, 0.0, 0);
    for (int64_t i = 0; i < y.data.size(); ++i) CHECK(y.data[i] == doctest::Approx(2.0 * b.data[i]));
}

TEST_CASE("additive noise magnitude follows the half-normal mean") {
    Volume x;
    x.data = Tensor({64, 64, 64}, 0.5);
    BiasSpec ones;
    ones.strength = 0.0;
    Volume b = make_bias_field({64, 64, 64}, ones);
    Volume y = corrupt(x, b, 0.01, 123);
    double acc = 0.0;
    for (int64_t i = 0; i < y.data.size(); ++i) acc += std::abs(y.data[i] - 0.5);
    const double mean_abs = acc / static_cast<double>(y.data.size());
    const double expected = 0.01 * std::sqrt(2.0 / M_PI);
    CHECK(mean_abs == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("noise-free corruption: per-tissue CV of Y equals CV of B on the tissue") {
    PhantomSpec pspec;
    auto [x, mask] = make_phantom(pspec);
    BiasSpec bspec;
    bspec.strength = 0.3;
    bspec.seed = 17;
    Volume b = make_bias_field(pspec.shape, bspec);
    Volume y = corrupt(x, b, 0.0, 0);
    for (const auto& [label, name] : mask.label_names) {
        const double cv_y = coefficient_of_variation(y, mask, label);
        const double cv_b = coefficient_of_variation(b, mask, label);
        CHECK(std::abs(cv_y - cv_b) < 1e-6);
    }
}
