#include <doctest.h>

#include <json.hpp>

#include "zsbc/evaluation.hpp"
#include "zsbc/synthetic.hpp"

using namespace zsbc;

namespace {

LabelMask two_voxel_mask() {
    LabelMask mask;
    mask.data = Tensor({1, 1, 2}, 1.0);
    mask.label_names[1] = "pair";
    return mask;
}

}  // namespace

TEST_CASE("coefficient_of_variation hand cases") {
    LabelMask mask = two_voxel_mask();
    Volume v;
    v.data = Tensor({1, 1, 2});
    v.data[0] = 1.0;
    v.data[1] = 3.0;
    // mean 2, population std 1
    CHECK(coefficient_of_variation(v, mask, 1) == doctest::Approx(0.5));

    Volume constant;
    constant.data = Tensor({1, 1, 2}, 4.0);
    CHECK(coefficient_of_variation(constant, mask, 1) == 0.0);

    // scale invariance
    Volume scaled;
    scaled.data = Tensor({1, 1, 2});
    scaled.data[0] = 7.0;
    scaled.data[1] = 21.0;
    CHECK(coefficient_of_variation(scaled, mask, 1) == doctest::Approx(0.5));
}

TEST_CASE("coefficient_of_variation error cases") {
    LabelMask mask = two_voxel_mask();
    Volume v;
    v.data = Tensor({1, 1, 2}, 1.0);
    CHECK_THROWS_AS(coefficient_of_variation(v, mask, 9), std::invalid_argument);  // empty label

    Volume zero_mean;
    zero_mean.data = Tensor({1, 1, 2});
    zero_mean.data[0] = -1.0;
    zero_mean.data[1] = 1.0;
    CHECK_THROWS_AS(coefficient_of_variation(zero_mean, mask, 1), std::invalid_argument);
}

TEST_CASE("evaluate_correction identities") {
    PhantomSpec spec;
    spec.shape = {32, 32, 32};
    auto [clean, mask] = make_phantom(spec);
    BiasSpec bs;
    bs.strength = 0.3;
    Volume bias = make_bias_field(spec.shape, bs);
    Volume corrupted = corrupt(clean, bias, 0.0, 0);

    // corrected == original: identical CV columns
    EvalReport same = evaluate_correction(corrupted, corrupted, mask);
    for (const auto& t : same.tissues) {
        REQUIRE(t.error.empty());
        CHECK(t.cv_original == t.cv_corrected);
    }

    // perfect correction: per-tissue CV 0 and RMSE 0
    EvalReport perfect = evaluate_correction(corrupted, clean, mask, &clean);
    for (const auto& t : perfect.tissues) {
        REQUIRE(t.error.empty());
        CHECK(t.cv_corrected < 1e-10);
    }
    REQUIRE(perfect.rmse_to_clean.has_value());
    CHECK(*perfect.rmse_to_clean == doctest::Approx(0.0).epsilon(1e-9));
    REQUIRE(perfect.bias_correlation.has_value());
    CHECK(*perfect.bias_correlation == doctest::Approx(1.0).epsilon(1e-9));

    // noise-free corruption: CV of Y per tissue equals CV of B on that tissue
    for (const auto& t : same.tissues)
        CHECK(t.cv_original ==
              doctest::Approx(coefficient_of_variation(bias, mask, t.label)).epsilon(1e-9));
}

TEST_CASE("missing labels become error rows instead of aborting") {
    PhantomSpec spec;
    spec.shape = {32, 32, 32};
    auto [clean, mask] = make_phantom(spec);
    mask.label_names[9] = "ghost";
    EvalReport report = evaluate_correction(clean, clean, mask);
    bool found = false;
    for (const auto& t : report.tissues)
        if (t.label == 9) {
            found = true;
            CHECK(!t.error.empty());
        }
    CHECK(found);
}

TEST_CASE("JSON report has the documented keys") {
    PhantomSpec spec;
    spec.shape = {32, 32, 32};
    auto [clean, mask] = make_phantom(spec);
    EvalReport report = evaluate_correction(clean, clean, mask, &clean);
    const auto j = nlohmann::json::parse(report_to_json(report));
    REQUIRE(j.contains("tissues"));
    REQUIRE(j.contains("timestamp"));
    CHECK(j.contains("rmse_to_clean"));
    for (const auto& t : j["tissues"]) {
        CHECK(t.contains("label"));
        CHECK(t.contains("name"));
        CHECK((t.contains("cv_original") || t.contains("error")));
    }
}

TEST_CASE("text table lists every tissue") {
    PhantomSpec spec;
    spec.shape = {32, 32, 32};
    auto [clean, mask] = make_phantom(spec);
    EvalReport report = evaluate_correction(clean, clean, mask);
    const std::string table = report_to_table(report);
    for (const auto& [label, name] : mask.label_names)
        CHECK(table.find(name) != std::string::npos);
}
