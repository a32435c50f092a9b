// Acceptance harness: one pass/fail line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "zsbc/correction.hpp"
#include "zsbc/evaluation.hpp"
#include "zsbc/gradcheck.hpp"
#include "zsbc/network.hpp"
#include "zsbc/nifti.hpp"
#include "zsbc/synthetic.hpp"

using namespace zsbc;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int index, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", index, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(clk::time_point t0) {
    return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// ---- 1: gradient correctness -------------------------------------------------

void check_gradients() {
    const auto t0 = clk::now();
    const auto results = run_gradient_checks(0);
    double worst = 0.0;
    std::string worst_op = "none";
    for (const auto& r : results)
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_op = r.op;
        }
    const double elapsed = seconds_since(t0);
    const bool pass = all_checks_pass(results) && elapsed < 60.0;
    report(1, "gradient correctness", pass,
           fmt("max rel err %.3e on %s, %.1f s", worst, worst_op.c_str(), elapsed));
}

// ---- 2: recurrence oracle ----------------------------------------------------

double scalar_recurrence(double image, double alpha, int n) {
    double h = image;
    for (int k = 0; k < n; ++k) h = h + alpha * h * (1.0 - h);
    return h;
}

void check_recurrence_oracle() {
    const auto t0 = clk::now();
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> signed_unit(-1.0, 1.0);
    std::uniform_int_distribution<int> iters(1, 6);

    double worst = 0.0;
    bool in_range = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const double image = unit(rng);
        const double a = signed_unit(rng);
        const int n = iters(rng);
        Tensor i3({1, 1, 1}, image);
        Tensor a3({1, 1, 1}, a);
        const Tensor out = hc_iterate(i3, a3, n, nullptr, true);
        const double expected = scalar_recurrence(image, a, n);
        const double rel = std::abs(out[0] - expected) / std::max(1.0, std::abs(expected));
        worst = std::max(worst, rel);
        if (out[0] < 0.0 || out[0] > 1.0) in_range = false;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = worst <= 1e-12 && in_range && elapsed < 5.0;
    report(2, "recurrence matches scalar oracle", pass,
           fmt("max rel err %.3e, range %s, %.2f s", worst, in_range ? "ok" : "VIOLATED", elapsed));
}

// ---- 3: identity start -------------------------------------------------------

void check_identity_start() {
    const auto t0 = clk::now();
    PhantomSpec spec;
    spec.seed = 2;
    auto [clean, mask] = make_phantom(spec);
    BiasSpec bs;
    bs.strength = 0.3;
    bs.seed = 3;
    Volume corrupted = corrupt(clean, make_bias_field(spec.shape, bs), 0.01, 4);

    CorrectionConfig cfg;
    cfg.opt_steps = 1;
    cfg.learning_rate = 0.0;
    cfg.weight_decay = 0.0;
    const CorrectionResult res = correct_volume(corrupted, cfg);

    auto [unit, stats] = normalize(corrupted);
    const Tensor reference = denormalize(unit, stats);
    double worst = 0.0;
    for (int64_t i = 0; i < reference.size(); ++i)
        worst = std::max(worst, std::abs(res.corrected.data[i] - reference[i]) /
                                    std::max(1.0, std::abs(reference[i])));
    const double elapsed = seconds_since(t0);
    const bool pass = worst <= 1e-6 && elapsed < 10.0;
    report(3, "identity start returns the clipped input", pass,
           fmt("max rel dev %.3e, %.1f s", worst, elapsed));
}

// ---- 4: synthetic CV reduction -----------------------------------------------

void check_cv_reduction() {
    bool pass = true;
    std::string detail;
    for (uint64_t seed = 0; seed < 3; ++seed) {
        const auto t0 = clk::now();
        PhantomSpec pspec;
        pspec.seed = seed;
        auto [clean, mask] = make_phantom(pspec);
        BiasSpec bspec;
        bspec.strength = 0.3;
        bspec.seed = seed + 100;
        Volume corrupted = corrupt(clean, make_bias_field(pspec.shape, bspec), 0.01, seed + 200);

        CorrectionConfig cfg;
        cfg.seed = seed;
        const CorrectionResult res = correct_volume(corrupted, cfg);
        const double elapsed = seconds_since(t0);

        const EvalReport corrected_report =
            evaluate_correction(corrupted, res.corrected, mask, &clean);
        const EvalReport baseline_report = evaluate_correction(corrupted, corrupted, mask, &clean);

        bool every_tissue = true;
        double reduction_sum = 0.0;
        for (const auto& t : corrected_report.tissues) {
            if (!t.error.empty() || t.cv_corrected >= t.cv_original) every_tissue = false;
            if (t.cv_original > 0.0)
                reduction_sum += (t.cv_original - t.cv_corrected) / t.cv_original;
        }
        const double mean_reduction = reduction_sum / corrected_report.tissues.size();
        const double rmse_corrupted = baseline_report.rmse_to_clean.value_or(0.0);
        const double rmse_corrected = corrected_report.rmse_to_clean.value_or(1e300);
        const bool rmse_ok = rmse_corrected <= 0.6 * rmse_corrupted;
        const bool loss_ok = res.loss_trace.back().total < res.loss_trace.front().total;
        const bool seed_pass =
            every_tissue && mean_reduction >= 0.30 && rmse_ok && loss_ok && elapsed < 120.0;
        pass = pass && seed_pass;
        detail += fmt("%sseed %llu: CV -%.0f%%, RMSE %.4f->%.4f, loss %.4f->%.4f, %.0f s",
                      seed ? "; " : "", static_cast<unsigned long long>(seed),
                      100.0 * mean_reduction, rmse_corrupted, rmse_corrected,
                      res.loss_trace.front().total, res.loss_trace.back().total, elapsed);
    }
    report(4, "synthetic CV and RMSE reduction", pass, detail);
}

// ---- 5: zero-bias no-harm ----------------------------------------------------

void check_no_harm() {
    const auto t0 = clk::now();
    PhantomSpec pspec;
    pspec.seed = 7;
    auto [clean, mask] = make_phantom(pspec);
    BiasSpec bspec;
    bspec.strength = 0.0;
    Volume untouched = corrupt(clean, make_bias_field(pspec.shape, bspec), 0.0, 0);

    CorrectionConfig cfg;
    cfg.seed = 7;
    const CorrectionResult res = correct_volume(untouched, cfg);
    const EvalReport rep = evaluate_correction(untouched, res.corrected, mask);
    double worst_cv = 0.0;
    for (const auto& t : rep.tissues) worst_cv = std::max(worst_cv, t.cv_corrected);
    const double elapsed = seconds_since(t0);
    const bool pass = worst_cv <= 0.05 && elapsed < 120.0;
    report(5, "no harm on an unbiased volume", pass,
           fmt("worst corrected CV %.4f, %.0f s", worst_cv, elapsed));
}

// ---- 6: parameter budget -----------------------------------------------------

void check_param_budget() {
    const NetworkParams p = init_params(0);
    const int64_t count = p.param_count();
    report(6, "trainable parameter budget", count <= 4000, fmt("%lld parameters", (long long)count));
}

// ---- 7: determinism through the CLI ------------------------------------------

std::vector<char> file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_determinism() {
    const auto t0 = clk::now();
    const fs::path dir = fs::temp_directory_path() / "zsbc_acceptance";
    fs::create_directories(dir);

    PhantomSpec pspec;
    pspec.seed = 5;
    auto [clean, mask] = make_phantom(pspec);
    BiasSpec bspec;
    bspec.strength = 0.3;
    bspec.seed = 6;
    Volume corrupted = corrupt(clean, make_bias_field(pspec.shape, bspec), 0.01, 8);
    const fs::path input = dir / "det_in.nii.gz";
    write_volume(corrupted, input.string());

    bool pass = true;
    std::vector<std::vector<char>> outputs;
    for (int run = 0; run < 2; ++run) {
        const fs::path out = dir / ("det_out_" + std::to_string(run) + ".nii.gz");
        const std::string cmd = std::string(ZSBC_CLI_PATH) + " correct --input " + input.string() +
                                " --output " + out.string() +
                                " --seed 5 --deterministic >/dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) pass = false;
        outputs.push_back(file_bytes(out));
    }
    const bool identical = pass && !outputs[0].empty() && outputs[0] == outputs[1];
    const double elapsed = seconds_since(t0);
    report(7, "byte-identical repeated runs", identical && elapsed < 480.0,
           fmt("%zu bytes, identical=%s, %.0f s", outputs.empty() ? 0 : outputs[0].size(),
               identical ? "yes" : "NO", elapsed));
}

// ---- 8: I/O round-trip -------------------------------------------------------

void check_io_round_trip() {
    const auto t0 = clk::now();
    const fs::path dir = fs::temp_directory_path() / "zsbc_acceptance";
    fs::create_directories(dir);
    bool pass = true;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int64_t> ext(3, 24);
    std::uniform_real_distribution<float> val(-500.0f, 500.0f);
    for (int trial = 0; trial < 20 && pass; ++trial) {
        Volume v;
        v.data = Tensor({ext(rng), ext(rng), ext(rng)});
        for (int64_t i = 0; i < v.data.size(); ++i) v.data[i] = val(rng);
        for (auto& s : v.spacing) s = static_cast<float>(0.1 + std::abs(val(rng)) * 0.01);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) v.affine[r][c] = val(rng);
        const fs::path path = dir / ("io_" + std::to_string(trial) + (trial % 2 ? ".nii.gz" : ".nii"));
        write_volume(v, path.string());
        const Volume r = read_volume(path.string());
        if (r.data.shape() != v.data.shape() || r.spacing != v.spacing || r.affine != v.affine)
            pass = false;
        for (int64_t i = 0; pass && i < v.data.size(); ++i)
            if (r.data[i] != static_cast<real>(static_cast<float>(v.data[i]))) pass = false;
    }
    const double elapsed = seconds_since(t0);
    report(8, "volume file round-trip", pass && elapsed < 10.0, fmt("20 volumes, %.1f s", elapsed));
}

}  // namespace

int main() {
    check_gradients();
    check_recurrence_oracle();
    check_identity_start();
    check_cv_reduction();
    check_no_harm();
    check_param_budget();
    check_determinism();
    check_io_round_trip();
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
