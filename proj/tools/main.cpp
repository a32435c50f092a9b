#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "zsbc/correction.hpp"
#include "zsbc/errors.hpp"
#include "zsbc/evaluation.hpp"
#include "zsbc/gradcheck.hpp"
#include "zsbc/network.hpp"
#include "zsbc/nifti.hpp"
#include "zsbc/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit codes: 1 invalid args, 2 I/O, 3 degenerate input, 4 divergence, 5 gradcheck failure
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitDiverged = 4;
constexpr int kExitGradCheck = 5;

struct RunConfig {
    zsbc::CorrectionConfig correction;
    zsbc::LossWeights weights;
    bool deterministic = true;
};

zsbc::Neighborhood parse_neighborhood(const std::string& s) {
    if (s == "face6") return zsbc::Neighborhood::Face6;
    if (s == "edge18") return zsbc::Neighborhood::Edge18;
    if (s == "corner26") return zsbc::Neighborhood::Corner26;
    throw CLI::ValidationError("spa_neighborhood must be face6, edge18 or corner26");
}

// Flat key-value JSON config; command-line flags override file values.
void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw zsbc::IoError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw zsbc::IoError("config file " + path + " is not valid JSON: " + e.what());
    }
    auto get = [&j](const char* key, auto& target) {
        if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    get("hc_iterations", cfg.correction.hc_iterations);
    get("opt_steps", cfg.correction.opt_steps);
    get("learning_rate", cfg.correction.learning_rate);
    get("weight_decay", cfg.correction.weight_decay);
    get("downsample_factor", cfg.correction.downsample_factor);
    get("seed", cfg.correction.seed);
    get("channels", cfg.correction.channels);
    get("decoupled_weight_decay", cfg.correction.decoupled_weight_decay);
    get("w_smo_alpha", cfg.weights.w_smo_alpha);
    get("w_smo_bias", cfg.weights.w_smo_bias);
    get("w_spa", cfg.weights.w_spa);
    get("w_exp", cfg.weights.w_exp);
    get("w_fidelity", cfg.weights.w_fidelity);
    get("exposure_target", cfg.weights.exposure_target);
    get("spa_region", cfg.weights.spa_region);
    get("exp_region", cfg.weights.exp_region);
    get("deterministic", cfg.deterministic);
    if (j.contains("spa_neighborhood"))
        cfg.weights.spa_neighborhood = parse_neighborhood(j.at("spa_neighborhood").get<std::string>());
}

void write_trace_json(const std::vector<zsbc::LossBreakdown>& trace, const std::string& path) {
    json arr = json::array();
    for (size_t i = 0; i < trace.size(); ++i) {
        const auto& lb = trace[i];
        arr.push_back({{"step", i},
                       {"smo_alpha", lb.smo_alpha},
                       {"spa", lb.spa},
                       {"exp", lb.exp},
                       {"fidelity", lb.fidelity},
                       {"smo_bias", lb.smo_bias},
                       {"total", lb.total}});
    }
    std::ofstream out(path);
    if (!out) throw zsbc::IoError("cannot open " + path + " for writing");
    out << arr.dump(2) << "\n";
    if (!out) throw zsbc::IoError("write failure on " + path);
}

std::array<int64_t, 3> parse_shape(const std::string& s) {
    std::array<int64_t, 3> shape{};
    std::string norm = s;
    for (char& c : norm)
        if (c == 'x' || c == ',') c = ' ';
    std::istringstream in(norm);
    std::vector<int64_t> vals;
    int64_t v;
    while (in >> v) vals.push_back(v);
    if (vals.size() == 1) return {vals[0], vals[0], vals[0]};
    if (vals.size() == 3) return {vals[0], vals[1], vals[2]};
    throw CLI::ValidationError("--shape expects one extent or DxHxW");
}

std::map<int, std::string> parse_labels(const std::string& s) {
    std::map<int, std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--labels expects k=name pairs");
        out[std::stoi(item.substr(0, eq))] = item.substr(eq + 1);
    }
    return out;
}

int run_correct(const std::vector<std::string>& inputs, const std::string& output,
                const std::string& bias_out, const std::string& trace_out,
                const std::string& params_out, const RunConfig& cfg, int jobs) {
    struct Job {
        std::string input, output;
    };
    std::vector<Job> work;
    if (inputs.size() == 1) {
        work.push_back({inputs[0], output});
    } else {
        fs::create_directories(output);
        for (const auto& in : inputs) {
            std::string stem = fs::path(in).filename().string();
            const auto pos = stem.find(".nii");
            if (pos != std::string::npos) stem = stem.substr(0, pos);
            work.push_back({in, (fs::path(output) / (stem + "_corrected.nii.gz")).string()});
        }
    }

    std::mutex io_mutex;
    std::exception_ptr first_error;
    std::atomic<size_t> next{0};

    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < work.size(); i = next.fetch_add(1)) {
            try {
                const zsbc::Volume vol = zsbc::read_volume(work[i].input);
                const zsbc::CorrectionResult res =
                    zsbc::correct_volume(vol, cfg.correction, cfg.weights);
                zsbc::write_volume(res.corrected, work[i].output);
                std::lock_guard<std::mutex> lock(io_mutex);
                for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
                std::cerr << work[i].input << ": " << res.elapsed_seconds << " s, final loss "
                          << res.loss_trace.back().total << "\n";
                if (work.size() == 1) {
                    if (!bias_out.empty()) zsbc::write_volume(res.bias, bias_out);
                    if (!trace_out.empty()) write_trace_json(res.loss_trace, trace_out);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(io_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    if (!params_out.empty())  // debugging dump of the freshly initialized weights
        zsbc::dump_params(zsbc::init_params(cfg.correction.seed, cfg.correction.channels), params_out);

    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
    std::vector<std::thread> threads;
    for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return 0;
}

int run_simulate(const std::string& out_dir, const std::array<int64_t, 3>& shape,
                 double bias_strength, double noise, uint64_t seed) {
    fs::create_directories(out_dir);
    zsbc::PhantomSpec pspec;
    pspec.shape = shape;
    pspec.seed = seed;
    zsbc::BiasSpec bspec;
    bspec.strength = bias_strength;
    bspec.seed = seed + 1;

    auto [clean, mask] = zsbc::make_phantom(pspec);
    const zsbc::Volume bias = zsbc::make_bias_field(pspec.shape, bspec);
    const zsbc::Volume corrupted = zsbc::corrupt(clean, bias, noise, seed + 2);

    const fs::path dir(out_dir);
    zsbc::write_volume(clean, (dir / "clean.nii.gz").string());
    zsbc::write_volume(bias, (dir / "bias.nii.gz").string());
    zsbc::write_volume(corrupted, (dir / "corrupted.nii.gz").string());
    zsbc::write_mask(mask, clean, (dir / "mask.nii.gz").string());

    json spec;
    spec["shape"] = {shape[0], shape[1], shape[2]};
    spec["tissue_intensities"] = pspec.tissue_intensities;
    spec["bias_strength"] = bias_strength;
    spec["noise_sigma"] = noise;
    spec["seed"] = seed;
    json labels = json::object();
    for (const auto& [k, v] : mask.label_names) labels[std::to_string(k)] = v;
    spec["labels"] = labels;
    std::ofstream out(dir / "spec.json");
    if (!out) throw zsbc::IoError("cannot write spec.json in " + out_dir);
    out << spec.dump(2) << "\n";
    return 0;
}

int run_evaluate(const std::string& image_path, const std::string& corrected_path,
                 const std::string& mask_path, const std::string& clean_path,
                 const std::string& json_out, const std::string& labels_arg) {
    const zsbc::Volume image = zsbc::read_volume(image_path);
    const zsbc::Volume corrected = zsbc::read_volume(corrected_path);

    std::map<int, std::string> label_spec;
    if (!labels_arg.empty()) {
        label_spec = parse_labels(labels_arg);
    } else {
        // accept whatever labels the mask contains
        const zsbc::Volume raw = zsbc::read_volume(mask_path);
        for (int64_t i = 0; i < raw.data.size(); ++i) {
            const int label = static_cast<int>(std::lround(raw.data[i]));
            if (label > 0 && !label_spec.count(label))
                label_spec[label] = "L" + std::to_string(label);
        }
    }
    const zsbc::LabelMask mask = zsbc::read_mask(mask_path, label_spec, &image);

    std::optional<zsbc::Volume> clean;
    if (!clean_path.empty()) clean = zsbc::read_volume(clean_path);

    zsbc::EvalReport report =
        zsbc::evaluate_correction(image, corrected, mask, clean ? &*clean : nullptr);
    report.config_echo = "image=" + image_path + " corrected=" + corrected_path;

    for (const auto& t : report.tissues)
        if (!t.error.empty()) std::cerr << "warning: tissue " << t.name << ": " << t.error << "\n";

    std::cout << zsbc::report_to_table(report);
    if (!json_out.empty()) {
        std::ofstream out(json_out);
        if (!out) throw zsbc::IoError("cannot open " + json_out + " for writing");
        out << zsbc::report_to_json(report) << "\n";
    }
    return 0;
}

int run_gradcheck(uint64_t seed, int size, bool inject) {
    const auto results = zsbc::run_gradient_checks(seed, size, inject);
    for (const auto& r : results) {
        std::printf("%-32s max_rel_err %.3e  %s\n", r.op.c_str(), r.max_rel_err,
                    r.pass ? "ok" : "FAIL");
    }
    if (!zsbc::all_checks_pass(results)) {
        std::cerr << "gradient check failed for:";
        for (const auto& r : results)
            if (!r.pass) std::cerr << " " << r.op;
        std::cerr << "\n";
        return kExitGradCheck;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot bias-field correction for 3D volumes"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    // correct
    auto* correct = app.add_subcommand("correct", "Correct one or more volumes");
    std::vector<std::string> inputs;
    std::string output, bias_out, trace_out, params_out;
    int jobs = 1;
    correct->add_option("--input", inputs, "Input NIfTI volume(s)")->required();
    correct->add_option("--output", output,
                        "Output path (file for one input, directory for several)")->required();
    correct->add_option("--bias-out", bias_out, "Write the predicted bias field here");
    correct->add_option("--trace-out", trace_out, "Write the per-step loss trace as JSON");
    correct->add_option("--params-out", params_out, "Debug dump of initial weights (flat float32)");
    correct->add_option("--config", config_path, "JSON config file (flags override)");
    auto* o_iters = correct->add_option("--iters", cfg.correction.opt_steps, "Optimization steps");
    auto* o_lr = correct->add_option("--lr", cfg.correction.learning_rate, "Learning rate");
    auto* o_seed = correct->add_option("--seed", cfg.correction.seed, "RNG seed");
    auto* o_hc = correct->add_option("--hc-iters", cfg.correction.hc_iterations,
                                     "Homogeneity-correction iterations");
    auto* o_wd = correct->add_option("--weight-decay", cfg.correction.weight_decay, "Weight decay");
    auto* o_ds = correct->add_option("--downsample", cfg.correction.downsample_factor,
                                     "Downsample factor per axis");
    correct->add_option("--jobs", jobs, "Correct inputs concurrently");
    correct->add_flag("--deterministic,!--no-deterministic", cfg.deterministic,
                      "Fixed reduction order (default on)");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corrupted phantom");
    std::string out_dir, shape_str = "64";
    double bias_strength = 0.3, noise = 0.01;
    uint64_t sim_seed = 0;
    simulate->add_option("--out-dir", out_dir, "Output directory")->required();
    simulate->add_option("--shape", shape_str, "Volume shape (E or DxHxW)");
    simulate->add_option("--bias-strength", bias_strength, "Bias field strength in [0,1)");
    simulate->add_option("--noise", noise, "Additive Gaussian noise sigma");
    simulate->add_option("--seed", sim_seed, "RNG seed");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Per-tissue CV report");
    std::string image_path, corrected_path, mask_path, clean_path, json_out, labels_arg;
    evaluate->add_option("--image", image_path, "Original (corrupted) volume")->required();
    evaluate->add_option("--corrected", corrected_path, "Corrected volume")->required();
    evaluate->add_option("--mask", mask_path, "Tissue label mask")->required();
    evaluate->add_option("--clean", clean_path, "Ground-truth clean volume (simulation only)");
    evaluate->add_option("--json-out", json_out, "Write the report as JSON");
    evaluate->add_option("--labels", labels_arg, "Label names, e.g. 1=GM,2=WM,3=CSF");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    uint64_t gc_seed = 0;
    int gc_size = 4;
    bool gc_inject = false;
    gradcheck->add_option("--seed", gc_seed, "RNG seed");
    gradcheck->add_option("--size", gc_size, "Base spatial extent for the op checks");
    gradcheck->add_flag("--inject-error", gc_inject, "Corrupt analytic gradients (negative control)")
        ->group("");  // test hook, hidden from help

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*correct) {
            if (!config_path.empty()) {
                RunConfig file_cfg;
                load_config_file(config_path, file_cfg);
                // flags override file values
                RunConfig merged = file_cfg;
                if (o_iters->count()) merged.correction.opt_steps = cfg.correction.opt_steps;
                if (o_lr->count()) merged.correction.learning_rate = cfg.correction.learning_rate;
                if (o_seed->count()) merged.correction.seed = cfg.correction.seed;
                if (o_hc->count()) merged.correction.hc_iterations = cfg.correction.hc_iterations;
                if (o_wd->count()) merged.correction.weight_decay = cfg.correction.weight_decay;
                if (o_ds->count()) merged.correction.downsample_factor = cfg.correction.downsample_factor;
                cfg = merged;
            }
            return run_correct(inputs, output, bias_out, trace_out, params_out, cfg, jobs);
        }
        if (*simulate)
            return run_simulate(out_dir, parse_shape(shape_str), bias_strength, noise, sim_seed);
        if (*evaluate)
            return run_evaluate(image_path, corrected_path, mask_path, clean_path, json_out,
                                labels_arg);
        if (*gradcheck) return run_gradcheck(gc_seed, gc_size, gc_inject);
    } catch (const zsbc::DegenerateInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const zsbc::OptimizationDivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const zsbc::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
