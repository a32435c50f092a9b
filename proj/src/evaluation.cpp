#include "zsbc/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <stdexcept>

#include <json.hpp>

namespace zsbc {

namespace {

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::vector<int64_t> masked_indices(const LabelMask& mask, int label) {
    std::vector<int64_t> idx;
    for (int64_t i = 0; i < mask.data.size(); ++i)
        if (static_cast<int>(std::lround(mask.data[i])) == label) idx.push_back(i);
    return idx;
}

}  // namespace

double coefficient_of_variation(const Volume& volume, const LabelMask& mask, int label) {
    if (volume.data.shape() != mask.data.shape())
        throw std::invalid_argument("coefficient_of_variation: volume/mask shape mismatch");
    const std::vector<int64_t> idx = masked_indices(mask, label);
    if (idx.size() < 2)
        throw std::invalid_argument("coefficient_of_variation: label " + std::to_string(label) +
                                    " has fewer than 2 voxels");
    double total = 0.0;
    for (int64_t i : idx) total += volume.data[i];
    const double m = total / static_cast<double>(idx.size());
    if (std::abs(m) < 1e-12)
        throw std::invalid_argument("coefficient_of_variation: masked mean is zero for label " +
                                    std::to_string(label));
    double ss = 0.0;
    for (int64_t i : idx) {
        const double d = volume.data[i] - m;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(idx.size())) / m;
}

EvalReport evaluate_correction(const Volume& original, const Volume& corrected,
                               const LabelMask& mask, const Volume* clean) {
    if (original.data.shape() != corrected.data.shape() ||
        original.data.shape() != mask.data.shape())
        throw std::invalid_argument("evaluate_correction: shape mismatch");
    if (clean && clean->data.shape() != original.data.shape())
        throw std::invalid_argument("evaluate_correction: clean volume shape mismatch");

    EvalReport report;
    report.timestamp = iso_timestamp();

    for (const auto& [label, name] : mask.label_names) {
        TissueEval te;
        te.label = label;
        te.name = name;
        try {
            te.cv_original = coefficient_of_variation(original, mask, label);
            te.cv_corrected = coefficient_of_variation(corrected, mask, label);
        } catch (const std::exception& e) {
            te.error = e.what();
        }
        report.tissues.push_back(std::move(te));
    }

    if (clean) {
        std::vector<int64_t> fg;
        for (int64_t i = 0; i < mask.data.size(); ++i)
            if (mask.data[i] > 0.5) fg.push_back(i);
        if (!fg.empty()) {
            double mean_corr = 0.0, mean_clean = 0.0;
            for (int64_t i : fg) {
                mean_corr += corrected.data[i];
                mean_clean += clean->data[i];
            }
            mean_corr /= static_cast<double>(fg.size());
            mean_clean /= static_cast<double>(fg.size());
            // correction is defined up to a global scale; remove the gauge first
            const double gain = std::abs(mean_corr) > 1e-12 ? mean_clean / mean_corr : 1.0;
            double ss = 0.0;
            for (int64_t i : fg) {
                const double d = corrected.data[i] * gain - clean->data[i];
                ss += d * d;
            }
            report.rmse_to_clean = std::sqrt(ss / static_cast<double>(fg.size()));

            // implicit bias Y/X-hat vs true bias Y/X, guarded small denominators
            std::vector<double> ib, tb;
            for (int64_t i : fg) {
                if (std::abs(corrected.data[i]) < 1e-6 || std::abs(clean->data[i]) < 1e-6) continue;
                ib.push_back(original.data[i] / corrected.data[i]);
                tb.push_back(original.data[i] / clean->data[i]);
            }
            if (ib.size() >= 2) {
                double mi = 0.0, mt = 0.0;
                for (size_t k = 0; k < ib.size(); ++k) {
                    mi += ib[k];
                    mt += tb[k];
                }
                mi /= static_cast<double>(ib.size());
                mt /= static_cast<double>(ib.size());
                double sii = 0.0, stt = 0.0, sit = 0.0;
                for (size_t k = 0; k < ib.size(); ++k) {
                    sii += (ib[k] - mi) * (ib[k] - mi);
                    stt += (tb[k] - mt) * (tb[k] - mt);
                    sit += (ib[k] - mi) * (tb[k] - mt);
                }
                if (sii > 0.0 && stt > 0.0)
                    report.bias_correlation = sit / std::sqrt(sii * stt);
            }
        }
    }
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["timestamp"] = report.timestamp;
    if (!report.config_echo.empty()) j["config"] = report.config_echo;
    j["tissues"] = nlohmann::json::array();
    for (const auto& t : report.tissues) {
        nlohmann::json jt;
        jt["label"] = t.label;
        jt["name"] = t.name;
        if (t.error.empty()) {
            jt["cv_original"] = t.cv_original;
            jt["cv_corrected"] = t.cv_corrected;
        } else {
            jt["error"] = t.error;
        }
        j["tissues"].push_back(jt);
    }
    if (report.rmse_to_clean) j["rmse_to_clean"] = *report.rmse_to_clean;
    if (report.bias_correlation) j["bias_correlation"] = *report.bias_correlation;
    return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
    std::string out;
    char line[128];
    std::snprintf(line, sizeof(line), "%-10s %-12s %-12s\n", "Tissue", "Original", "Corrected");
    out += line;
    for (const auto& t : report.tissues) {
        if (t.error.empty())
            std::snprintf(line, sizeof(line), "%-10s %-12.4f %-12.4f\n", t.name.c_str(),
                          t.cv_original, t.cv_corrected);
        else
            std::snprintf(line, sizeof(line), "%-10s error: %s\n", t.name.c_str(), t.error.c_str());
        out += line;
    }
    if (report.rmse_to_clean) {
        std::snprintf(line, sizeof(line), "rmse_to_clean      %.6f\n", *report.rmse_to_clean);
        out += line;
    }
    if (report.bias_correlation) {
        std::snprintf(line, sizeof(line), "bias_correlation   %.4f\n", *report.bias_correlation);
        out += line;
    }
    return out;
}

}  // namespace zsbc
