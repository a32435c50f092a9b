#include "zsbc/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace zsbc {

std::pair<Volume, LabelMask> make_phantom(const PhantomSpec& spec) {
    for (int64_t e : spec.shape)
        if (e < 16) throw std::invalid_argument("make_phantom: extents must be >= 16");
    const size_t T = spec.tissue_intensities.size();
    if (T == 0 || T != spec.axis_fractions.size())
        throw std::invalid_argument("make_phantom: need one axis fraction per tissue");
    for (size_t t = 0; t + 1 < T; ++t) {
        if (!(spec.tissue_intensities[t] < spec.tissue_intensities[t + 1]))
            throw std::invalid_argument("make_phantom: tissue intensities must be strictly increasing");
        if (!(spec.axis_fractions[t] > spec.axis_fractions[t + 1]))
            throw std::invalid_argument("make_phantom: axis fractions must be strictly decreasing");
    }
    for (real v : spec.tissue_intensities)
        if (v <= 0.0 || v >= 1.0)
            throw std::invalid_argument("make_phantom: tissue intensities must lie in (0,1)");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    const int64_t D = spec.shape[0], H = spec.shape[1], W = spec.shape[2];
    // Per-tissue jittered ellipsoid centers and semi-axes (voxel units).
    std::vector<std::array<double, 3>> centers(T), axes(T);
    for (size_t t = 0; t < T; ++t) {
        const double ext[3] = {static_cast<double>(D), static_cast<double>(H), static_cast<double>(W)};
        for (int a = 0; a < 3; ++a) {
            centers[t][static_cast<size_t>(a)] =
                (ext[a] - 1.0) / 2.0 + uni(rng) * spec.center_jitter * ext[a];
            axes[t][static_cast<size_t>(a)] =
                spec.axis_fractions[t] * ext[a] * (1.0 + uni(rng) * spec.axis_jitter);
        }
    }

    Volume vol;
    vol.data = Tensor({D, H, W}, 0.0);
    LabelMask mask;
    mask.data = Tensor({D, H, W}, 0.0);
    std::vector<int64_t> counts(T, 0);

    for (int64_t d = 0; d < D; ++d)
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w) {
                int label = 0;
                // deepest containing ellipsoid wins
                for (size_t t = 0; t < T; ++t) {
                    const double dz = (d - centers[t][0]) / axes[t][0];
                    const double dy = (h - centers[t][1]) / axes[t][1];
                    const double dx = (w - centers[t][2]) / axes[t][2];
                    if (dz * dz + dy * dy + dx * dx <= 1.0) label = static_cast<int>(t) + 1;
                }
                if (label > 0) {
                    vol.data.at3(d, h, w) = spec.tissue_intensities[static_cast<size_t>(label - 1)];
                    mask.data.at3(d, h, w) = static_cast<real>(label);
                    counts[static_cast<size_t>(label - 1)] += 1;
                }
            }

    for (size_t t = 0; t < T; ++t) {
        if (counts[t] == 0)
            throw std::invalid_argument("make_phantom: tissue " + std::to_string(t + 1) +
                                        " is empty (degenerate geometry)");
        mask.label_names[static_cast<int>(t) + 1] = "tissue" + std::to_string(t + 1);
    }
    return {std::move(vol), std::move(mask)};
}

Volume make_bias_field(const std::array<int64_t, 3>& shape, const BiasSpec& spec) {
    if (spec.strength < 0.0 || spec.strength >= 1.0)
        throw std::invalid_argument("make_bias_field: strength must be in [0,1)");
    const int64_t D = shape[0], H = shape[1], W = shape[2];
    Volume vol;
    vol.data = Tensor({D, H, W}, 1.0);
    if (spec.strength == 0.0) return vol;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);

    struct Bump {
        double c[3], inv2s2[3], a;
    };
    std::vector<Bump> bumps(static_cast<size_t>(std::max(1, spec.num_bumps)));
    const double ext[3] = {static_cast<double>(D), static_cast<double>(H), static_cast<double>(W)};
    for (auto& b : bumps) {
        for (int i = 0; i < 3; ++i) {
            b.c[i] = uni01(rng) * (ext[i] - 1.0);
            const double sigma = (spec.min_width + uni01(rng) * (spec.max_width - spec.min_width)) * ext[i];
            b.inv2s2[i] = 1.0 / (2.0 * sigma * sigma);
        }
        b.a = amp(rng);
    }

    Tensor g({D, H, W});
    double gmin = 1e300, gmax = -1e300;
    for (int64_t d = 0; d < D; ++d)
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w) {
                double acc = 0.0;
                for (const auto& b : bumps) {
                    const double dz = d - b.c[0], dy = h - b.c[1], dx = w - b.c[2];
                    acc += b.a * std::exp(-(dz * dz * b.inv2s2[0] + dy * dy * b.inv2s2[1] +
                                            dx * dx * b.inv2s2[2]));
                }
                g.at3(d, h, w) = acc;
                gmin = std::min(gmin, acc);
                gmax = std::max(gmax, acc);
            }

    const double span = gmax - gmin;
    double total = 0.0;
    for (int64_t i = 0; i < g.size(); ++i) {
        const double u = span > 0.0 ? (g[i] - gmin) / span : 0.5;
        vol.data[i] = 1.0 - spec.strength + 2.0 * spec.strength * u;
        total += vol.data[i];
    }
    const double mean = total / static_cast<double>(g.size());
    for (int64_t i = 0; i < vol.data.size(); ++i) vol.data[i] /= mean;
    return vol;
}

Volume corrupt(const Volume& clean, const Volume& bias, real noise_sigma, uint64_t seed) {
    if (clean.data.shape() != bias.data.shape())
        throw std::invalid_argument("corrupt: clean and bias shapes differ");
    if (noise_sigma < 0.0) throw std::invalid_argument("corrupt: noise_sigma must be >= 0");

    Volume out;
    out.data = Tensor(clean.data.shape());
    out.spacing = clean.spacing;
    out.affine = clean.affine;

    std::mt19937_64 rng(seed);
    std::normal_distribution<real> noise(0.0, 1.0);
    for (int64_t i = 0; i < out.data.size(); ++i) {
        real v = clean.data[i] * bias.data[i];
        if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
        out.data[i] = v;
    }
    return out;
}

}  // namespace zsbc
