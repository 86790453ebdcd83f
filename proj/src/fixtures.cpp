#include "onboard/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "onboard/error.hpp"
#include "onboard/rng.hpp"

namespace onboard::fixtures {

WeightSet gen_weights(std::uint64_t seed, const ArchSpec& arch) {
    arch.validate();
    SeededRng rng(seed);
    WeightSet ws;
    for (const auto& layer : arch.layers) {
        std::size_t fan_in = 0;
        if (layer.kind == LayerKind::conv2d) {
            fan_in = layer.in_channels * layer.kernel * layer.kernel;
        } else if (layer.kind == LayerKind::linear) {
            fan_in = layer.in_features;
        } else {
            continue;
        }
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (const auto& [name, shape] : parameter_shapes(ArchSpec{arch.input_shape, arch.latent_dim, {layer}})) {
            std::vector<float> values(element_count(shape));
            for (auto& v : values) v = static_cast<float>(rng.normal(0.0, stddev));
            ws.add(name, Tensor(shape, std::move(values)));
        }
    }
    return ws;
}

Scene gen_scene(std::uint64_t seed, std::size_t height, std::size_t width, std::size_t bands,
                std::uint32_t acquisition_index) {
    if (bands == 0 || height == 0 || width == 0) throw ValidationError("scene dimensions must be positive");
    // Typical vegetated-land DN for B2, B3, B4, B8.
    constexpr double kLevels[] = {1100.0, 950.0, 850.0, 2600.0};
    constexpr int kWaves = 3;

    SeededRng rng(seed);
    Scene s;
    s.bands = bands;
    s.height = height;
    s.width = width;
    s.acquisition_index = acquisition_index;
    s.data.resize(bands * height * width);

    for (std::size_t b = 0; b < bands; ++b) {
        const double level = b < 4 ? kLevels[b] : 1500.0;
        double amp[kWaves], fy[kWaves], fx[kWaves], phase[kWaves];
        for (int k = 0; k < kWaves; ++k) {
            amp[k] = 150.0 + 300.0 * rng.uniform();
            fy[k] = 0.5 + 2.5 * rng.uniform();
            fx[k] = 0.5 + 2.5 * rng.uniform();
            phase[k] = 2.0 * std::numbers::pi * rng.uniform();
        }
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const double v = static_cast<double>(y) / static_cast<double>(height);
                const double u = static_cast<double>(x) / static_cast<double>(width);
                double dn = level;
                for (int k = 0; k < kWaves; ++k) {
                    dn += amp[k] * std::sin(2.0 * std::numbers::pi * (fy[k] * v + fx[k] * u) + phase[k]);
                }
                dn += rng.normal(0.0, 40.0);
                s.at(b, y, x) = static_cast<float>(std::clamp(dn, 0.0, 10000.0));
            }
        }
    }
    return s;
}

ScenePair gen_scene_pair(std::uint64_t seed, std::size_t n_changed, std::size_t height, std::size_t width) {
    const std::size_t rows = height / kTileSize, cols = width / kTileSize;
    if (n_changed > rows * cols) {
        throw ValidationError("cannot change " + std::to_string(n_changed) + " of " + std::to_string(rows * cols) + " tiles");
    }
    ScenePair pair;
    pair.before = gen_scene(seed, height, width, 4, 0);
    pair.after = pair.before;
    pair.after.acquisition_index = 1;

    SeededRng rng(seed ^ 0x9E3779B97F4A7C15ull);
    std::vector<std::size_t> cells(rows * cols);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    rng.shuffle(std::span(cells));
    cells.resize(n_changed);
    std::sort(cells.begin(), cells.end());

    for (auto cell : cells) {
        const TileIndex t{cell / cols, cell % cols};
        pair.changed.push_back(t);
        for (std::size_t b = 0; b < pair.after.bands; ++b) {
            for (std::size_t y = 0; y < kTileSize; ++y) {
                for (std::size_t x = 0; x < kTileSize; ++x) {
                    pair.after.at(b, t.row * kTileSize + y, t.col * kTileSize + x) =
                        static_cast<float>(10000.0 * rng.uniform());
                }
            }
        }
    }
    return pair;
}

LatentDataset gen_latent_dataset(std::uint64_t seed, std::size_t n, double margin) {
    if (n < 2) throw ValidationError("latent dataset needs at least 2 samples");
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw ValidationError("margin must be finite and nonnegative");

    SeededRng rng(seed);
    std::vector<double> direction(kFeatureDim);
    double norm = 0.0;
    for (auto& d : direction) {
        d = rng.normal();
        norm += d * d;
    }
    norm = std::sqrt(norm);
    for (auto& d : direction) d /= norm;

    LatentDataset ds;
    ds.train.split = Split::train;
    ds.eval.split = Split::eval;
    std::vector<float> x(kFeatureDim);
    for (auto* set : {&ds.train, &ds.eval}) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t label = i % 2 == 0 ? 1 : 0;
            const double offset = (label ? 0.5 : -0.5) * margin;
            for (std::size_t j = 0; j < kFeatureDim; ++j) {
                x[j] = static_cast<float>(rng.normal() + offset * direction[j]);
            }
            set->push_back(x, label);
        }
    }
    return ds;
}

}  // namespace onboard::fixtures
