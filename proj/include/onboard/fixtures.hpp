#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "onboard/encoder.hpp"
#include "onboard/fewshot.hpp"
#include "onboard/ingest.hpp"
#include "onboard/model_io.hpp"

// Deterministic stand-ins for data that is not distributed with the project:
// encoder weights, Sentinel-like scenes and labeled latent sets. Every
// generator draws from one SeededRng in a fixed order, so identical
// arguments give byte-identical output.
namespace onboard::fixtures {

inline constexpr std::uint64_t kReferenceWeightSeed = 42;

/// Every parameter tensor, in forward order and row-major within a tensor,
/// is drawn from N(0, 2 / fan_in) where fan_in is in_channels*k*k for conv
/// layers and in_features for linear layers. Biases use their layer's fan_in.
WeightSet gen_weights(std::uint64_t seed, const ArchSpec& arch = reference_arch());

/// Smooth per-band background (a few random low-frequency sinusoids over a
/// typical land reflectance level) plus pixel noise, in L1C-like digital
/// numbers clamped to [0, 10000].
Scene gen_scene(std::uint64_t seed, std::size_t height = 480, std::size_t width = 480, std::size_t bands = 4,
                std::uint32_t acquisition_index = 0);

struct ScenePair {
    Scene before;
    Scene after;
    std::vector<TileIndex> changed;  // row-major ascending
};

/// `after` is `before` with n_changed randomly chosen 32x32 tiles replaced by
/// independent uniform noise in [0, 10000).
ScenePair gen_scene_pair(std::uint64_t seed, std::size_t n_changed, std::size_t height = 480,
                         std::size_t width = 480);

struct LatentDataset {
    LabeledLatentSet train;
    LabeledLatentSet eval;
};

/// Two unit-covariance Gaussian clusters at +-margin/2 along a random unit
/// direction. Labels alternate 1,0,1,... so classes are balanced; the eval
/// split is a further n independent draws.
LatentDataset gen_latent_dataset(std::uint64_t seed, std::size_t n = 1305, double margin = 8.0);

}  // namespace onboard::fixtures
