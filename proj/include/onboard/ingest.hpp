#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "onboard/encoder.hpp"

namespace onboard {

inline constexpr std::size_t kTileSize = 32;
inline constexpr float kDefaultReflectanceDivisor = 10000.0f;

/// One multispectral acquisition, band-major [bands, height, width].
struct Scene {
    std::size_t bands = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    float gsd_m = 10.0f;
    std::uint32_t acquisition_index = 0;
    std::vector<float> data;

    float at(std::size_t band, std::size_t y, std::size_t x) const { return data[(band * height + y) * width + x]; }
    float& at(std::size_t band, std::size_t y, std::size_t x) { return data[(band * height + y) * width + x]; }

    bool operator==(const Scene&) const = default;
};

struct TileGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t tile_size = kTileSize;
    std::vector<NormalizedTile> tiles;  // row-major
};

// Scene files (.rvsc), little-endian:
//   "RVSC" u32 version(=1) u32 bands u32 height u32 width f32 gsd_m
//   u32 acquisition_index, then bands*height*width f32, band-major.
inline constexpr std::uint32_t kSceneFormatVersion = 1;
inline constexpr std::size_t kSceneHeaderBytes = 28;

std::vector<std::byte> serialize_scene(const Scene& scene);

// Rejects bad headers, payloads whose size disagrees with the declared
// dimensions, and NaN/Inf/negative/over-range pixels (naming band and offset).
Scene parse_scene(std::span<const std::byte> bytes);

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

/// Keeps the listed bands, in the given order.
Scene select_bands(const Scene& scene, std::span<const std::size_t> bands);

/// v -> clamp(v / divisor, 0, 1). The divisor is a calibration knob; 10000
/// maps Sentinel-2 L1C digital numbers to top-of-atmosphere reflectance.
Scene normalize(const Scene& scene, float divisor = kDefaultReflectanceDivisor);

/// Non-overlapping 32x32 tiles, row-major. Trailing rows/columns that do not
/// fill a whole tile are dropped. Requires a normalized scene.
TileGrid tile_scene(const Scene& scene);

}  // namespace onboard
