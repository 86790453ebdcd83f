#include "onboard/ingest.hpp"

#include <algorithm>
#include <cmath>

#include "byte_io.hpp"
#include "onboard/error.hpp"

namespace onboard {

namespace {

constexpr std::string_view kSceneMagic = "RVSC";
constexpr float kMaxRawValue = 1e6f;
constexpr std::uint32_t kMaxSceneDim = 1u << 16;

}  // namespace

std::vector<std::byte> serialize_scene(const Scene& scene) {
    if (scene.data.size() != scene.bands * scene.height * scene.width) {
        throw DimensionError("scene payload does not match its dimensions");
    }
    detail::ByteWriter w;
    w.bytes(kSceneMagic);
    w.u32(kSceneFormatVersion);
    w.u32(static_cast<std::uint32_t>(scene.bands));
    w.u32(static_cast<std::uint32_t>(scene.height));
    w.u32(static_cast<std::uint32_t>(scene.width));
    w.f32(scene.gsd_m);
    w.u32(scene.acquisition_index);
    w.f32s(scene.data);
    return w.take();
}

Scene parse_scene(std::span<const std::byte> bytes) {
    detail::ByteReader r(bytes);
    if (r.bytes(4, "magic") != kSceneMagic) throw FormatError(FormatErrorKind::bad_magic, "expected RVSC");
    const auto version = r.u32("version");
    if (version != kSceneFormatVersion) {
        throw FormatError(FormatErrorKind::unsupported_version, "version " + std::to_string(version));
    }
    Scene s;
    const auto bands = r.u32("bands");
    const auto height = r.u32("height");
    const auto width = r.u32("width");
    s.gsd_m = r.f32("gsd");
    s.acquisition_index = r.u32("acquisition index");

    if (bands == 0 || bands > 64) throw FormatError(FormatErrorKind::bad_header, "band count " + std::to_string(bands));
    if (height < kTileSize || width < kTileSize || height > kMaxSceneDim || width > kMaxSceneDim) {
        throw FormatError(FormatErrorKind::bad_header,
                          "dimensions " + std::to_string(height) + "x" + std::to_string(width) + " outside [32, 65536]");
    }
    if (!std::isfinite(s.gsd_m) || s.gsd_m <= 0.0f) throw FormatError(FormatErrorKind::bad_header, "gsd must be positive");

    s.bands = bands;
    s.height = height;
    s.width = width;
    const std::size_t n = s.bands * s.height * s.width;
    if (r.remaining() != n * 4) {
        throw FormatError(r.remaining() < n * 4 ? FormatErrorKind::truncated : FormatErrorKind::trailing_data,
                          "header declares " + std::to_string(n) + " pixels, payload holds " +
                              std::to_string(r.remaining()) + " bytes");
    }
    s.data = r.f32s(n, "pixels");
    const std::size_t plane = s.height * s.width;
    for (std::size_t i = 0; i < n; ++i) {
        const float v = s.data[i];
        if (std::isfinite(v) && v >= 0.0f && v <= kMaxRawValue) continue;
        const std::string where = "band " + std::to_string(i / plane) + " offset " + std::to_string(i % plane);
        if (!std::isfinite(v)) throw FormatError(FormatErrorKind::non_finite, where);
        throw FormatError(FormatErrorKind::out_of_range, where + " value " + std::to_string(v));
    }
    return s;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
    detail::write_file(path, serialize_scene(scene));
}

Scene load_scene(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    try {
        return parse_scene(bytes);
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

Scene select_bands(const Scene& scene, std::span<const std::size_t> bands) {
    if (bands.empty()) throw ValidationError("band selection must not be empty");
    Scene out = scene;
    out.bands = bands.size();
    out.data.clear();
    const std::size_t plane = scene.height * scene.width;
    for (auto b : bands) {
        if (b >= scene.bands) {
            throw ValidationError("band " + std::to_string(b) + " not in scene with " + std::to_string(scene.bands) + " bands");
        }
        const auto first = scene.data.begin() + static_cast<std::ptrdiff_t>(b * plane);
        out.data.insert(out.data.end(), first, first + static_cast<std::ptrdiff_t>(plane));
    }
    return out;
}

Scene normalize(const Scene& scene, float divisor) {
    if (!(divisor > 0.0f)) throw ValidationError("normalization divisor must be positive");
    Scene out = scene;
    for (auto& v : out.data) v = std::clamp(v / divisor, 0.0f, 1.0f);
    return out;
}

TileGrid tile_scene(const Scene& scene) {
    if (scene.height < kTileSize || scene.width < kTileSize) {
        throw DimensionError("scene " + std::to_string(scene.height) + "x" + std::to_string(scene.width) +
                             " is smaller than one 32x32 tile");
    }
    if (scene.data.size() != scene.bands * scene.height * scene.width) {
        throw DimensionError("scene payload does not match its dimensions");
    }
    for (float v : scene.data) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("tile_scene needs a normalized scene (values in [0,1])");
    }

    TileGrid grid;
    grid.rows = scene.height / kTileSize;
    grid.cols = scene.width / kTileSize;
    grid.tiles.reserve(grid.rows * grid.cols);
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            Tensor pixels({scene.bands, kTileSize, kTileSize});
            auto dst = pixels.data();
            std::size_t k = 0;
            for (std::size_t b = 0; b < scene.bands; ++b) {
                for (std::size_t y = 0; y < kTileSize; ++y) {
                    const float* src = &scene.data[(b * scene.height + r * kTileSize + y) * scene.width + c * kTileSize];
                    std::copy(src, src + kTileSize, dst.begin() + static_cast<std::ptrdiff_t>(k));
                    k += kTileSize;
                }
            }
            grid.tiles.push_back({{r, c}, std::move(pixels)});
        }
    }
    return grid;
}

}  // namespace onboard
