#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "onboard/model_io.hpp"
#include "onboard/rng.hpp"
#include "onboard/tensor.hpp"

namespace onboard {

inline constexpr std::size_t kLatentDim = 128;
inline constexpr float kLogvarMin = -20.0f;
inline constexpr float kLogvarMax = 20.0f;

struct TileIndex {
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const TileIndex&) const = default;
};

/// One [C,32,32] patch with values in [0,1].
struct NormalizedTile {
    TileIndex index;
    Tensor pixels;
};

struct Latent {
    std::vector<float> mu;
    std::vector<float> logvar;  // clamped to [kLogvarMin, kLogvarMax]
    TileIndex index;

    bool operator==(const Latent&) const = default;
};

/// Latents of one acquisition, row-major over the tile grid.
struct LatentGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::uint32_t acquisition_index = 0;
    std::vector<Latent> cells;

    const Latent& at(std::size_t row, std::size_t col) const { return cells.at(row * cols + col); }
    bool operator==(const LatentGrid&) const = default;
};

struct BatchTiming {
    std::size_t batch_index = 0;
    std::size_t tile_count = 0;
    double duration_s = 0.0;
};

struct EncodeOptions {
    std::size_t batch_size = 64;
    // Worker threads per batch. Output order and values do not depend on it.
    std::size_t threads = 1;
    // Runs inside each batch's timed region, before the batch is encoded.
    // Lets benchmarks inject artificial stalls.
    std::function<void(std::size_t batch_index)> on_batch;
};

struct EncodeResult {
    std::vector<Latent> latents;
    std::vector<BatchTiming> timings;
};

/// Compute-device seam. Every backend must produce mu within 1e-4 of the
/// reference backend, element for element.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    virtual std::string name() const = 0;
    virtual const ArchSpec& arch() const = 0;
    virtual std::vector<Latent> encode(std::span<const NormalizedTile> tiles, std::size_t threads) const = 0;
};

/// Direct CPU forward pass over a BoundModel.
class ReferenceBackend final : public EncoderBackend {
public:
    explicit ReferenceBackend(std::shared_ptr<const BoundModel> model);

    std::string name() const override { return "reference-cpu"; }
    const ArchSpec& arch() const override { return model_->arch(); }
    std::vector<Latent> encode(std::span<const NormalizedTile> tiles, std::size_t threads) const override;

    const BoundModel& model() const noexcept { return *model_; }

private:
    std::shared_ptr<const BoundModel> model_;
};

Latent encode_tile(const NormalizedTile& tile, const BoundModel& model);

// Splits `tiles` into consecutive batches of options.batch_size (last one
// may be short) and times each. Empty input gives empty output.
EncodeResult encode_batch(std::span<const NormalizedTile> tiles, const EncoderBackend& backend,
                          const EncodeOptions& options);
EncodeResult encode_batch(std::span<const NormalizedTile> tiles, const BoundModel& model, std::size_t batch_size);

// z = mu + exp(logvar / 2) * eps, eps ~ N(0, 1) drawn element by element.
std::vector<float> reparameterize(const Latent& latent, SeededRng& rng);

// Latent files. CSV: header "row,col,mu0,...,mu127", one line per tile,
// floats in shortest round-trip form. Binary: .rvwt with entries
// "latent.index" [N,2], "latent.mu" [N,128], "latent.logvar" [N,128].
std::string format_latent_csv(const LatentGrid& grid);
void write_latent_csv(const LatentGrid& grid, const std::filesystem::path& path);
void write_latent_rvwt(const LatentGrid& grid, const std::filesystem::path& path);

}  // namespace onboard
