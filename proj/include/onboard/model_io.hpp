#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "onboard/tensor.hpp"

namespace onboard {

// ---------------------------------------------------------------------------
// Weight files (.rvwt)
//
// All integers u32 little-endian, floats IEEE-754 binary32 little-endian.
//
//   "RVWT"  u32 version (=1)  u32 entry_count  u32 reserved (=0)
//   entry_count times:
//     u32 name_len, name bytes (UTF-8, no terminator)
//     u32 rank, u32 dims[rank]
//     f32 payload[prod(dims)]
//
// An empty set is the 16-byte header alone. Nothing may follow the last entry.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kWeightFormatVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 16;

struct WeightEntry {
    std::string name;
    Tensor value;

    bool operator==(const WeightEntry&) const = default;
};

/// Ordered, uniquely named collection of tensors. Order is meaningful: it is
/// the forward-pass order of the architecture the weights belong to.
class WeightSet {
public:
    std::uint32_t format_version = kWeightFormatVersion;

    void add(std::string name, Tensor value);
    const WeightEntry* find(const std::string& name) const;

    const std::vector<WeightEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    bool operator==(const WeightSet&) const = default;

private:
    std::vector<WeightEntry> entries_;
};

std::vector<std::byte> serialize_weights(const WeightSet& ws);

// Throws FormatError; never returns a partially filled set.
WeightSet parse_weights(std::span<const std::byte> bytes);

void save_weights(const WeightSet& ws, const std::filesystem::path& path);
WeightSet load_weights(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Architecture manifest (.arch)
// ---------------------------------------------------------------------------

enum class LayerKind { conv2d, linear, activation };

const char* to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::activation;

    // conv2d and linear carry parameters named "<name>.weight" / "<name>.bias".
    std::string name;

    // conv2d
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    // linear; input is the flattened output of the previous trunk layer.
    // A non-empty head ("mu" or "logvar") marks one of the two parallel
    // output layers, which both read the trunk output.
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    std::string head;

    // activation
    std::string function;  // only "leaky_relu"
    float alpha = 0.0f;

    bool operator==(const LayerSpec&) const = default;
};

struct ArchSpec {
    Shape input_shape;
    std::size_t latent_dim = 0;
    std::vector<LayerSpec> layers;

    /// Checks the shape chain and head layout; returns the trunk output shape.
    /// Throws DimensionError / ValidationError naming the offending layer.
    Shape validate() const;

    bool operator==(const ArchSpec&) const = default;
};

/// 4 conv2d (4->32->64->128->256, k3 s2 p1) each followed by leaky_relu(0.01),
/// then two 1024->128 linear heads for mu and logvar.
ArchSpec reference_arch();

/// (name, shape) of every parameter tensor in forward order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ArchSpec& arch);

std::string format_arch(const ArchSpec& arch);
ArchSpec parse_arch(const std::string& text);
void save_arch(const ArchSpec& arch, const std::filesystem::path& path);
ArchSpec load_arch(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Binding
// ---------------------------------------------------------------------------

struct BoundLayer {
    LayerSpec spec;
    Tensor weight;             // empty for activations
    std::vector<float> bias;   // empty for activations
};

/// Architecture with its weights attached. Immutable once built and safe to
/// share between threads.
class BoundModel {
public:
    const ArchSpec& arch() const noexcept { return arch_; }
    const std::vector<BoundLayer>& trunk() const noexcept { return trunk_; }
    const BoundLayer& mu_head() const noexcept { return mu_head_; }
    const BoundLayer& logvar_head() const noexcept { return logvar_head_; }

private:
    friend BoundModel bind(const WeightSet& ws, const ArchSpec& arch);

    ArchSpec arch_;
    std::vector<BoundLayer> trunk_;
    BoundLayer mu_head_;
    BoundLayer logvar_head_;
};

// Entries in ws that the architecture does not use are ignored.
BoundModel bind(const WeightSet& ws, const ArchSpec& arch);

}  // namespace onboard
