#include "onboard/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "byte_io.hpp"
#include "onboard/error.hpp"

namespace onboard {

namespace {

constexpr std::string_view kWeightMagic = "RVWT";
constexpr std::uint32_t kMaxRank = 8;
constexpr float kMaxWeightMagnitude = 1e6f;

}  // namespace

void WeightSet::add(std::string name, Tensor value) {
    if (name.empty()) throw ValidationError("weight entry name must not be empty");
    if (find(name)) throw FormatError(FormatErrorKind::duplicate_name, name);
    entries_.push_back({std::move(name), std::move(value)});
}

const WeightEntry* WeightSet::find(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::vector<std::byte> serialize_weights(const WeightSet& ws) {
    detail::ByteWriter w;
    w.bytes(kWeightMagic);
    w.u32(ws.format_version);
    w.u32(static_cast<std::uint32_t>(ws.size()));
    w.u32(0);
    for (const auto& e : ws.entries()) {
        w.u32(static_cast<std::uint32_t>(e.name.size()));
        w.bytes(e.name);
        w.u32(static_cast<std::uint32_t>(e.value.rank()));
        for (auto d : e.value.shape()) w.u32(static_cast<std::uint32_t>(d));
        w.f32s(e.value.data());
    }
    return w.take();
}

WeightSet parse_weights(std::span<const std::byte> bytes) {
    detail::ByteReader r(bytes);
    if (r.bytes(4, "magic") != kWeightMagic) throw FormatError(FormatErrorKind::bad_magic, "expected RVWT");
    const auto version = r.u32("version");
    if (version != kWeightFormatVersion) {
        throw FormatError(FormatErrorKind::unsupported_version, "version " + std::to_string(version));
    }
    const auto count = r.u32("entry count");
    if (r.u32("reserved") != 0) throw FormatError(FormatErrorKind::bad_header, "reserved field must be 0");
    // Smallest possible entry: name_len + 1 name byte + rank + 1 dim + 1 float.
    if (count > r.remaining() / 17) {
        throw FormatError(FormatErrorKind::truncated,
                          std::to_string(count) + " entries cannot fit in " + std::to_string(r.remaining()) + " bytes");
    }

    WeightSet ws;
    ws.format_version = version;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto entry_offset = r.position();
        const auto name_len = r.u32("name length");
        if (name_len == 0) throw FormatError(FormatErrorKind::bad_header, "empty name at offset " + std::to_string(entry_offset));
        std::string name = r.bytes(name_len, "name");
        const auto rank = r.u32("rank");
        if (rank == 0 || rank > kMaxRank) {
            throw FormatError(FormatErrorKind::shape_mismatch, name + ": rank " + std::to_string(rank));
        }
        Shape shape;
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto dim = r.u32("dimension");
            if (dim == 0) throw FormatError(FormatErrorKind::shape_mismatch, name + ": zero dimension");
            if (n > r.remaining() / 4 / dim) {
                throw FormatError(FormatErrorKind::truncated, name + ": payload larger than remaining bytes");
            }
            n *= dim;
            shape.push_back(dim);
        }
        auto data = r.f32s(n, name.c_str());
        for (std::size_t k = 0; k < data.size(); ++k) {
            if (!std::isfinite(data[k])) {
                throw FormatError(FormatErrorKind::non_finite, name + " element " + std::to_string(k));
            }
            if (std::fabs(data[k]) > kMaxWeightMagnitude) {
                throw FormatError(FormatErrorKind::out_of_range, name + " element " + std::to_string(k));
            }
        }
        if (ws.find(name)) throw FormatError(FormatErrorKind::duplicate_name, name);
        ws.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (r.remaining() != 0) {
        throw FormatError(FormatErrorKind::trailing_data, std::to_string(r.remaining()) + " bytes after last entry");
    }
    return ws;
}

void save_weights(const WeightSet& ws, const std::filesystem::path& path) {
    detail::write_file(path, serialize_weights(ws));
}

WeightSet load_weights(const std::filesystem::path& path) {
    const auto bytes = detail::read_file(path);
    try {
        return parse_weights(bytes);
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

const char* to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::linear: return "linear";
    case LayerKind::activation: return "activation";
    }
    return "?";
}

Shape ArchSpec::validate() const {
    if (input_shape.size() != 3) throw DimensionError("arch input shape must be [C,H,W]");
    for (auto d : input_shape) {
        if (d == 0) throw DimensionError("arch input dimensions must be positive");
    }
    if (latent_dim == 0) throw ValidationError("arch latent_dim must be positive");

    Shape current = input_shape;
    bool in_heads = false;
    int mu_heads = 0, logvar_heads = 0;
    Shape trunk_out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = "layer " + std::to_string(i) + (l.name.empty() ? "" : " (" + l.name + ")");
        if (in_heads && l.head.empty()) {
            throw ValidationError(where + ": trunk layers must precede the output heads");
        }
        switch (l.kind) {
        case LayerKind::conv2d: {
            if (l.name.empty()) throw ValidationError(where + ": conv2d needs a name");
            if (current.size() != 3) throw DimensionError(where + ": conv2d after a flattening layer");
            if (l.in_channels != current[0]) {
                throw DimensionError(where + ": declares " + std::to_string(l.in_channels) +
                                     " input channels, previous output is " + shape_to_string(current));
            }
            if (l.out_channels == 0 || l.kernel == 0 || l.stride == 0) {
                throw ValidationError(where + ": out/kernel/stride must be positive");
            }
            if (current[1] + 2 * l.padding < l.kernel || current[2] + 2 * l.padding < l.kernel) {
                throw DimensionError(where + ": kernel larger than padded input");
            }
            current = {l.out_channels, (current[1] + 2 * l.padding - l.kernel) / l.stride + 1,
                       (current[2] + 2 * l.padding - l.kernel) / l.stride + 1};
            break;
        }
        case LayerKind::linear: {
            if (l.name.empty()) throw ValidationError(where + ": linear needs a name");
            if (l.out_features == 0) throw ValidationError(where + ": out must be positive");
            if (!l.head.empty() && !in_heads) {
                in_heads = true;
                trunk_out = current;
            }
            const std::size_t expected_in = element_count(in_heads ? trunk_out : current);
            if (l.in_features != expected_in) {
                throw DimensionError(where + ": declares " + std::to_string(l.in_features) +
                                     " inputs, previous output has " + std::to_string(expected_in));
            }
            if (l.head == "mu") {
                ++mu_heads;
            } else if (l.head == "logvar") {
                ++logvar_heads;
            } else if (!l.head.empty()) {
                throw ValidationError(where + ": unknown head '" + l.head + "'");
            }
            if (!l.head.empty() && l.out_features != latent_dim) {
                throw DimensionError(where + ": head width " + std::to_string(l.out_features) +
                                     " differs from latent_dim " + std::to_string(latent_dim));
            }
            if (l.head.empty()) current = {l.out_features};
            break;
        }
        case LayerKind::activation:
            if (l.function != "leaky_relu") throw ValidationError(where + ": unsupported activation '" + l.function + "'");
            if (!(l.alpha >= 0.0f)) throw ValidationError(where + ": alpha must be nonnegative");
            if (in_heads) throw ValidationError(where + ": activations after the heads are not supported");
            break;
        }
    }
    if (mu_heads != 1 || logvar_heads != 1) {
        throw ValidationError("arch needs exactly one mu head and one logvar head");
    }
    return trunk_out;
}

ArchSpec reference_arch() {
    ArchSpec arch;
    arch.input_shape = {4, 32, 32};
    arch.latent_dim = 128;
    const std::size_t channels[] = {4, 32, 64, 128, 256};
    for (std::size_t i = 0; i < 4; ++i) {
        LayerSpec conv;
        conv.kind = LayerKind::conv2d;
        conv.name = "enc.conv" + std::to_string(i + 1);
        conv.in_channels = channels[i];
        conv.out_channels = channels[i + 1];
        conv.kernel = 3;
        conv.stride = 2;
        conv.padding = 1;
        arch.layers.push_back(conv);

        LayerSpec act;
        act.kind = LayerKind::activation;
        act.function = "leaky_relu";
        act.alpha = 0.01f;
        arch.layers.push_back(act);
    }
    for (const char* head : {"mu", "logvar"}) {
        LayerSpec fc;
        fc.kind = LayerKind::linear;
        fc.name = std::string("enc.fc_") + head;
        fc.in_features = 256 * 2 * 2;
        fc.out_features = 128;
        fc.head = head;
        arch.layers.push_back(fc);
    }
    return arch;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ArchSpec& arch) {
    std::vector<std::pair<std::string, Shape>> out;
    for (const auto& l : arch.layers) {
        if (l.kind == LayerKind::conv2d) {
            out.emplace_back(l.name + ".weight", Shape{l.out_channels, l.in_channels, l.kernel, l.kernel});
            out.emplace_back(l.name + ".bias", Shape{l.out_channels});
        } else if (l.kind == LayerKind::linear) {
            out.emplace_back(l.name + ".weight", Shape{l.out_features, l.in_features});
            out.emplace_back(l.name + ".bias", Shape{l.out_features});
        }
    }
    return out;
}

namespace {

std::string float_text(float v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::size_t parse_size(const std::string& s, const std::string& where) {
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError(where + ": expected a nonnegative integer, got '" + s + "'");
    }
    return v;
}

float parse_float(const std::string& s, const std::string& where) {
    float v = 0.0f;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ValidationError(where + ": expected a number, got '" + s + "'");
    }
    return v;
}

class Fields {
public:
    Fields(std::map<std::string, std::string> kv, std::string where) : kv_(std::move(kv)), where_(std::move(where)) {}

    const std::string& str(const std::string& key) {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw ValidationError(where_ + ": missing field '" + key + "'");
        used_.push_back(key);
        return it->second;
    }

    std::string str_or(const std::string& key, const std::string& fallback) {
        return kv_.count(key) ? str(key) : fallback;
    }

    std::size_t size(const std::string& key) { return parse_size(str(key), where_ + " field " + key); }
    float real(const std::string& key) { return parse_float(str(key), where_ + " field " + key); }

    void finish() const {
        for (const auto& [k, v] : kv_) {
            if (std::find(used_.begin(), used_.end(), k) == used_.end()) {
                throw ValidationError(where_ + ": unknown field '" + k + "'");
            }
        }
    }

private:
    std::map<std::string, std::string> kv_;
    std::vector<std::string> used_;
    std::string where_;
};

}  // namespace

std::string format_arch(const ArchSpec& arch) {
    std::ostringstream os;
    os << "# onboard encoder architecture v1\n";
    os << "input shape=";
    for (std::size_t i = 0; i < arch.input_shape.size(); ++i) os << (i ? "," : "") << arch.input_shape[i];
    os << "\nlatent_dim value=" << arch.latent_dim << '\n';
    for (const auto& l : arch.layers) {
        switch (l.kind) {
        case LayerKind::conv2d:
            os << "conv2d name=" << l.name << " in=" << l.in_channels << " out=" << l.out_channels
               << " kernel=" << l.kernel << " stride=" << l.stride << " padding=" << l.padding << '\n';
            break;
        case LayerKind::linear:
            os << "linear name=" << l.name << " in=" << l.in_features << " out=" << l.out_features;
            if (!l.head.empty()) os << " head=" << l.head;
            os << '\n';
            break;
        case LayerKind::activation:
            os << "activation fn=" << l.function << " alpha=" << float_text(l.alpha) << '\n';
            break;
        }
    }
    return os.str();
}

ArchSpec parse_arch(const std::string& text) {
    ArchSpec arch;
    bool have_input = false, have_latent = false;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        std::istringstream tokens(line);
        std::string keyword, token;
        tokens >> keyword;
        const std::string where = "arch line " + std::to_string(line_no);
        std::map<std::string, std::string> kv;
        while (tokens >> token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos || eq == 0) throw ValidationError(where + ": expected key=value, got '" + token + "'");
            if (!kv.emplace(token.substr(0, eq), token.substr(eq + 1)).second) {
                throw ValidationError(where + ": repeated field '" + token.substr(0, eq) + "'");
            }
        }
        Fields f(std::move(kv), where);

        if (keyword == "input") {
            std::istringstream dims(f.str("shape"));
            std::string d;
            arch.input_shape.clear();
            while (std::getline(dims, d, ',')) arch.input_shape.push_back(parse_size(d, where));
            have_input = true;
        } else if (keyword == "latent_dim") {
            arch.latent_dim = f.size("value");
            have_latent = true;
        } else if (keyword == "conv2d") {
            LayerSpec l;
            l.kind = LayerKind::conv2d;
            l.name = f.str("name");
            l.in_channels = f.size("in");
            l.out_channels = f.size("out");
            l.kernel = f.size("kernel");
            l.stride = f.size("stride");
            l.padding = f.size("padding");
            arch.layers.push_back(std::move(l));
        } else if (keyword == "linear") {
            LayerSpec l;
            l.kind = LayerKind::linear;
            l.name = f.str("name");
            l.in_features = f.size("in");
            l.out_features = f.size("out");
            l.head = f.str_or("head", "");
            arch.layers.push_back(std::move(l));
        } else if (keyword == "activation") {
            LayerSpec l;
            l.kind = LayerKind::activation;
            l.function = f.str("fn");
            l.alpha = f.real("alpha");
            arch.layers.push_back(std::move(l));
        } else {
            throw ValidationError(where + ": unknown keyword '" + keyword + "'");
        }
        f.finish();
    }
    if (!have_input || !have_latent) throw ValidationError("arch manifest needs 'input' and 'latent_dim' lines");
    arch.validate();
    return arch;
}

void save_arch(const ArchSpec& arch, const std::filesystem::path& path) {
    detail::write_text(path, format_arch(arch));
}

ArchSpec load_arch(const std::filesystem::path& path) {
    return parse_arch(detail::read_text(path));
}

// ---------------------------------------------------------------------------

BoundModel bind(const WeightSet& ws, const ArchSpec& arch) {
    arch.validate();
    BoundModel model;
    model.arch_ = arch;

    auto fetch = [&](const std::string& layer, const std::string& param, const Shape& expected) -> const Tensor& {
        const std::string name = layer + "." + param;
        const auto* entry = ws.find(name);
        if (!entry) throw ValidationError("missing weight entry '" + name + "' for layer " + layer);
        if (entry->value.shape() != expected) {
            throw DimensionError("layer " + layer + ": entry '" + name + "' has shape " +
                                 shape_to_string(entry->value.shape()) + ", architecture expects " +
                                 shape_to_string(expected));
        }
        return entry->value;
    };

    for (const auto& l : arch.layers) {
        BoundLayer bl;
        bl.spec = l;
        if (l.kind == LayerKind::conv2d) {
            bl.weight = fetch(l.name, "weight", {l.out_channels, l.in_channels, l.kernel, l.kernel});
            const auto& b = fetch(l.name, "bias", {l.out_channels});
            bl.bias.assign(b.data().begin(), b.data().end());
        } else if (l.kind == LayerKind::linear) {
            bl.weight = fetch(l.name, "weight", {l.out_features, l.in_features});
            const auto& b = fetch(l.name, "bias", {l.out_features});
            bl.bias.assign(b.data().begin(), b.data().end());
        }
        if (l.head == "mu") {
            model.mu_head_ = std::move(bl);
        } else if (l.head == "logvar") {
            model.logvar_head_ = std::move(bl);
        } else {
            model.trunk_.push_back(std::move(bl));
        }
    }
    return model;
}

}  // namespace onboard
