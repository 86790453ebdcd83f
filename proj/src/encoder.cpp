#include "onboard/encoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "byte_io.hpp"
#include "onboard/error.hpp"
#include "text_util.hpp"

namespace onboard {

namespace {

Latent forward(const NormalizedTile& tile, const BoundModel& model) {
    const auto& arch = model.arch();
    if (tile.pixels.shape() != arch.input_shape) {
        throw DimensionError("tile shape " + shape_to_string(tile.pixels.shape()) + " does not match encoder input " +
                             shape_to_string(arch.input_shape));
    }
    Tensor x = tile.pixels;
    for (const auto& layer : model.trunk()) {
        switch (layer.spec.kind) {
        case LayerKind::conv2d:
            x = conv2d(x, layer.weight, layer.bias, layer.spec.stride, layer.spec.padding);
            break;
        case LayerKind::activation:
            x = leaky_relu(x, layer.spec.alpha);
            break;
        case LayerKind::linear:
            x = Tensor({layer.spec.out_features}, linear(x.data(), layer.weight, layer.bias));
            break;
        }
    }
    Latent out;
    out.index = tile.index;
    out.mu = linear(x.data(), model.mu_head().weight, model.mu_head().bias);
    out.logvar = linear(x.data(), model.logvar_head().weight, model.logvar_head().bias);
    for (auto& v : out.logvar) v = std::clamp(v, kLogvarMin, kLogvarMax);
    return out;
}

}  // namespace

ReferenceBackend::ReferenceBackend(std::shared_ptr<const BoundModel> model) : model_(std::move(model)) {
    if (!model_) throw ValidationError("reference backend needs a bound model");
}

std::vector<Latent> ReferenceBackend::encode(std::span<const NormalizedTile> tiles, std::size_t threads) const {
    std::vector<Latent> out(tiles.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tiles.size(), 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < tiles.size(); ++i) out[i] = forward(tiles[i], *model_);
        return out;
    }
    // Each worker owns a strided subset of output slots.
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < tiles.size(); i += workers) out[i] = forward(tiles[i], *model_);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

Latent encode_tile(const NormalizedTile& tile, const BoundModel& model) {
    return forward(tile, model);
}

EncodeResult encode_batch(std::span<const NormalizedTile> tiles, const EncoderBackend& backend,
                          const EncodeOptions& options) {
    if (options.batch_size == 0) throw ValidationError("batch size must be at least 1");
    EncodeResult result;
    result.latents.reserve(tiles.size());
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < tiles.size(); start += options.batch_size, ++batch_index) {
        const std::size_t count = std::min(options.batch_size, tiles.size() - start);
        const auto t0 = std::chrono::steady_clock::now();
        if (options.on_batch) options.on_batch(batch_index);
        auto latents = backend.encode(tiles.subspan(start, count), options.threads);
        const auto t1 = std::chrono::steady_clock::now();
        for (auto& l : latents) result.latents.push_back(std::move(l));
        result.timings.push_back({batch_index, count, std::chrono::duration<double>(t1 - t0).count()});
    }
    return result;
}

EncodeResult encode_batch(std::span<const NormalizedTile> tiles, const BoundModel& model, std::size_t batch_size) {
    // Non-owning alias; the backend does not outlive this call.
    ReferenceBackend backend(std::shared_ptr<const BoundModel>(&model, [](const BoundModel*) {}));
    EncodeOptions options;
    options.batch_size = batch_size;
    return encode_batch(tiles, backend, options);
}

std::vector<float> reparameterize(const Latent& latent, SeededRng& rng) {
    if (latent.mu.size() != latent.logvar.size()) throw DimensionError("latent mu/logvar length mismatch");
    std::vector<float> z(latent.mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double lv = std::clamp(latent.logvar[i], kLogvarMin, kLogvarMax);
        z[i] = static_cast<float>(latent.mu[i] + std::exp(lv / 2.0) * rng.normal());
    }
    return z;
}

std::string format_latent_csv(const LatentGrid& grid) {
    std::string out = "row,col";
    const std::size_t dim = grid.cells.empty() ? kLatentDim : grid.cells.front().mu.size();
    for (std::size_t i = 0; i < dim; ++i) out += ",mu" + std::to_string(i);
    out += '\n';
    for (const auto& cell : grid.cells) {
        out += std::to_string(cell.index.row);
        out += ',';
        out += std::to_string(cell.index.col);
        for (float v : cell.mu) {
            out += ',';
            detail::append_number(out, v);
        }
        out += '\n';
    }
    return out;
}

void write_latent_csv(const LatentGrid& grid, const std::filesystem::path& path) {
    detail::write_text(path, format_latent_csv(grid));
}

void write_latent_rvwt(const LatentGrid& grid, const std::filesystem::path& path) {
    const std::size_t n = grid.cells.size();
    if (n == 0) throw ValidationError("cannot write an empty latent grid");
    const std::size_t dim = grid.cells.front().mu.size();
    std::vector<float> index, mu, logvar;
    for (const auto& c : grid.cells) {
        index.push_back(static_cast<float>(c.index.row));
        index.push_back(static_cast<float>(c.index.col));
        mu.insert(mu.end(), c.mu.begin(), c.mu.end());
        logvar.insert(logvar.end(), c.logvar.begin(), c.logvar.end());
    }
    WeightSet ws;
    ws.add("latent.index", Tensor({n, 2}, std::move(index)));
    ws.add("latent.mu", Tensor({n, dim}, std::move(mu)));
    ws.add("latent.logvar", Tensor({n, dim}, std::move(logvar)));
    save_weights(ws, path);
}

}  // namespace onboard
