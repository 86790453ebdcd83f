#include <doctest.h>

#include <cmath>
#include <memory>

#include "onboard/encoder.hpp"
#include "onboard/error.hpp"
#include "onboard/fixtures.hpp"
#include "oracles.hpp"

using namespace onboard;

namespace {

const WeightSet& pinned_weights() {
    static const WeightSet ws = fixtures::gen_weights(fixtures::kReferenceWeightSeed);
    return ws;
}

const BoundModel& pinned_model() {
    static const BoundModel model = bind(pinned_weights(), reference_arch());
    return model;
}

std::vector<NormalizedTile> random_tiles(std::uint64_t seed, std::size_t n) {
    SeededRng rng(seed);
    std::vector<NormalizedTile> tiles;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor px({4, 32, 32});
        for (auto& v : px.data()) v = static_cast<float>(rng.uniform());
        tiles.push_back({{i / 15, i % 15}, std::move(px)});
    }
    return tiles;
}

std::vector<float> as_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("latents are 128-dimensional and deterministic") {
    const auto tiles = random_tiles(1, 3);
    for (const auto& t : tiles) {
        const auto a = encode_tile(t, pinned_model());
        CHECK(a.mu.size() == kLatentDim);
        CHECK(a.logvar.size() == kLatentDim);
        CHECK(a.index == t.index);
        for (std::size_t i = 0; i < kLatentDim; ++i) {
            CHECK(std::isfinite(a.mu[i]));
            CHECK(a.logvar[i] >= kLogvarMin);
            CHECK(a.logvar[i] <= kLogvarMax);
        }
        CHECK(encode_tile(t, pinned_model()) == a);
    }
}

TEST_CASE("all-zeros tile propagates biases like the naive forward pass") {
    const NormalizedTile zero{{0, 0}, Tensor({4, 32, 32})};
    const auto lat = encode_tile(zero, pinned_model());
    const auto ref = oracle::reference_forward(pinned_weights(), as_vec(zero.pixels));
    for (std::size_t i = 0; i < kLatentDim; ++i) {
        CHECK(std::fabs(lat.mu[i] - ref.mu[i]) < 1e-5);
        CHECK(std::fabs(lat.logvar[i] - ref.logvar[i]) < 1e-5);
    }
}

TEST_CASE("reference backend agrees with the naive forward pass") {
    const auto tiles = random_tiles(2, 12);
    const auto out = encode_batch(tiles, pinned_model(), 5);
    REQUIRE(out.latents.size() == tiles.size());
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const auto ref = oracle::reference_forward(pinned_weights(), as_vec(tiles[t].pixels));
        for (std::size_t i = 0; i < kLatentDim; ++i) REQUIRE(std::fabs(out.latents[t].mu[i] - ref.mu[i]) < 1e-4);
    }
}

TEST_CASE("225 tiles at batch 64 make four batches") {
    const auto tiles = random_tiles(3, 225);
    const auto out = encode_batch(tiles, pinned_model(), 64);
    CHECK(out.latents.size() == 225);
    REQUIRE(out.timings.size() == 4);
    const std::size_t expected[] = {64, 64, 64, 33};
    for (std::size_t b = 0; b < 4; ++b) {
        CHECK(out.timings[b].batch_index == b);
        CHECK(out.timings[b].tile_count == expected[b]);
        CHECK(out.timings[b].duration_s >= 0.0);
    }
    for (std::size_t i = 0; i < 225; ++i) CHECK(out.latents[i].index == tiles[i].index);
}

TEST_CASE("batch size and thread count do not change latents") {
    const auto tiles = random_tiles(4, 40);
    std::vector<Latent> single;
    for (const auto& t : tiles) single.push_back(encode_tile(t, pinned_model()));
    for (std::size_t bs : {1u, 7u, 64u}) CHECK(encode_batch(tiles, pinned_model(), bs).latents == single);

    const ReferenceBackend backend(std::make_shared<const BoundModel>(pinned_model()));
    CHECK(backend.name() == "reference-cpu");
    for (std::size_t threads : {2u, 3u, 8u}) {
        EncodeOptions opts;
        opts.batch_size = 16;
        opts.threads = threads;
        CHECK(encode_batch(tiles, backend, opts).latents == single);
    }
}

TEST_CASE("empty input and bad arguments") {
    const auto out = encode_batch({}, pinned_model(), 64);
    CHECK(out.latents.empty());
    CHECK(out.timings.empty());
    CHECK_THROWS_AS(encode_batch(random_tiles(5, 1), pinned_model(), 0), ValidationError);
    const NormalizedTile wrong{{0, 0}, Tensor({3, 32, 32})};
    CHECK_THROWS_AS(encode_tile(wrong, pinned_model()), DimensionError);
}

TEST_CASE("on_batch hook runs once per batch") {
    const auto tiles = random_tiles(6, 10);
    const ReferenceBackend backend(std::make_shared<const BoundModel>(pinned_model()));
    std::vector<std::size_t> seen;
    EncodeOptions opts;
    opts.batch_size = 4;
    opts.on_batch = [&](std::size_t b) { seen.push_back(b); };
    encode_batch(tiles, backend, opts);
    CHECK(seen == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("reparameterize") {
    Latent lat;
    SeededRng init(8);
    for (std::size_t i = 0; i < kLatentDim; ++i) {
        lat.mu.push_back(static_cast<float>(init.normal()));
        lat.logvar.push_back(kLogvarMin);
    }
    // At the floor sigma = exp(-10) ~ 4.5e-5, so 1e-4 is a 2.2-sigma band on
    // each element; judge the vector by its RMS deviation and bound every
    // element at 5 sigma.
    SeededRng rng(1);
    const auto z = reparameterize(lat, rng);
    const double floor_sigma = std::exp(0.5 * kLogvarMin);
    double sq = 0.0;
    for (std::size_t i = 0; i < kLatentDim; ++i) {
        const double d = z[i] - lat.mu[i];
        sq += d * d;
        CHECK(std::fabs(d) < 5.0 * floor_sigma);
    }
    CHECK(std::sqrt(sq / kLatentDim) < 1e-4);

    for (auto& v : lat.logvar) v = static_cast<float>(init.normal());
    SeededRng r1(77), r2(77);
    CHECK(reparameterize(lat, r1) == reparameterize(lat, r2));

    const std::size_t n = 100000;
    std::vector<double> mean(kLatentDim, 0.0);
    SeededRng mc(123);
    for (std::size_t d = 0; d < n; ++d) {
        const auto s = reparameterize(lat, mc);
        for (std::size_t i = 0; i < kLatentDim; ++i) mean[i] += s[i];
    }
    // 128 independent 3-sigma checks: about 0.35 exceedances are expected by
    // chance, more than 3 has probability ~5e-4. Nothing may pass 4.5 sigma.
    std::size_t beyond3 = 0;
    for (std::size_t i = 0; i < kLatentDim; ++i) {
        const double se = std::exp(0.5 * lat.logvar[i]) / std::sqrt(static_cast<double>(n));
        const double err = std::fabs(mean[i] / n - lat.mu[i]);
        beyond3 += err >= 3.0 * se;
        CHECK(err < 4.5 * se);
    }
    CHECK(beyond3 <= 3);
}

TEST_CASE("latent files") {
    const auto tiles = random_tiles(9, 4);
    LatentGrid grid{2, 2, 3, encode_batch(tiles, pinned_model(), 64).latents};
    for (std::size_t i = 0; i < 4; ++i) grid.cells[i].index = {i / 2, i % 2};
    const auto csv = format_latent_csv(grid);
    CHECK(csv.rfind("row,col,mu0,mu1,", 0) == 0);
    CHECK(csv.find("mu127\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

    const auto dir = oracle::temp_dir("lat");
    write_latent_rvwt(grid, dir / "g.rvwt");
    const auto ws = load_weights(dir / "g.rvwt");
    REQUIRE(ws.find("latent.mu") != nullptr);
    CHECK(ws.find("latent.mu")->value.shape() == Shape{4, 128});
    CHECK(ws.find("latent.index")->value.shape() == Shape{4, 2});
    CHECK(ws.find("latent.mu")->value[128] == grid.cells[1].mu[0]);
}
