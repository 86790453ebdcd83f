// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>

#include "onboard/bench.hpp"
#include "onboard/change_detect.hpp"
#include "onboard/encoder.hpp"
#include "onboard/error.hpp"
#include "onboard/fewshot.hpp"
#include "onboard/fixtures.hpp"
#include "onboard/ingest.hpp"
#include "onboard/model_io.hpp"
#include "oracles.hpp"

using namespace onboard;

namespace {

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail << "failed: " << what << "; ";
        }
    }
};

const WeightSet& pinned_weights() {
    static const WeightSet ws = fixtures::gen_weights(fixtures::kReferenceWeightSeed);
    return ws;
}

const BoundModel& pinned_model() {
    static const BoundModel m = bind(pinned_weights(), reference_arch());
    return m;
}

std::vector<std::byte> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<char> c((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(c.size());
    if (!c.empty()) std::memcpy(out.data(), c.data(), c.size());
    return out;
}

// 1 ------------------------------------------------------------------------
void tile_counts(Outcome& o) {
    const auto grid = tile_scene(normalize(fixtures::gen_scene(1)));
    o.require(grid.tiles.size() == 225, "480x480x4 scene gives 225 tiles");
    o.require(grid.rows == 15 && grid.cols == 15, "15x15 grid");

    SeededRng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        Scene s;
        s.bands = 1 + rng.below(4);
        s.height = 32 + rng.below(400);
        s.width = 32 + rng.below(400);
        s.data.assign(s.bands * s.height * s.width, 0.5f);
        const auto g = tile_scene(s);
        o.require(g.tiles.size() == (s.height / 32) * (s.width / 32) && g.rows == s.height / 32 &&
                      g.cols == s.width / 32,
                  "tile count floor(H/32)*floor(W/32) for H=" + std::to_string(s.height) +
                      " W=" + std::to_string(s.width));
    }
    o.detail << "225 tiles; 200 random geometries";
}

// 2 ------------------------------------------------------------------------
void encoder_oracle(Outcome& o) {
    SeededRng rng(202);
    std::vector<NormalizedTile> tiles;
    for (std::size_t i = 0; i < 100; ++i) {
        Tensor px({4, 32, 32});
        for (auto& v : px.data()) v = static_cast<float>(rng.uniform());
        tiles.push_back({{i / 10, i % 10}, std::move(px)});
    }
    const auto batched = encode_batch(tiles, pinned_model(), 64).latents;
    double worst = 0.0;
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const auto ref = oracle::reference_forward(
            pinned_weights(), {tiles[t].pixels.data().begin(), tiles[t].pixels.data().end()});
        for (std::size_t i = 0; i < kLatentDim; ++i) {
            worst = std::max(worst, std::fabs(batched[t].mu[i] - ref.mu[i]));
            worst = std::max(worst, std::fabs(batched[t].logvar[i] - ref.logvar[i]));
        }
    }
    o.require(worst <= 1e-5, "max |engine - oracle| <= 1e-5");
    for (std::size_t bs : {1u, 7u, 100u}) {
        o.require(encode_batch(tiles, pinned_model(), bs).latents == batched,
                  "batch " + std::to_string(bs) + " bitwise equal to batch 64");
    }
    const ReferenceBackend backend(std::make_shared<const BoundModel>(pinned_model()));
    EncodeOptions threaded;
    threaded.threads = 4;
    o.require(encode_batch(tiles, backend, threaded).latents == batched, "4 threads bitwise equal");
    o.detail << "max abs error " << worst << " over 100 tiles";
}

// 3 ------------------------------------------------------------------------
void gradient_check(Outcome& o) {
    const auto data = fixtures::gen_latent_dataset(303, 400, 3.0).train;
    SeededRng rng(304);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Classifier c;
        const double sd = 0.02 + 0.2 * rng.uniform();
        for (auto& w : c.w) w = static_cast<float>(rng.normal(0.0, sd));
        c.b = static_cast<float>(rng.normal(0.0, 1.0));
        std::vector<std::size_t> idx(1 + rng.below(64));
        for (auto& i : idx) i = rng.below(data.size());
        const auto g = batch_gradient(c, data, idx);
        const auto fd = oracle::fd_gradient(c, data, idx, 1e-3);
        for (std::size_t j = 0; j < kFeatureDim; ++j) worst = std::max(worst, oracle::rel_error(g.dw[j], fd[j]));
        worst = std::max(worst, oracle::rel_error(g.db, fd[128]));
    }
    o.require(worst < 1e-4, "relative error < 1e-4 on every coordinate");
    o.detail << "max relative error " << worst << " over 100 instances x 129 coordinates";
}

// 4 ------------------------------------------------------------------------
void classifier_quality(Outcome& o) {
    const auto ds = fixtures::gen_latent_dataset(42, 1305, 8.0);
    o.require(ds.train.size() == 1305, "1305 training samples");
    const auto fit = train(Classifier{}, ds.train, TrainConfig{});
    const auto m = evaluate(fit.classifier, ds.eval, 0.5f);
    o.require(m.auprc >= 0.97, "AUPRC >= 0.97");
    o.require(m.f1 >= 0.95, "F1 >= 0.95");
    o.detail << "auprc " << m.auprc << ", f1 " << m.f1 << ", precision " << m.precision << ", recall " << m.recall;
}

// 5 ------------------------------------------------------------------------
LatentGrid encode_scene(const Scene& s) {
    const auto grid = tile_scene(normalize(s));
    return {grid.rows, grid.cols, s.acquisition_index, encode_batch(grid.tiles, pinned_model(), 64).latents};
}

void change_ranking(Outcome& o) {
    const auto pair = fixtures::gen_scene_pair(505, 5);
    const LatentGrid before[] = {encode_scene(pair.before)};
    const auto map = change_map(before, encode_scene(pair.after));
    const auto top = rank_tiles(map, 5);
    std::set<TileIndex> got, want(pair.changed.begin(), pair.changed.end());
    for (const auto& t : top) got.insert({t.row, t.col});
    o.require(want.size() == 5, "5 perturbed tiles");
    o.require(got == want, "top-5 equals the perturbed set");

    const auto same = fixtures::gen_scene_pair(506, 0);
    const LatentGrid prior[] = {encode_scene(same.before)};
    const auto flat = change_map(prior, encode_scene(same.after));
    const float worst = *std::max_element(flat.scores.begin(), flat.scores.end());
    o.require(worst < 1e-6f, "identical scenes score < 1e-6");
    o.detail << "5th score " << top.back().score << " vs 6th " << rank_tiles(map, 6).back().score
             << "; identical-scene max " << worst;
}

// 6 ------------------------------------------------------------------------
void metric_oracles(Outcome& o) {
    SeededRng rng(606);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        std::vector<double> s(n);
        std::vector<std::uint8_t> l(n);
        const bool ties = rng.below(2) == 0;
        for (auto& v : s) v = ties ? static_cast<double>(rng.below(8)) / 7.0 : rng.uniform();
        for (auto& v : l) v = static_cast<std::uint8_t>(rng.below(2));
        l[rng.below(n)] = 1;
        worst = std::max(worst, std::fabs(auprc(s, l) - oracle::auprc_bruteforce(s, l)));
    }
    o.require(worst <= 1e-9, "auprc within 1e-9 of brute force");

    // Every confusion matrix with each count in 0..3: samples +1 / -1 on f0
    // with a unit weight put the prediction on the right side of 0.5.
    std::size_t cases = 0;
    for (std::size_t tp = 0; tp <= 3; ++tp)
        for (std::size_t fp = 0; fp <= 3; ++fp)
            for (std::size_t tn = 0; tn <= 3; ++tn)
                for (std::size_t fn = 0; fn <= 3; ++fn) {
                    if (tp + fp + tn + fn == 0) continue;
                    LabeledLatentSet set;
                    std::vector<float> mu(kFeatureDim, 0.0f);
                    auto add = [&](std::size_t count, float x, std::uint8_t y) {
                        mu[0] = x;
                        for (std::size_t i = 0; i < count; ++i) set.push_back(mu, y);
                    };
                    add(tp, 1.0f, 1);
                    add(fp, 1.0f, 0);
                    add(tn, -1.0f, 0);
                    add(fn, -1.0f, 1);
                    Classifier c;
                    c.w[0] = 1.0f;
                    const auto m = evaluate(c, set, 0.5f);
                    const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
                    const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
                    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
                    const bool match = m.tp == tp && m.fp == fp && m.tn == tn && m.fn == fn &&
                                       std::fabs(m.precision - p) < 1e-12 && std::fabs(m.recall - r) < 1e-12 &&
                                       std::fabs(m.f1 - f1) < 1e-12;
                    o.require(match, "confusion matrix tp=" + std::to_string(tp) + " fp=" + std::to_string(fp) +
                                         " tn=" + std::to_string(tn) + " fn=" + std::to_string(fn));
                    ++cases;
                }
    o.detail << "auprc max error " << worst << " over 1000 sets; " << cases << " confusion matrices";
}

// 7 ------------------------------------------------------------------------
SummaryStats recompute(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    SummaryStats s;
    s.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    const std::size_t n = v.size();
    s.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    std::size_t rank = 1;
    while (rank * 100 < 95 * n) ++rank;
    s.p95 = v[rank - 1];
    s.max = v.back();
    return s;
}

bool stats_match(const SummaryStats& a, const SummaryStats& b) {
    // The mean is order-sensitive in floating point; allow one rounding step.
    return a.count == b.count && a.median == b.median && a.p95 == b.p95 && a.max == b.max &&
           std::fabs(a.mean - b.mean) <= 1e-15 * std::max(1.0, std::fabs(b.mean));
}

void inference_bench(Outcome& o) {
    const auto dir = oracle::temp_dir("accept_bench");
    std::vector<std::filesystem::path> paths;
    for (std::uint32_t i = 0; i < 3; ++i) {
        paths.push_back(dir / ("pass" + std::to_string(i) + ".rvsc"));
        save_scene(fixtures::gen_scene(700 + i, 480, 480, 4, i), paths.back());
    }
    const ReferenceBackend backend(std::make_shared<const BoundModel>(pinned_model()));
    InferenceBenchConfig cfg;
    cfg.batch_size = 64;
    const auto result = bench_inference(paths, backend, cfg);
    const auto& r = result.report;
    o.require(r.batches.size() == 12, "12 per-batch records");
    for (const auto& p : paths) {
        const auto id = p.filename().string();
        std::set<Phase> phases;
        std::size_t count = 0;
        for (const auto& rec : r.phases)
            if (rec.file_id == id) {
                phases.insert(rec.phase);
                ++count;
            }
        o.require(count == 4 && phases.size() == 4, "4 phase records for " + id);
    }
    for (const char* phase : {"load", "tile", "encode", "compare"}) {
        std::vector<double> v;
        for (const auto& rec : r.phases)
            if (to_string(rec.phase) == std::string(phase)) v.push_back(rec.duration_s);
        o.require(r.summary.count(phase) && stats_match(r.summary.at(phase), recompute(v)),
                  std::string("summary for ") + phase);
    }
    std::vector<double> b;
    for (const auto& rec : r.batches) b.push_back(rec.duration_s);
    o.require(r.summary.count("encode_batch") && stats_match(r.summary.at("encode_batch"), recompute(b)),
              "summary for encode batches");
    const auto& enc = r.summary.at("encode");
    const auto& bat = r.summary.at("encode_batch");
    o.detail << "encode per file mean " << enc.mean << " s (max " << enc.max << "), batch mean " << bat.mean
             << " s, p95 " << bat.p95 << " s";
}

// 8 ------------------------------------------------------------------------
void file_formats(Outcome& o) {
    const auto dir = oracle::temp_dir("accept_io");
    const auto& ws = pinned_weights();
    save_weights(ws, dir / "w.rvwt");
    const auto back = load_weights(dir / "w.rvwt");
    bool exact = back.size() == ws.size();
    for (std::size_t i = 0; exact && i < ws.size(); ++i) {
        const auto& a = ws.entries()[i].value;
        const auto& b = back.entries()[i].value;
        exact = ws.entries()[i].name == back.entries()[i].name && a.shape() == b.shape() &&
                std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
    }
    o.require(exact, ".rvwt payload bit-exact");
    o.require(serialize_weights(back) == file_bytes(dir / "w.rvwt"), ".rvwt bytes reproduce");

    const auto scene = fixtures::gen_scene(808, 96, 128, 4, 3);
    save_scene(scene, dir / "s.rvsc");
    const auto sback = load_scene(dir / "s.rvsc");
    o.require(sback.bands == scene.bands && sback.height == scene.height && sback.width == scene.width &&
                  sback.acquisition_index == scene.acquisition_index &&
                  std::memcmp(&sback.gsd_m, &scene.gsd_m, sizeof(float)) == 0 &&
                  std::memcmp(sback.data.data(), scene.data.data(), scene.data.size() * sizeof(float)) == 0,
              ".rvsc bit-exact");
    o.require(serialize_scene(sback) == file_bytes(dir / "s.rvsc"), ".rvsc bytes reproduce");

    WeightSet small;
    small.add("a.weight", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    small.add("a.bias", Tensor({2}, {0.5f, -0.5f}));
    const auto wgood = serialize_weights(small);
    const auto sgood = serialize_scene(fixtures::gen_scene(809, 32, 64, 2));
    SeededRng rng(810);
    auto mutate = [&](std::vector<std::byte> bytes) {
        switch (rng.below(4)) {
        case 0: {  // random bytes, sometimes behind a valid magic
            bytes.assign(rng.below(160), std::byte{0});
            for (auto& b : bytes) b = static_cast<std::byte>(rng.below(256));
            break;
        }
        case 1:  // flips anywhere
            for (std::size_t f = 1 + rng.below(6); f > 0 && !bytes.empty(); --f)
                bytes[rng.below(bytes.size())] = static_cast<std::byte>(rng.below(256));
            break;
        case 2:  // flips inside the header region
            for (std::size_t f = 1 + rng.below(3); f > 0; --f)
                bytes[rng.below(std::min<std::size_t>(40, bytes.size()))] = static_cast<std::byte>(rng.below(256));
            break;
        default:  // truncation or extension
            if (rng.below(2)) {
                bytes.resize(rng.below(bytes.size() + 1));
            } else {
                for (std::size_t k = 1 + rng.below(8); k > 0; --k) bytes.push_back(static_cast<std::byte>(rng.below(256)));
            }
        }
        return bytes;
    };
    std::size_t wrejected = 0, srejected = 0, unexpected = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        try {
            parse_weights(mutate(wgood));
        } catch (const FormatError&) {
            ++wrejected;
        } catch (...) {
            ++unexpected;
        }
        try {
            parse_scene(mutate(sgood));
        } catch (const FormatError&) {
            ++srejected;
        } catch (...) {
            ++unexpected;
        }
    }
    o.require(unexpected == 0, "fuzzed input only ever raises FormatError");
    o.detail << "10000 fuzz cases per loader; rejected " << wrejected << " weight and " << srejected << " scene inputs";
}

// 9 ------------------------------------------------------------------------
void pipeline_run(const std::filesystem::path& dir, std::uint64_t seed) {
    const auto pair = fixtures::gen_scene_pair(seed, 5);
    save_scene(pair.before, dir / "a.rvsc");
    save_scene(pair.after, dir / "b.rvsc");
    save_weights(fixtures::gen_weights(seed), dir / "w.rvwt");

    const auto model = bind(load_weights(dir / "w.rvwt"), reference_arch());
    std::vector<LatentGrid> grids;
    for (const char* name : {"a", "b"}) {
        const auto scene = load_scene(dir / (std::string(name) + ".rvsc"));
        const auto tiles = tile_scene(normalize(scene));
        grids.push_back({tiles.rows, tiles.cols, scene.acquisition_index, encode_batch(tiles.tiles, model, 64).latents});
        write_latent_csv(grids.back(), dir / (std::string(name) + ".latents.csv"));
        write_latent_rvwt(grids.back(), dir / (std::string(name) + ".latents.rvwt"));
    }
    const auto map = change_map(std::span(grids).first(1), grids[1]);
    write_change_csv(map, dir / "change.csv");
    write_change_json(map, dir / "change.json");

    LabeledLatentSet labeled;
    for (const auto& cell : grids[1].cells) {
        const bool changed = std::find(pair.changed.begin(), pair.changed.end(), cell.index) != pair.changed.end();
        labeled.push_back(cell.mu, changed ? 1 : 0);
    }
    write_labeled_csv(dir / "labeled.csv", labeled);
    const auto reread = read_labeled_csv(dir / "labeled.csv");
    const auto fit = train(Classifier{}, reread.train, TrainConfig{20, 64, 0.1f, seed});
    save_classifier(fit.classifier, dir / "clf.rvwt");
}

void pipeline_determinism(Outcome& o) {
    const auto d1 = oracle::temp_dir("accept_run1"), d2 = oracle::temp_dir("accept_run2");
    pipeline_run(d1, 909);
    pipeline_run(d2, 909);
    std::size_t compared = 0;
    for (const char* f : {"a.latents.csv", "b.latents.csv", "a.latents.rvwt", "b.latents.rvwt", "change.csv",
                          "change.json", "labeled.csv", "clf.rvwt"}) {
        const auto x = file_bytes(d1 / f), y = file_bytes(d2 / f);
        o.require(!x.empty() && x == y, std::string(f) + " byte-identical");
        ++compared;
    }
    o.detail << compared << " output files byte-identical across runs";
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        double budget_s;
        std::function<void(Outcome&)> body;
    };
    const Criterion criteria[] = {
        {1, "tiling 480x480x4 -> 225 tiles, floor(H/32)*floor(W/32) property", 1.0, tile_counts},
        {2, "batched encoder vs naive forward oracle, 1e-5, bitwise batching invariance", 30.0, encoder_oracle},
        {3, "classifier gradients vs central differences (h=1e-3), rel err < 1e-4", 10.0, gradient_check},
        {4, "synthetic 1305-sample dataset, AUPRC >= 0.97 and F1 >= 0.95 at 0.5", 60.0, classifier_quality},
        {5, "scene pair with 5 perturbed tiles ranks them top-5; identical scenes < 1e-6", 30.0, change_ranking},
        {6, "auprc vs brute force (1e-9), precision/recall/F1 vs confusion matrices", 30.0, metric_oracles},
        {7, "inference bench: 12 batch records, 4 phases per file, summary recomputes", 60.0, inference_bench},
        {8, ".rvwt/.rvsc round-trip bit-exact, loaders survive 10^4 fuzz cases", 60.0, file_formats},
        {9, "two seeded pipeline runs give byte-identical outputs", 60.0, pipeline_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail << "exception: " << e.what();
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (elapsed >= c.budget_s) {
            o.ok = false;
            o.detail << "; over the " << c.budget_s << " s budget";
        }
        failed += !o.ok;
        std::printf("[%s] %d: %s (%.2f s) -- %s\n", o.ok ? "PASS" : "FAIL", c.id, c.title, elapsed, o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
