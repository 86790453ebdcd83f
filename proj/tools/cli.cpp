#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "onboard/bench.hpp"
#include "onboard/change_detect.hpp"
#include "onboard/encoder.hpp"
#include "onboard/error.hpp"
#include "onboard/fewshot.hpp"
#include "onboard/fixtures.hpp"
#include "onboard/ingest.hpp"
#include "onboard/model_io.hpp"

namespace onboard::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelOptions {
    std::string model;
    std::string arch;
    std::size_t batch_size = 64;
    std::size_t threads = 1;
    float divisor = kDefaultReflectanceDivisor;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
    cmd->add_option("--model", o.model, "Encoder weights (.rvwt)")->required();
    cmd->add_option("--arch", o.arch, "Architecture manifest (.arch); built-in reference encoder if omitted");
    cmd->add_option("--batch-size", o.batch_size, "Tiles per encoder batch")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--threads", o.threads, "Encoder worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--divisor", o.divisor, "Radiometric divisor, v -> clamp(v/divisor, 0, 1)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
}

std::shared_ptr<const BoundModel> load_model(const ModelOptions& o) {
    const ArchSpec arch = o.arch.empty() ? reference_arch() : load_arch(o.arch);
    return std::make_shared<const BoundModel>(bind(load_weights(o.model), arch));
}

std::string fmt_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", s);
    return buf;
}

std::string fmt_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct EncodedScene {
    std::string path;
    LatentGrid grid;
    std::vector<BatchTiming> timings;
};

EncodedScene encode_scene(const std::string& path, const ReferenceBackend& backend, const ModelOptions& o) {
    const Scene raw = load_scene(path);
    const TileGrid tiles = tile_scene(normalize(raw, o.divisor));
    EncodeOptions options;
    options.batch_size = o.batch_size;
    options.threads = o.threads;
    auto encoded = encode_batch(tiles.tiles, backend, options);
    return {path, LatentGrid{tiles.rows, tiles.cols, raw.acquisition_index, std::move(encoded.latents)},
            std::move(encoded.timings)};
}

void print_timing(std::ostream& out, const EncodedScene& s) {
    double total = 0.0, worst = 0.0;
    for (const auto& t : s.timings) {
        total += t.duration_s;
        worst = std::max(worst, t.duration_s);
    }
    out << s.path << ": " << s.grid.cells.size() << " tiles (" << s.grid.rows << "x" << s.grid.cols << "), "
        << s.timings.size() << " batches, encode " << fmt_seconds(total) << " s, slowest batch "
        << fmt_seconds(worst) << " s\n";
}

// ---------------------------------------------------------------------------

struct EncodeArgs {
    std::vector<std::string> scenes;
    ModelOptions model;
    std::string out_dir;
    std::string format = "csv";
};

void setup_encode(CLI::App& app, EncodeArgs& a) {
    auto* cmd = app.add_subcommand("encode", "Encode scenes into per-tile latents");
    cmd->add_option("scenes", a.scenes, "Scene files (.rvsc)")->required();
    add_model_options(cmd, a.model);
    cmd->add_option("--out-dir", a.out_dir, "Directory for <scene>.latents.csv / .latents.rvwt")->required();
    cmd->add_option("--format", a.format, "Latent file format")
        ->capture_default_str()
        ->check(CLI::IsMember({"csv", "rvwt"}));
}

int run_encode(const EncodeArgs& a, std::ostream& out) {
    const ReferenceBackend backend(load_model(a.model));
    fs::create_directories(a.out_dir);
    for (const auto& path : a.scenes) {
        const auto s = encode_scene(path, backend, a.model);
        const auto stem = fs::path(path).stem().string();
        if (a.format == "csv") {
            write_latent_csv(s.grid, fs::path(a.out_dir) / (stem + ".latents.csv"));
        } else {
            write_latent_rvwt(s.grid, fs::path(a.out_dir) / (stem + ".latents.rvwt"));
        }
        print_timing(out, s);
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct ChangeArgs {
    std::vector<std::string> scenes;
    ModelOptions model;
    std::size_t window = 3;
    std::string metric = "cosine";
    std::size_t k = 5;
    std::string out;
    std::string json;
};

void setup_change(CLI::App& app, ChangeArgs& a) {
    auto* cmd = app.add_subcommand("change", "Change map of the last scene against the previous ones");
    cmd->add_option("scenes", a.scenes, "Scene files in temporal order (at least 2)")->required();
    add_model_options(cmd, a.model);
    cmd->add_option("--window", a.window, "Previous acquisitions compared against")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--metric", a.metric, "Latent distance")
        ->capture_default_str()
        ->check(CLI::IsMember({"cosine", "euclidean"}));
    cmd->add_option("-k,--top", a.k, "Number of ranked tiles to print")->capture_default_str();
    cmd->add_option("--out", a.out, "Change map CSV (row,col,score)")->required();
    cmd->add_option("--json", a.json, "Also write the change map as JSON");
}

int run_change(const ChangeArgs& a, std::ostream& out) {
    if (a.scenes.size() < 2) throw UsageError("change needs at least 2 scenes");
    const ReferenceBackend backend(load_model(a.model));
    ChangeDetector detector(a.window, parse_change_metric(a.metric));
    std::optional<ChangeMap> map;
    for (const auto& path : a.scenes) {
        auto s = encode_scene(path, backend, a.model);
        print_timing(out, s);
        if (a.k < 1 || a.k > s.grid.cells.size()) {
            throw UsageError("-k must be between 1 and the tile count (" + std::to_string(s.grid.cells.size()) + ")");
        }
        map = detector.push(std::move(s.grid));
    }
    write_change_csv(*map, a.out);
    if (!a.json.empty()) write_change_json(*map, a.json);
    out << "top " << a.k << " changed tiles (row col score):\n";
    for (const auto& t : rank_tiles(*map, a.k)) {
        out << "  " << t.row << " " << t.col << " " << t.score << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string eval;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    float lr = 0.1f;
    unsigned long long seed = kDefaultSeed;
    float threshold = 0.5f;
    std::string out;
    std::string timings;
};

void setup_train(CLI::App& app, TrainArgs& a) {
    auto* cmd = app.add_subcommand("train", "Train the 129-parameter latent classifier");
    cmd->add_option("--data", a.data, "Labeled latent CSV (f0..f127,label[,split])")->required();
    cmd->add_option("--eval", a.eval, "Separate evaluation CSV; otherwise rows tagged eval, else the training rows");
    cmd->add_option("--epochs", a.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", a.batch_size, "Samples per SGD step")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--lr", a.lr, "SGD learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "Shuffling seed")->capture_default_str();
    cmd->add_option("--threshold", a.threshold, "Decision threshold for precision/recall")
        ->capture_default_str()
        ->check(CLI::Range(0.0f, 1.0f));
    cmd->add_option("--out", a.out, "Classifier output (.rvwt)")->required();
    cmd->add_option("--timings", a.timings, "Per-epoch timing CSV");
}

void print_metrics(std::ostream& out, const EvalMetrics& m) {
    out << "threshold " << m.threshold << ": precision " << fmt_metric(m.precision) << ", recall "
        << fmt_metric(m.recall) << ", f1 " << fmt_metric(m.f1) << ", auprc " << fmt_metric(m.auprc)
        << ", accuracy " << fmt_metric(m.accuracy) << " (tp " << m.tp << ", fp " << m.fp << ", tn " << m.tn
        << ", fn " << m.fn << ")\n";
}

int run_train(const TrainArgs& a, std::ostream& out) {
    auto csv = read_labeled_csv(a.data);
    if (csv.train.size() == 0) throw ValidationError(a.data + ": no training rows");
    const char* eval_source = "eval rows";
    LabeledLatentSet eval = csv.eval;
    if (!a.eval.empty()) {
        auto extra = read_labeled_csv(a.eval);
        eval = extra.eval.size() ? extra.eval : extra.train;
        eval_source = "eval file";
    } else if (eval.size() == 0) {
        eval = csv.train;
        eval_source = "training rows";
    }

    const auto result = train(Classifier{}, csv.train, TrainConfig{a.epochs, a.batch_size, a.lr, a.seed});
    save_classifier(result.classifier, a.out);
    if (!a.timings.empty()) {
        std::ofstream t(a.timings, std::ios::binary | std::ios::trunc);
        if (!t) throw IoError("cannot create " + a.timings);
        t << format_epoch_csv(result.epochs);
    }

    out << "trained on " << csv.train.size() << " samples, " << a.epochs << " epochs, batch " << a.batch_size << "\n";
    if (!result.epochs.empty()) {
        double sum = 0.0;
        for (const auto& e : result.epochs) sum += e.duration_s;
        out << "mean epoch time " << fmt_seconds(sum / static_cast<double>(result.epochs.size())) << " s, final loss "
            << result.epochs.back().mean_loss << "\n";
    }
    out << "evaluated on " << eval.size() << " " << eval_source << "\n";
    print_metrics(out, evaluate(result.classifier, eval, a.threshold));
    return kOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string mode;
    std::vector<std::string> scenes;
    ModelOptions model;
    std::size_t window = 3;
    std::string data;
    std::string eval;
    std::vector<std::size_t> batch_sizes{32, 64, 128, 256};
    std::size_t epochs = 10;
    float lr = 0.1f;
    unsigned long long seed = kDefaultSeed;
    std::string out;
    CLI::App* cmd = nullptr;
};

void setup_bench(CLI::App& app, BenchArgs& a) {
    auto* cmd = a.cmd = app.add_subcommand("bench", "Timing benchmarks; writes <out>.json and <out>.csv");
    cmd->add_option("mode", a.mode, "inference or training")->required()->check(CLI::IsMember({"inference", "training"}));
    cmd->add_option("scenes", a.scenes, "Scene files (inference mode)");
    cmd->add_option("--model", a.model.model, "Encoder weights (inference mode)");
    cmd->add_option("--arch", a.model.arch, "Architecture manifest (inference mode)");
    cmd->add_option("--batch-size", a.model.batch_size, "Encoder batch size (inference mode)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--threads", a.model.threads, "Encoder worker threads (inference mode)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--divisor", a.model.divisor, "Radiometric divisor (inference mode)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--window", a.window, "Change-detection window (inference mode)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--data", a.data, "Labeled latent CSV (training mode)");
    cmd->add_option("--eval", a.eval, "Evaluation CSV (training mode)");
    cmd->add_option("--batch-sizes", a.batch_sizes, "Batch sizes to sweep (training mode)")
        ->capture_default_str()
        ->delimiter(',');
    cmd->add_option("--epochs", a.epochs, "Epochs per batch size (training mode)")->capture_default_str();
    cmd->add_option("--lr", a.lr, "SGD learning rate (training mode)")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", a.seed, "Shuffling seed (training mode)")->capture_default_str();
    cmd->add_option("--out", a.out, "Output path prefix")->required();
}

int run_bench(const BenchArgs& a, std::ostream& out) {
    if (a.mode == "inference") {
        if (a.scenes.empty()) throw UsageError("bench inference needs scene files");
        if (a.model.model.empty()) throw UsageError("bench inference needs --model");
        const ReferenceBackend backend(load_model(a.model));
        std::vector<fs::path> paths(a.scenes.begin(), a.scenes.end());
        InferenceBenchConfig config;
        config.batch_size = a.model.batch_size;
        config.threads = a.model.threads;
        config.window = a.window;
        config.divisor = a.model.divisor;
        const auto result = bench_inference(paths, backend, config);
        export_report(result.report, ReportFormat::json, a.out + ".json");
        export_report(result.report, ReportFormat::csv, a.out + ".csv");
        out << "backend " << result.report.backend_name << ", batch size " << result.report.batch_size << ", "
            << a.scenes.size() << " files, " << result.report.batches.size() << " encode batches\n";
        for (const auto& [name, s] : result.report.summary) {
            out << "  " << name << ": mean " << fmt_seconds(s.mean) << " s, median " << fmt_seconds(s.median)
                << " s, p95 " << fmt_seconds(s.p95) << " s, max " << fmt_seconds(s.max) << " s (n=" << s.count
                << ")\n";
        }
        return kOk;
    }

    if (a.data.empty()) throw UsageError("bench training needs --data");
    auto csv = read_labeled_csv(a.data);
    LabeledLatentSet eval = csv.eval;
    if (!a.eval.empty()) {
        auto extra = read_labeled_csv(a.eval);
        eval = extra.eval.size() ? extra.eval : extra.train;
    } else if (eval.size() == 0) {
        eval = csv.train;
    }
    for (auto bs : a.batch_sizes) {
        if (bs == 0) throw UsageError("batch sizes must be positive");
    }
    TrainingBenchConfig config;
    config.batch_sizes = a.batch_sizes;
    config.epochs = a.epochs;
    config.lr = a.lr;
    config.seed = a.seed;
    const auto rows = bench_training(csv.train, eval, config);
    export_sweep(rows, ReportFormat::json, a.out + ".json");
    export_sweep(rows, ReportFormat::csv, a.out + ".csv");
    out << "batch_size  mean_epoch_s  std_epoch_s  auprc   f1\n";
    for (const auto& r : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%10zu  %12.5f  %11.5f  %.4f  %.4f\n", r.batch_size, r.mean_epoch_s,
                      r.std_epoch_s, r.metrics.auprc, r.metrics.f1);
        out << line;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct FixtureArgs {
    std::string kind;
    unsigned long long seed = kDefaultSeed;
    std::string out;
    std::string arch_out;
    std::size_t height = 480;
    std::size_t width = 480;
    std::size_t bands = 4;
    std::uint32_t acquisition = 0;
    std::size_t changed = 5;
    std::size_t n = 1305;
    double margin = 8.0;
};

void setup_fixtures(CLI::App& app, FixtureArgs& a) {
    auto* cmd = app.add_subcommand("fixtures", "Generate deterministic weights, scenes and latent datasets");
    cmd->add_option("kind", a.kind, "weights, scene, scene-pair or latent-dataset")
        ->required()
        ->check(CLI::IsMember({"weights", "scene", "scene-pair", "latent-dataset"}));
    cmd->add_option("--seed", a.seed, "Generator seed")->capture_default_str();
    cmd->add_option("--out", a.out, "Output file (scene-pair: path prefix)")->required();
    cmd->add_option("--arch-out", a.arch_out, "weights: also write the reference .arch manifest here");
    cmd->add_option("--height", a.height, "scene/scene-pair: height in pixels")->capture_default_str();
    cmd->add_option("--width", a.width, "scene/scene-pair: width in pixels")->capture_default_str();
    cmd->add_option("--bands", a.bands, "scene: band count")->capture_default_str();
    cmd->add_option("--acquisition", a.acquisition, "scene: acquisition index")->capture_default_str();
    cmd->add_option("--changed", a.changed, "scene-pair: tiles replaced by noise")->capture_default_str();
    cmd->add_option("-n,--samples", a.n, "latent-dataset: samples per split")->capture_default_str();
    cmd->add_option("--margin", a.margin, "latent-dataset: distance between class centers")->capture_default_str();
}

int run_fixtures(const FixtureArgs& a, std::ostream& out) {
    if (a.kind == "weights") {
        save_weights(fixtures::gen_weights(a.seed), a.out);
        if (!a.arch_out.empty()) save_arch(reference_arch(), a.arch_out);
        out << "wrote reference encoder weights (seed " << a.seed << ") to " << a.out << "\n";
    } else if (a.kind == "scene") {
        save_scene(fixtures::gen_scene(a.seed, a.height, a.width, a.bands, a.acquisition), a.out);
        out << "wrote " << a.height << "x" << a.width << "x" << a.bands << " scene to " << a.out << "\n";
    } else if (a.kind == "scene-pair") {
        const auto pair = fixtures::gen_scene_pair(a.seed, a.changed, a.height, a.width);
        save_scene(pair.before, a.out + ".a.rvsc");
        save_scene(pair.after, a.out + ".b.rvsc");
        std::ofstream truth(a.out + ".changed.csv", std::ios::binary | std::ios::trunc);
        if (!truth) throw IoError("cannot create " + a.out + ".changed.csv");
        truth << "row,col\n";
        for (const auto& t : pair.changed) truth << t.row << "," << t.col << "\n";
        out << "wrote " << a.out << ".a.rvsc, " << a.out << ".b.rvsc and " << a.out << ".changed.csv ("
            << pair.changed.size() << " changed tiles)\n";
    } else {
        const auto ds = fixtures::gen_latent_dataset(a.seed, a.n, a.margin);
        write_labeled_csv(a.out, ds.train, &ds.eval);
        out << "wrote " << ds.train.size() << " train + " << ds.eval.size() << " eval samples (margin " << a.margin
            << ") to " << a.out << "\n";
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app("Onboard Earth-observation latent engine: encode tiles, detect change, train, benchmark", "onboard");
    app.require_subcommand(1);

    EncodeArgs encode_args;
    ChangeArgs change_args;
    TrainArgs train_args;
    BenchArgs bench_args;
    FixtureArgs fixture_args;
    setup_encode(app, encode_args);
    setup_change(app, change_args);
    setup_train(app, train_args);
    setup_bench(app, bench_args);
    setup_fixtures(app, fixture_args);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const auto* sub = app.get_subcommands().front();
        const std::string name = sub->get_name();
        if (name == "encode") return run_encode(encode_args, out);
        if (name == "change") return run_change(change_args, out);
        if (name == "train") return run_train(train_args, out);
        if (name == "bench") return run_bench(bench_args, out);
        return run_fixtures(fixture_args, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        err << "invalid input: " << e.what() << "\n";
        return kValidation;
    }
}

}  // namespace onboard::cli
