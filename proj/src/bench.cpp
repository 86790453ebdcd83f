#include "onboard/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "byte_io.hpp"
#include "onboard/error.hpp"
#include "onboard/ingest.hpp"
#include "text_util.hpp"

namespace onboard {

const char* to_string(Phase phase) {
    switch (phase) {
    case Phase::load: return "load";
    case Phase::tile: return "tile";
    case Phase::encode: return "encode";
    case Phase::compare: return "compare";
    }
    return "?";
}

Phase parse_phase(const std::string& name) {
    for (auto p : {Phase::load, Phase::tile, Phase::encode, Phase::compare}) {
        if (name == to_string(p)) return p;
    }
    throw ValidationError("unknown phase '" + name + "'");
}

SummaryStats summarize(std::span<const double> values) {
    if (values.empty()) throw ValidationError("cannot summarize an empty list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    SummaryStats s;
    s.count = n;
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    s.median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
    const std::size_t rank = (95 * n + 99) / 100;  // ceil(0.95 n) without rounding noise
    s.p95 = sorted[rank - 1];
    s.max = sorted.back();
    return s;
}

SummaryStats summarize(std::span<const PhaseTiming> records) {
    std::vector<double> v;
    v.reserve(records.size());
    for (const auto& r : records) v.push_back(r.duration_s);
    return summarize(v);
}

void TimingReport::recompute_summary() {
    summary.clear();
    for (auto p : {Phase::load, Phase::tile, Phase::encode, Phase::compare}) {
        std::vector<double> v;
        for (const auto& r : phases) {
            if (r.phase == p) v.push_back(r.duration_s);
        }
        if (!v.empty()) summary[to_string(p)] = summarize(v);
    }
    std::vector<double> b;
    for (const auto& r : batches) b.push_back(r.duration_s);
    if (!b.empty()) summary["encode_batch"] = summarize(b);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

[[noreturn]] void rethrow_for_file(const std::string& file) {
    try {
        throw;
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), file + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(file + ": " + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(file + ": " + e.what());
    } catch (const Error& e) {
        throw ValidationError(file + ": " + e.what());
    }
}

}  // namespace

InferenceBenchResult bench_inference(std::span<const std::filesystem::path> scenes, const EncoderBackend& backend,
                                     const InferenceBenchConfig& config) {
    if (scenes.empty()) throw ValidationError("bench_inference needs at least one scene");
    InferenceBenchResult result;
    result.report.backend_name = backend.name();
    result.report.batch_size = config.batch_size;
    ChangeDetector detector(config.window, config.metric);

    for (std::size_t f = 0; f < scenes.size(); ++f) {
        const std::string file_id = scenes[f].filename().string();
        try {
            auto t0 = Clock::now();
            const Scene raw = load_scene(scenes[f]);
            result.report.phases.push_back({file_id, Phase::load, seconds_since(t0)});

            t0 = Clock::now();
            const TileGrid grid = tile_scene(normalize(raw, config.divisor));
            result.report.phases.push_back({file_id, Phase::tile, seconds_since(t0)});

            EncodeOptions options;
            options.batch_size = config.batch_size;
            options.threads = config.threads;
            if (config.inject_delay) options.on_batch = [&, f](std::size_t b) { config.inject_delay(f, b); };
            t0 = Clock::now();
            auto encoded = encode_batch(grid.tiles, backend, options);
            result.report.phases.push_back({file_id, Phase::encode, seconds_since(t0)});
            for (const auto& bt : encoded.timings) {
                result.report.batches.push_back({file_id, bt.batch_index, bt.tile_count, bt.duration_s});
            }

            LatentGrid latents{grid.rows, grid.cols, raw.acquisition_index, std::move(encoded.latents)};
            t0 = Clock::now();
            auto map = detector.push(latents);
            result.report.phases.push_back({file_id, Phase::compare, seconds_since(t0)});
            if (map) result.change_maps.push_back(std::move(*map));
            result.grids.push_back(std::move(latents));
        } catch (const Error&) {
            rethrow_for_file(scenes[f].string());
        }
    }
    result.report.recompute_summary();
    return result;
}

std::vector<TrainingSweepRow> bench_training(const LabeledLatentSet& train_set, const LabeledLatentSet& eval,
                                             const TrainingBenchConfig& config) {
    if (config.batch_sizes.empty()) throw ValidationError("batch size sweep is empty");
    if (train_set.size() == 0 || eval.size() == 0) throw ValidationError("training benchmark needs nonempty data");
    std::vector<TrainingSweepRow> rows;
    for (auto bs : config.batch_sizes) {
        TrainConfig tc{config.epochs, bs, config.lr, config.seed};
        const auto result = train(Classifier{}, train_set, tc);
        TrainingSweepRow row;
        row.batch_size = bs;
        row.epochs = config.epochs;
        if (!result.epochs.empty()) {
            double sum = 0.0;
            for (const auto& e : result.epochs) sum += e.duration_s;
            row.mean_epoch_s = sum / static_cast<double>(result.epochs.size());
            double var = 0.0;
            for (const auto& e : result.epochs) var += (e.duration_s - row.mean_epoch_s) * (e.duration_s - row.mean_epoch_s);
            row.std_epoch_s = std::sqrt(var / static_cast<double>(result.epochs.size()));
        }
        row.metrics = evaluate(result.classifier, eval, config.threshold);
        row.train_accuracy = evaluate(result.classifier, train_set, config.threshold).accuracy;
        row.epoch_timings = result.epochs;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json stats_json(const SummaryStats& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p95", s.p95}, {"max", s.max}};
}

SummaryStats stats_from_json(const nlohmann::json& j) {
    return {j.at("count").get<std::size_t>(), j.at("mean").get<double>(), j.at("median").get<double>(),
            j.at("p95").get<double>(), j.at("max").get<double>()};
}

}  // namespace

std::string report_to_json(const TimingReport& report) {
    nlohmann::json j;
    j["backend"] = report.backend_name;
    j["batch_size"] = report.batch_size;
    auto& phases = j["phases"] = nlohmann::json::array();
    for (const auto& p : report.phases) {
        phases.push_back({{"file_id", p.file_id}, {"phase", to_string(p.phase)}, {"duration_s", p.duration_s}});
    }
    auto& batches = j["batches"] = nlohmann::json::array();
    for (const auto& b : report.batches) {
        batches.push_back({{"file_id", b.file_id},
                           {"batch_index", b.batch_index},
                           {"tile_count", b.tile_count},
                           {"duration_s", b.duration_s}});
    }
    auto& summary = j["summary"] = nlohmann::json::object();
    for (const auto& [k, s] : report.summary) summary[k] = stats_json(s);
    return j.dump(2) + "\n";
}

TimingReport report_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        TimingReport r;
        r.backend_name = j.at("backend").get<std::string>();
        r.batch_size = j.at("batch_size").get<std::size_t>();
        for (const auto& p : j.at("phases")) {
            r.phases.push_back({p.at("file_id").get<std::string>(), parse_phase(p.at("phase").get<std::string>()),
                                p.at("duration_s").get<double>()});
        }
        for (const auto& b : j.at("batches")) {
            r.batches.push_back({b.at("file_id").get<std::string>(), b.at("batch_index").get<std::size_t>(),
                                 b.at("tile_count").get<std::size_t>(), b.at("duration_s").get<double>()});
        }
        for (const auto& [k, s] : j.at("summary").items()) r.summary[k] = stats_from_json(s);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid timing report JSON: ") + e.what());
    }
}

std::string format_phase_csv(const TimingReport& report) {
    std::string out = "file_id,phase,duration_s\n";
    for (const auto& p : report.phases) {
        out += p.file_id + "," + to_string(p.phase) + ",";
        detail::append_number(out, p.duration_s);
        out += '\n';
    }
    return out;
}

std::string format_batch_csv(const TimingReport& report) {
    std::string out = "file_id,batch_index,tile_count,duration_s\n";
    for (const auto& b : report.batches) {
        out += b.file_id + "," + std::to_string(b.batch_index) + "," + std::to_string(b.tile_count) + ",";
        detail::append_number(out, b.duration_s);
        out += '\n';
    }
    return out;
}

std::filesystem::path batches_csv_path(const std::filesystem::path& path) {
    auto p = path;
    p.replace_extension();
    p += ".batches.csv";
    return p;
}

void export_report(const TimingReport& report, ReportFormat format, const std::filesystem::path& path) {
    if (format == ReportFormat::json) {
        detail::write_text(path, report_to_json(report));
        return;
    }
    detail::write_text(path, format_phase_csv(report));
    detail::write_text(batches_csv_path(path), format_batch_csv(report));
}

std::string format_sweep_csv(std::span<const TrainingSweepRow> rows) {
    std::string out = "batch_size,epochs,mean_epoch_s,std_epoch_s,precision,recall,f1,auprc,accuracy,train_accuracy\n";
    for (const auto& r : rows) {
        out += std::to_string(r.batch_size) + "," + std::to_string(r.epochs);
        for (double v : {r.mean_epoch_s, r.std_epoch_s, r.metrics.precision, r.metrics.recall, r.metrics.f1,
                         r.metrics.auprc, r.metrics.accuracy, r.train_accuracy}) {
            out += ',';
            detail::append_number(out, v);
        }
        out += '\n';
    }
    return out;
}

std::string sweep_to_json(std::span<const TrainingSweepRow> rows) {
    auto j = nlohmann::json::array();
    for (const auto& r : rows) {
        j.push_back({{"batch_size", r.batch_size},
                     {"epochs", r.epochs},
                     {"mean_epoch_s", r.mean_epoch_s},
                     {"std_epoch_s", r.std_epoch_s},
                     {"precision", r.metrics.precision},
                     {"recall", r.metrics.recall},
                     {"f1", r.metrics.f1},
                     {"auprc", r.metrics.auprc},
                     {"accuracy", r.metrics.accuracy},
                     {"train_accuracy", r.train_accuracy},
                     {"threshold", r.metrics.threshold},
                     {"tp", r.metrics.tp},
                     {"fp", r.metrics.fp},
                     {"tn", r.metrics.tn},
                     {"fn", r.metrics.fn}});
    }
    return j.dump(2) + "\n";
}

void export_sweep(std::span<const TrainingSweepRow> rows, ReportFormat format, const std::filesystem::path& path) {
    detail::write_text(path, format == ReportFormat::json ? sweep_to_json(rows) : format_sweep_csv(rows));
}

std::string format_epoch_csv(std::span<const EpochTiming> epochs) {
    std::string out = "epoch_index,batch_size,batches,duration_s,mean_loss\n";
    for (const auto& e : epochs) {
        out += std::to_string(e.epoch_index) + "," + std::to_string(e.batch_size) + "," + std::to_string(e.batches) + ",";
        detail::append_number(out, e.duration_s);
        out += ',';
        detail::append_number(out, e.mean_loss);
        out += '\n';
    }
    return out;
}

}  // namespace onboard
