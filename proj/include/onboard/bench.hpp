#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "onboard/change_detect.hpp"
#include "onboard/encoder.hpp"
#include "onboard/fewshot.hpp"
#include "onboard/ingest.hpp"

namespace onboard {

enum class Phase { load, tile, encode, compare };

const char* to_string(Phase phase);
Phase parse_phase(const std::string& name);

struct PhaseTiming {
    std::string file_id;
    Phase phase = Phase::load;
    double duration_s = 0.0;

    bool operator==(const PhaseTiming&) const = default;
};

struct BatchRecord {
    std::string file_id;
    std::size_t batch_index = 0;
    std::size_t tile_count = 0;
    double duration_s = 0.0;

    bool operator==(const BatchRecord&) const = default;
};

struct SummaryStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p95 = 0.0;  // nearest rank: sorted[ceil(0.95 n) - 1]
    double max = 0.0;

    bool operator==(const SummaryStats&) const = default;
};

SummaryStats summarize(std::span<const double> values);
SummaryStats summarize(std::span<const PhaseTiming> records);

/// Raw records plus summaries derived from them. Summary keys are the four
/// phase names (per-file durations) and "encode_batch" (per-batch durations).
struct TimingReport {
    std::string backend_name;
    std::size_t batch_size = 0;
    std::vector<PhaseTiming> phases;
    std::vector<BatchRecord> batches;
    std::map<std::string, SummaryStats> summary;

    void recompute_summary();
    bool operator==(const TimingReport&) const = default;
};

struct InferenceBenchConfig {
    std::size_t batch_size = 64;
    std::size_t threads = 1;
    std::size_t window = 3;
    ChangeMetric metric = ChangeMetric::cosine;
    float divisor = kDefaultReflectanceDivisor;
    // Test hook: called inside each batch's timed region to simulate stalls.
    std::function<void(std::size_t file_index, std::size_t batch_index)> inject_delay;
};

struct InferenceBenchResult {
    TimingReport report;
    std::vector<LatentGrid> grids;        // one per scene, input order
    std::vector<ChangeMap> change_maps;   // one per scene after the first
};

/// Runs load -> normalize+tile -> encode -> compare for each scene in order,
/// comparing against up to `window` previous scenes. The first scene's
/// compare phase has no work but is still timed. Errors are rethrown with
/// the offending file named.
InferenceBenchResult bench_inference(std::span<const std::filesystem::path> scenes, const EncoderBackend& backend,
                                     const InferenceBenchConfig& config = {});

struct TrainingSweepRow {
    std::size_t batch_size = 0;
    std::size_t epochs = 0;
    double mean_epoch_s = 0.0;
    double std_epoch_s = 0.0;  // population std over epochs
    EvalMetrics metrics;
    double train_accuracy = 0.0;
    std::vector<EpochTiming> epoch_timings;
};

struct TrainingBenchConfig {
    std::vector<std::size_t> batch_sizes{32, 64, 128, 256};
    std::size_t epochs = 10;
    float lr = 0.1f;
    std::uint64_t seed = 42;
    float threshold = 0.5f;
};

/// Trains from a zero classifier once per batch size, same seed each time.
std::vector<TrainingSweepRow> bench_training(const LabeledLatentSet& train, const LabeledLatentSet& eval,
                                             const TrainingBenchConfig& config = {});

enum class ReportFormat { csv, json };

// JSON: the whole report. CSV: phase records at `path` (header
// "file_id,phase,duration_s") and batch records next to it at
// batches_csv_path(path) (header "file_id,batch_index,tile_count,duration_s").
std::string report_to_json(const TimingReport& report);
TimingReport report_from_json(const std::string& text);
std::string format_phase_csv(const TimingReport& report);
std::string format_batch_csv(const TimingReport& report);
std::filesystem::path batches_csv_path(const std::filesystem::path& path);
void export_report(const TimingReport& report, ReportFormat format, const std::filesystem::path& path);

// CSV header: batch_size,epochs,mean_epoch_s,std_epoch_s,precision,recall,f1,auprc,accuracy,train_accuracy
std::string format_sweep_csv(std::span<const TrainingSweepRow> rows);
std::string sweep_to_json(std::span<const TrainingSweepRow> rows);
void export_sweep(std::span<const TrainingSweepRow> rows, ReportFormat format, const std::filesystem::path& path);

// Per-epoch CSV: epoch_index,batch_size,batches,duration_s,mean_loss
std::string format_epoch_csv(std::span<const EpochTiming> epochs);

}  // namespace onboard
