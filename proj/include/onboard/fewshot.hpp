#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace onboard {

inline constexpr std::size_t kFeatureDim = 128;

/// Single logistic unit over a 128-d latent: 128 weights and one bias.
struct Classifier {
    static constexpr std::size_t kParameterCount = kFeatureDim + 1;

    std::array<float, kFeatureDim> w{};
    float b = 0.0f;

    bool operator==(const Classifier&) const = default;
};

static_assert(sizeof(Classifier::w) / sizeof(float) + 1 == Classifier::kParameterCount);

enum class Split { train, eval };

const char* to_string(Split split);

/// Labeled mu vectors stored contiguously, sample i at features[i*128 .. i*128+127].
struct LabeledLatentSet {
    std::vector<float> features;
    std::vector<std::uint8_t> labels;  // 0 or 1
    Split split = Split::train;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const float> sample(std::size_t i) const { return std::span(features).subspan(i * kFeatureDim, kFeatureDim); }
    void push_back(std::span<const float> mu, std::uint8_t label);

    /// Throws ValidationError on length mismatch, non-binary labels or
    /// non-finite features.
    void validate() const;

    bool operator==(const LabeledLatentSet&) const = default;
};

/// w . mu + b, accumulated in double.
double logit(const Classifier& c, std::span<const float> mu);

/// sigmoid(w . mu + b)
double predict(const Classifier& c, std::span<const float> mu);

/// Binary cross-entropy from the logit: max(z,0) - z*y + log(1 + exp(-|z|)).
double bce_loss(double logit, int label);

struct Gradient {
    std::array<double, kFeatureDim> dw{};
    double db = 0.0;
    double mean_loss = 0.0;
};

/// Gradient of the mean BCE over the selected samples. dL/dz = sigmoid(z) - y.
Gradient batch_gradient(const Classifier& c, const LabeledLatentSet& data, std::span<const std::size_t> indices);

struct StepResult {
    Classifier classifier;
    double mean_loss = 0.0;  // before the update
};

/// One SGD step on the selected samples.
StepResult grad_step(const Classifier& c, const LabeledLatentSet& data, std::span<const std::size_t> indices, float lr);

struct EpochTiming {
    std::size_t epoch_index = 0;
    double duration_s = 0.0;
    std::size_t batch_size = 0;
    std::size_t batches = 0;
    double mean_loss = 0.0;  // sample-weighted mean of the per-batch pre-update losses
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    float lr = 0.1f;
    std::uint64_t seed = 42;
};

struct TrainResult {
    Classifier classifier;
    std::vector<EpochTiming> epochs;
};

/// Mini-batch SGD. Each epoch reshuffles the sample order with a SeededRng
/// seeded once from config.seed, so a given seed yields a bitwise-identical
/// trajectory. Epoch durations cover shuffling and all steps.
TrainResult train(const Classifier& init, const LabeledLatentSet& data, const TrainConfig& config);

struct EvalMetrics {
    float threshold = 0.5f;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auprc = 0.0;
    double accuracy = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion counts for predict >= threshold, plus AUPRC of the raw scores.
/// Precision is 1 when nothing is predicted positive; recall and AUPRC are 1
/// when the set has no positives.
EvalMetrics evaluate(const Classifier& c, const LabeledLatentSet& data, float threshold = 0.5f);

/// Step-interpolated average precision: sum over descending distinct score
/// thresholds of (R_k - R_{k-1}) * P_k, tied scores entering together.
double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Labeled latent CSV: header f0..f127,label[,split]. Rows whose split column
// is "eval" go to the second set; without the column every row is train.
struct LabeledCsv {
    LabeledLatentSet train;
    LabeledLatentSet eval;
};

LabeledCsv read_labeled_csv(const std::filesystem::path& path);
LabeledCsv parse_labeled_csv(const std::string& text);
std::string format_labeled_csv(const LabeledLatentSet& train, const LabeledLatentSet* eval = nullptr);
void write_labeled_csv(const std::filesystem::path& path, const LabeledLatentSet& train,
                       const LabeledLatentSet* eval = nullptr);

// Classifier files are .rvwt with "clf.w" [128] and "clf.b" [1].
void save_classifier(const Classifier& c, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace onboard
