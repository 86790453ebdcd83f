#include "onboard/fewshot.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "byte_io.hpp"
#include "onboard/error.hpp"
#include "onboard/model_io.hpp"
#include "onboard/rng.hpp"
#include "onboard/tensor.hpp"
#include "text_util.hpp"

namespace onboard {

const char* to_string(Split split) {
    return split == Split::train ? "train" : "eval";
}

void LabeledLatentSet::push_back(std::span<const float> mu, std::uint8_t label) {
    if (mu.size() != kFeatureDim) {
        throw DimensionError("latent has " + std::to_string(mu.size()) + " features, expected 128");
    }
    if (label > 1) throw ValidationError("label must be 0 or 1");
    features.insert(features.end(), mu.begin(), mu.end());
    labels.push_back(label);
}

void LabeledLatentSet::validate() const {
    if (features.size() != labels.size() * kFeatureDim) {
        throw DimensionError("feature count " + std::to_string(features.size()) + " does not match " +
                             std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) throw ValidationError("sample " + std::to_string(i) + " has non-binary label");
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (!std::isfinite(features[i])) {
            throw ValidationError("sample " + std::to_string(i / kFeatureDim) + " has a non-finite feature");
        }
    }
}

double logit(const Classifier& c, std::span<const float> mu) {
    if (mu.size() != kFeatureDim) throw DimensionError("classifier input must have 128 features");
    double z = c.b;
    for (std::size_t j = 0; j < kFeatureDim; ++j) z += static_cast<double>(c.w[j]) * static_cast<double>(mu[j]);
    return z;
}

double predict(const Classifier& c, std::span<const float> mu) {
    return sigmoid(logit(c, mu));
}

double bce_loss(double z, int label) {
    return std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::fabs(z)));
}

Gradient batch_gradient(const Classifier& c, const LabeledLatentSet& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ValidationError("gradient needs a nonempty batch");
    Gradient g;
    for (auto i : indices) {
        if (i >= data.size()) throw ValidationError("batch index out of range");
        const auto mu = data.sample(i);
        const double z = logit(c, mu);
        const int y = data.labels[i];
        const double dz = sigmoid(z) - y;
        for (std::size_t j = 0; j < kFeatureDim; ++j) g.dw[j] += dz * static_cast<double>(mu[j]);
        g.db += dz;
        g.mean_loss += bce_loss(z, y);
    }
    const double n = static_cast<double>(indices.size());
    for (auto& v : g.dw) v /= n;
    g.db /= n;
    g.mean_loss /= n;
    return g;
}

StepResult grad_step(const Classifier& c, const LabeledLatentSet& data, std::span<const std::size_t> indices, float lr) {
    if (!(lr > 0.0f)) throw ValidationError("learning rate must be positive");
    const auto g = batch_gradient(c, data, indices);
    StepResult out{c, g.mean_loss};
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
        out.classifier.w[j] = static_cast<float>(c.w[j] - lr * g.dw[j]);
    }
    out.classifier.b = static_cast<float>(c.b - lr * g.db);
    for (float v : out.classifier.w) {
        if (!std::isfinite(v)) throw ValidationError("classifier diverged (non-finite weight)");
    }
    if (!std::isfinite(out.classifier.b)) throw ValidationError("classifier diverged (non-finite bias)");
    return out;
}

TrainResult train(const Classifier& init, const LabeledLatentSet& data, const TrainConfig& config) {
    if (data.size() == 0) throw ValidationError("cannot train on an empty dataset");
    if (config.batch_size == 0) throw ValidationError("batch size must be at least 1");
    if (!(config.lr > 0.0f)) throw ValidationError("learning rate must be positive");
    data.validate();

    TrainResult result{init, {}};
    SeededRng rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(std::span(order));
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batches) {
            const std::size_t count = std::min(config.batch_size, order.size() - start);
            const auto batch = std::span<const std::size_t>(order).subspan(start, count);
            auto step = grad_step(result.classifier, data, batch, config.lr);
            result.classifier = step.classifier;
            loss_sum += step.mean_loss * static_cast<double>(count);
        }
        const auto t1 = std::chrono::steady_clock::now();
        result.epochs.push_back({epoch, std::chrono::duration<double>(t1 - t0).count(), config.batch_size, batches,
                                 loss_sum / static_cast<double>(order.size())});
    }
    return result;
}

double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    std::size_t positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) throw ValidationError("labels must be 0 or 1");
        if (std::isnan(scores[i])) throw ValidationError("score is NaN");
        positives += labels[i];
    }
    if (positives == 0) throw ValidationError("auprc is undefined without positive labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double ap = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == s; ++i) {
            if (labels[order[i]]) {
                ++tp;
            } else {
                ++fp;
            }
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

EvalMetrics evaluate(const Classifier& c, const LabeledLatentSet& data, float threshold) {
    if (data.size() == 0) throw ValidationError("cannot evaluate on an empty dataset");
    data.validate();
    EvalMetrics m;
    m.threshold = threshold;
    std::vector<double> scores(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        scores[i] = predict(c, data.sample(i));
        const bool predicted = scores[i] >= static_cast<double>(threshold);
        const bool actual = data.labels[i] == 1;
        if (predicted && actual) ++m.tp;
        else if (predicted) ++m.fp;
        else if (actual) ++m.fn;
        else ++m.tn;
    }
    m.precision = m.tp + m.fp == 0 ? 1.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    m.recall = m.tp + m.fn == 0 ? 1.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(data.size());
    m.auprc = m.tp + m.fn == 0 ? 1.0 : auprc(scores, data.labels);
    return m;
}

// ---------------------------------------------------------------------------

LabeledCsv parse_labeled_csv(const std::string& text) {
    LabeledCsv out;
    out.eval.split = Split::eval;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ValidationError("labeled CSV line 1: missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split(line, ',');
    const bool has_split = header.size() == kFeatureDim + 2;
    if (header.size() != kFeatureDim + 1 && !has_split) {
        throw ValidationError("labeled CSV line 1: expected 128 feature columns plus label, got " +
                              std::to_string(header.size()) + " columns");
    }
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
        if (header[j] != "f" + std::to_string(j)) {
            throw ValidationError("labeled CSV line 1: column " + std::to_string(j) + " should be f" + std::to_string(j));
        }
    }
    if (header[kFeatureDim] != "label" || (has_split && header[kFeatureDim + 1] != "split")) {
        throw ValidationError("labeled CSV line 1: trailing columns must be label[,split]");
    }

    std::vector<float> mu(kFeatureDim);
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = "labeled CSV line " + std::to_string(line_no);
        const auto cells = detail::split(line, ',');
        if (cells.size() != header.size()) {
            throw ValidationError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                                  std::to_string(cells.size()));
        }
        for (std::size_t j = 0; j < kFeatureDim; ++j) {
            if (!detail::parse_number(cells[j], mu[j]) || !std::isfinite(mu[j])) {
                throw ValidationError(where + ": bad number in column f" + std::to_string(j));
            }
        }
        int label = -1;
        if (!detail::parse_number(cells[kFeatureDim], label) || (label != 0 && label != 1)) {
            throw ValidationError(where + ": label must be 0 or 1");
        }
        auto* target = &out.train;
        if (has_split) {
            if (cells[kFeatureDim + 1] == "eval") {
                target = &out.eval;
            } else if (cells[kFeatureDim + 1] != "train") {
                throw ValidationError(where + ": split must be train or eval");
            }
        }
        target->push_back(mu, static_cast<std::uint8_t>(label));
    }
    return out;
}

LabeledCsv read_labeled_csv(const std::filesystem::path& path) {
    return parse_labeled_csv(detail::read_text(path));
}

namespace {

void append_rows(std::string& out, const LabeledLatentSet& set, bool with_split) {
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (float v : set.sample(i)) {
            detail::append_number(out, v);
            out += ',';
        }
        out += set.labels[i] ? '1' : '0';
        if (with_split) {
            out += ',';
            out += to_string(set.split);
        }
        out += '\n';
    }
}

}  // namespace

std::string format_labeled_csv(const LabeledLatentSet& train, const LabeledLatentSet* eval) {
    std::string out;
    for (std::size_t j = 0; j < kFeatureDim; ++j) out += "f" + std::to_string(j) + ",";
    out += eval ? "label,split\n" : "label\n";
    append_rows(out, train, eval != nullptr);
    if (eval) append_rows(out, *eval, true);
    return out;
}

void write_labeled_csv(const std::filesystem::path& path, const LabeledLatentSet& train, const LabeledLatentSet* eval) {
    detail::write_text(path, format_labeled_csv(train, eval));
}

void save_classifier(const Classifier& c, const std::filesystem::path& path) {
    WeightSet ws;
    ws.add("clf.w", Tensor({kFeatureDim}, std::vector<float>(c.w.begin(), c.w.end())));
    ws.add("clf.b", Tensor({1}, {c.b}));
    save_weights(ws, path);
}

Classifier load_classifier(const std::filesystem::path& path) {
    const auto ws = load_weights(path);
    const auto* w = ws.find("clf.w");
    const auto* b = ws.find("clf.b");
    if (!w || !b) throw ValidationError(path.string() + ": classifier file needs clf.w and clf.b");
    if (w->value.shape() != Shape{kFeatureDim} || b->value.shape() != Shape{1}) {
        throw DimensionError(path.string() + ": classifier entries must be [128] and [1]");
    }
    Classifier c;
    std::copy(w->value.data().begin(), w->value.data().end(), c.w.begin());
    c.b = b->value[0];
    return c;
}

}  // namespace onboard
