#include "onboard/change_detect.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "byte_io.hpp"
#include "onboard/error.hpp"
#include "text_util.hpp"

namespace onboard {

const char* to_string(ChangeMetric metric) {
    return metric == ChangeMetric::cosine ? "cosine" : "euclidean";
}

ChangeMetric parse_change_metric(const std::string& name) {
    if (name == "cosine") return ChangeMetric::cosine;
    if (name == "euclidean") return ChangeMetric::euclidean;
    throw ValidationError("unknown change metric '" + name + "'");
}

double change_score(const Latent& a, const Latent& b, ChangeMetric metric) {
    if (a.mu.size() != b.mu.size()) {
        throw DimensionError("latent lengths differ: " + std::to_string(a.mu.size()) + " vs " + std::to_string(b.mu.size()));
    }
    if (metric == ChangeMetric::euclidean) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.mu.size(); ++i) {
            const double d = static_cast<double>(a.mu[i]) - static_cast<double>(b.mu[i]);
            acc += d * d;
        }
        return std::sqrt(acc);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.mu.size(); ++i) {
        const double x = a.mu[i], y = b.mu[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    // sqrt(na*nb) rather than sqrt(na)*sqrt(nb): identical vectors then score exactly 0.
    return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

ChangeMap change_map(std::span<const LatentGrid> history, const LatentGrid& current, ChangeMetric metric) {
    if (history.empty()) throw ValidationError("change_map needs at least one earlier acquisition");
    if (current.cells.size() != current.rows * current.cols) throw DimensionError("current grid is inconsistent");
    for (const auto& h : history) {
        if (h.rows != current.rows || h.cols != current.cols || h.cells.size() != current.cells.size()) {
            throw DimensionError("grid " + std::to_string(h.rows) + "x" + std::to_string(h.cols) +
                                 " does not match current grid " + std::to_string(current.rows) + "x" +
                                 std::to_string(current.cols));
        }
    }
    ChangeMap map;
    map.rows = current.rows;
    map.cols = current.cols;
    map.metric = metric;
    map.current_acquisition = current.acquisition_index;
    for (const auto& h : history) map.previous_acquisitions.push_back(h.acquisition_index);
    map.scores.resize(current.cells.size());
    for (std::size_t i = 0; i < current.cells.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& h : history) best = std::min(best, change_score(h.cells[i], current.cells[i], metric));
        map.scores[i] = static_cast<float>(best);
    }
    return map;
}

std::vector<RankedTile> rank_tiles(const ChangeMap& map, std::size_t k) {
    const std::size_t n = map.scores.size();
    if (k < 1 || k > n) {
        throw ValidationError("k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return map.scores[a] > map.scores[b]; });
    std::vector<RankedTile> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.push_back({order[i] / map.cols, order[i] % map.cols, map.scores[order[i]]});
    }
    return out;
}

ChangeDetector::ChangeDetector(std::size_t window, ChangeMetric metric) : window_(window), metric_(metric) {
    if (window_ == 0) throw ValidationError("change window must be at least 1");
}

std::optional<ChangeMap> ChangeDetector::push(LatentGrid grid) {
    std::optional<ChangeMap> out;
    if (!history_.empty()) {
        std::vector<LatentGrid> window(history_.begin(), history_.end());
        out = change_map(window, grid, metric_);
    }
    history_.push_back(std::move(grid));
    while (history_.size() > window_) history_.pop_front();
    return out;
}

std::string format_change_csv(const ChangeMap& map) {
    std::string out = "row,col,score\n";
    for (std::size_t i = 0; i < map.scores.size(); ++i) {
        out += std::to_string(i / map.cols);
        out += ',';
        out += std::to_string(i % map.cols);
        out += ',';
        detail::append_number(out, map.scores[i]);
        out += '\n';
    }
    return out;
}

std::string change_map_to_json(const ChangeMap& map) {
    nlohmann::json j;
    j["rows"] = map.rows;
    j["cols"] = map.cols;
    j["metric"] = to_string(map.metric);
    j["previous_acquisitions"] = map.previous_acquisitions;
    j["current_acquisition"] = map.current_acquisition;
    j["scores"] = map.scores;
    return j.dump(2) + "\n";
}

ChangeMap change_map_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        ChangeMap map;
        map.rows = j.at("rows").get<std::size_t>();
        map.cols = j.at("cols").get<std::size_t>();
        map.metric = parse_change_metric(j.at("metric").get<std::string>());
        map.previous_acquisitions = j.at("previous_acquisitions").get<std::vector<std::uint32_t>>();
        map.current_acquisition = j.at("current_acquisition").get<std::uint32_t>();
        map.scores = j.at("scores").get<std::vector<float>>();
        if (map.scores.size() != map.rows * map.cols) throw DimensionError("change map score count mismatch");
        return map;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("invalid change map JSON: ") + e.what());
    }
}

void write_change_csv(const ChangeMap& map, const std::filesystem::path& path) {
    detail::write_text(path, format_change_csv(map));
}

void write_change_json(const ChangeMap& map, const std::filesystem::path& path) {
    detail::write_text(path, change_map_to_json(map));
}

}  // namespace onboard
