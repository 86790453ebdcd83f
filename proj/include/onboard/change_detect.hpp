#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onboard/encoder.hpp"

namespace onboard {

enum class ChangeMetric {
    cosine,     // 1 - cos(mu_a, mu_b), in [0, 2]
    euclidean,  // |mu_a - mu_b|, unbounded
};

const char* to_string(ChangeMetric metric);
ChangeMetric parse_change_metric(const std::string& name);

/// Dissimilarity of two latents, computed on mu only.
///
/// Zero-norm convention for cosine: both zero -> 0, exactly one zero -> 1.
double change_score(const Latent& a, const Latent& b, ChangeMetric metric = ChangeMetric::cosine);

struct ChangeMap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> scores;  // row-major
    std::vector<std::uint32_t> previous_acquisitions;
    std::uint32_t current_acquisition = 0;
    ChangeMetric metric = ChangeMetric::cosine;

    float at(std::size_t row, std::size_t col) const { return scores.at(row * cols + col); }
    bool operator==(const ChangeMap&) const = default;
};

/// score[i] = min over history of change_score(history_t[i], current[i]).
/// Taking the minimum keeps a single anomalous earlier pass from flagging change.
ChangeMap change_map(std::span<const LatentGrid> history, const LatentGrid& current,
                     ChangeMetric metric = ChangeMetric::cosine);

struct RankedTile {
    std::size_t row = 0;
    std::size_t col = 0;
    float score = 0.0f;

    bool operator==(const RankedTile&) const = default;
};

/// Top-k cells by descending score; equal scores keep row-major order.
std::vector<RankedTile> rank_tiles(const ChangeMap& map, std::size_t k);

/// Rolling window of recent acquisitions. push() returns the change map of
/// the new grid against the window contents (nothing for the first grid).
class ChangeDetector {
public:
    explicit ChangeDetector(std::size_t window = 3, ChangeMetric metric = ChangeMetric::cosine);

    std::optional<ChangeMap> push(LatentGrid grid);

    std::size_t window() const noexcept { return window_; }

private:
    std::size_t window_;
    ChangeMetric metric_;
    std::deque<LatentGrid> history_;
};

// CSV "row,col,score". JSON carries the grid shape, metric and acquisition
// pair as well as the scores.
std::string format_change_csv(const ChangeMap& map);
std::string change_map_to_json(const ChangeMap& map);
ChangeMap change_map_from_json(const std::string& text);
void write_change_csv(const ChangeMap& map, const std::filesystem::path& path);
void write_change_json(const ChangeMap& map, const std::filesystem::path& path);

}  // namespace onboard
