#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nilm/core/tensor.hpp"
#include "nilm/data/series.hpp"
#include "nilm/data/states.hpp"

namespace nilm {

// Output span `s` plus `w` samples of context on each side.
struct WindowConfig {
    std::size_t s = 32;
    std::size_t w = 200;

    std::size_t input_length() const { return s + 2 * w; }
    void validate() const;

    // 6 s grid, 432-sample input.
    static WindowConfig ukdale() { return {32, 200}; }
    // 3 s grid, 864-sample input.
    static WindowConfig redd() { return {64, 400}; }

    bool operator==(const WindowConfig&) const = default;
};

struct WindowedExample {
    std::size_t start = 0;              // series index of the first target sample
    std::vector<double> input;          // s + 2w normalized mains readings
    std::vector<double> target_power;   // s normalized appliance readings
    Tensor target_states;               // [s, state_count] one-hot
};

// Normalized mains context for the target span starting at `start`; positions
// outside the series take `pad`.
std::vector<double> window_input(std::span<const double> normalized_mains, std::size_t start,
                                 const WindowConfig& cfg, double pad);

// Training windows over an aligned mains/appliance pair. Examples are built on
// demand from the normalized series so a stride-1 set stays small in memory.
class WindowSet {
public:
    WindowSet() = default;
    WindowSet(const WindowConfig& cfg, std::size_t state_count, Normalizer mains_norm,
              std::vector<WindowedExample> examples);

    std::size_t size() const;
    bool empty() const { return size() == 0; }
    WindowedExample at(std::size_t index) const;

    const WindowConfig& config() const { return cfg_; }
    std::size_t state_count() const { return state_count_; }
    const Normalizer& mains_normalizer() const { return mains_norm_; }
    std::int64_t period() const { return period_; }
    const ApplianceStateModel* state_model() const { return has_model_ ? &model_ : nullptr; }

private:
    friend WindowSet make_windows(const PowerSeries&, const PowerSeries&, const ApplianceStateModel&,
                                  const WindowConfig&, std::size_t, const Normalizer&);

    WindowConfig cfg_;
    std::size_t state_count_ = 0;
    Normalizer mains_norm_;
    std::int64_t period_ = 0;
    ApplianceStateModel model_;
    bool has_model_ = false;
    std::vector<double> mains_;      // normalized
    std::vector<double> appliance_;  // normalized
    std::vector<std::size_t> labels_;
    std::vector<std::size_t> starts_;
    std::vector<WindowedExample> materialized_;
};

// Windows start every `stride` samples while the whole target span fits in
// the series. Series shorter than s yield no windows.
WindowSet make_windows(const PowerSeries& mains, const PowerSeries& appliance, const ApplianceStateModel& model,
                       const WindowConfig& cfg, std::size_t stride, const Normalizer& mains_norm);

}  // namespace nilm
