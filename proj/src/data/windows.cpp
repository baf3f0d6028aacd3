#include "nilm/data/windows.hpp"

#include "nilm/error.hpp"

namespace nilm {

void WindowConfig::validate() const {
    if (s < 1) throw Error("window: output length s must be >= 1");
}

std::vector<double> window_input(std::span<const double> normalized_mains, std::size_t start,
                                 const WindowConfig& cfg, double pad) {
    std::vector<double> input(cfg.input_length(), pad);
    const auto n = static_cast<std::ptrdiff_t>(normalized_mains.size());
    const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(start) - static_cast<std::ptrdiff_t>(cfg.w);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const std::ptrdiff_t src = first + static_cast<std::ptrdiff_t>(i);
        if (src >= 0 && src < n) input[i] = normalized_mains[static_cast<std::size_t>(src)];
    }
    return input;
}

WindowSet::WindowSet(const WindowConfig& cfg, std::size_t state_count, Normalizer mains_norm,
                     std::vector<WindowedExample> examples)
    : cfg_(cfg), state_count_(state_count), mains_norm_(mains_norm), materialized_(std::move(examples)) {
    for (const auto& ex : materialized_) {
        if (ex.input.size() != cfg_.input_length() || ex.target_power.size() != cfg_.s ||
            ex.target_states.shape() != Shape{cfg_.s, state_count_}) {
            throw Error("window set: example shapes do not match window config");
        }
    }
}

std::size_t WindowSet::size() const { return materialized_.empty() ? starts_.size() : materialized_.size(); }

WindowedExample WindowSet::at(std::size_t index) const {
    if (!materialized_.empty()) return materialized_.at(index);
    const std::size_t start = starts_.at(index);
    WindowedExample ex;
    ex.start = start;
    ex.input = window_input(mains_, start, cfg_, mains_norm_.apply(0.0));
    ex.target_power.assign(appliance_.begin() + static_cast<std::ptrdiff_t>(start),
                           appliance_.begin() + static_cast<std::ptrdiff_t>(start + cfg_.s));
    ex.target_states = Tensor({cfg_.s, state_count_});
    for (std::size_t t = 0; t < cfg_.s; ++t) ex.target_states.at(t, labels_[start + t]) = 1.0;
    return ex;
}

WindowSet make_windows(const PowerSeries& mains, const PowerSeries& appliance, const ApplianceStateModel& model,
                       const WindowConfig& cfg, std::size_t stride, const Normalizer& mains_norm) {
    cfg.validate();
    model.validate();
    mains_norm.validate();
    if (stride == 0) throw Error("make_windows: stride must be >= 1");
    if (mains.start_time != appliance.start_time || mains.period != appliance.period ||
        mains.size() != appliance.size()) {
        throw Error("make_windows: mains (start " + std::to_string(mains.start_time) + ", period " +
                    std::to_string(mains.period) + ", " + std::to_string(mains.size()) +
                    " samples) and appliance (start " + std::to_string(appliance.start_time) + ", period " +
                    std::to_string(appliance.period) + ", " + std::to_string(appliance.size()) +
                    " samples) are misaligned");
    }
    if (mains.missing_count() > 0 || appliance.missing_count() > 0) {
        throw Error("make_windows: series contain missing samples; run fill_gaps first");
    }
    WindowSet set;
    set.cfg_ = cfg;
    set.state_count_ = model.state_count();
    set.mains_norm_ = mains_norm;
    set.period_ = mains.period;
    set.model_ = model;
    set.has_model_ = true;
    set.mains_ = normalize(mains.values, mains_norm.mean, mains_norm.std);
    set.appliance_ = normalize(appliance.values, model.norm_mean, model.norm_std);
    set.labels_ = label_state_indices(appliance.values, model);
    for (std::size_t start = 0; start + cfg.s <= mains.size(); start += stride) set.starts_.push_back(start);
    return set;
}

}  // namespace nilm
