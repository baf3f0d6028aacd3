#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "nilm/data/series.hpp"
#include "nilm/data/states.hpp"
#include "nilm/data/windows.hpp"
#include "nilm/model/dual_dnn.hpp"
#include "nilm/postprocess/postprocess.hpp"

namespace nilm {

enum class Variant { plain, median, hard, hard_median };

// Accepts "plain", "median", "hard", "hard-median" (or "hard_median").
Variant parse_variant(const std::string& text);
std::string to_string(Variant v);
inline bool is_hard(Variant v) { return v == Variant::hard || v == Variant::hard_median; }
inline bool is_median(Variant v) { return v == Variant::median || v == Variant::hard_median; }

struct TrainConfig {
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    std::size_t epochs = 10;
    double lambda_power = 0.0;
    Variant variant = Variant::plain;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // Hard variants train through gumbel-softmax samples; switch off to train
    // on probabilities and gate only at inference.
    bool gumbel_training = true;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss_total = 0.0;
    double loss_output = 0.0;
    double loss_state = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double wall_seconds = 0.0;
    std::string checkpoint_path;

    // "epoch,loss_total,loss_output,loss_state", one row per epoch.
    void write_csv(const std::filesystem::path& path) const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam on the joint loss. Bitwise deterministic given the seed.
// The window set's normalizers and state model are copied into the model's
// metadata. Throws before any update if shapes disagree, and aborts on a
// non-finite loss naming the batch.
TrainReport train(DualDnnModel& model, const WindowSet& examples, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct DisaggregationResult {
    std::string appliance;
    Variant variant = Variant::plain;
    PowerSeries estimate;            // watts, clamped at 0
    Tensor soft_states;              // [T, states] reconciled probabilities
    Tensor states;                   // [T, states] after variant post-processing
    std::vector<std::size_t> window_starts;
    std::vector<std::vector<double>> window_ratings;  // watts, per window
};

// Sliding-window inference over a gap-free mains series on the model's grid.
// Windows start every `stride` samples; the last one may run past the end,
// where its input is padded and its output discarded. State rows are
// reconciled across windows, post-processed per variant over the full
// sequence, combined with each window's ratings and averaged where windows
// overlap.
DisaggregationResult disaggregate(const DualDnnModel& model, const PowerSeries& mains,
                                  const ApplianceStateModel& state_model, Variant variant, std::size_t stride,
                                  const FilterConfig& filter = {});

// Uses the state model stored in the model's metadata.
DisaggregationResult disaggregate(const DualDnnModel& model, const PowerSeries& mains, Variant variant,
                                  std::size_t stride, const FilterConfig& filter = {});

// FNV-1a over parameter bytes; used to show inference leaves weights alone.
std::uint64_t parameter_checksum(const DualDnnModel& model);

}  // namespace nilm
