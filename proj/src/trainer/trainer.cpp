#include "nilm/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "nilm/core/adam.hpp"
#include "nilm/error.hpp"

namespace nilm {

namespace {

constexpr std::size_t kInferenceBatch = 32;

std::size_t row_argmax(const Tensor& rows, std::size_t r) {
    const std::size_t width = rows.extent(1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
        if (rows.at(r, j) > rows.at(r, best)) best = j;
    }
    return best;
}

}  // namespace

Variant parse_variant(const std::string& text) {
    if (text == "plain") return Variant::plain;
    if (text == "median") return Variant::median;
    if (text == "hard") return Variant::hard;
    if (text == "hard-median" || text == "hard_median") return Variant::hard_median;
    throw Error("unknown variant '" + text + "' (expected plain, median, hard, hard-median)");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::plain: return "plain";
        case Variant::median: return "median";
        case Variant::hard: return "hard";
        case Variant::hard_median: return "hard-median";
    }
    return "plain";
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw Error("train: batch_size must be >= 1");
    if (epochs < 1) throw Error("train: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be positive");
    if (!std::isfinite(lambda_power) || lambda_power < 0.0) throw Error("train: lambda_power must be >= 0");
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "epoch,loss_total,loss_output,loss_state\n";
    for (const auto& e : epochs) {
        out << e.epoch << ',' << e.loss_total << ',' << e.loss_output << ',' << e.loss_state << '\n';
    }
}

TrainReport train(DualDnnModel& model, const WindowSet& examples, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    const auto start_clock = std::chrono::steady_clock::now();
    const DualDnnConfig& mc = model.config();
    if (!examples.empty() && (!(examples.config() == mc.window) || examples.state_count() != mc.state_count)) {
        throw Error("train: examples use window (s=" + std::to_string(examples.config().s) +
                    ", w=" + std::to_string(examples.config().w) + ") with " +
                    std::to_string(examples.state_count()) + " states, model expects (s=" +
                    std::to_string(mc.window.s) + ", w=" + std::to_string(mc.window.w) + ") with " +
                    std::to_string(mc.state_count) + " states");
    }

    LossOptions options;
    options.lambda_power = cfg.lambda_power;
    options.gumbel = is_hard(cfg.variant) && cfg.gumbel_training;
    const ApplianceStateModel* states = examples.state_model();
    if (cfg.lambda_power != 0.0) {
        if (!states) throw Error("train: lambda_power needs a state model for centroid targets");
        options.centroid_targets = normalize(states->centroids, states->norm_mean, states->norm_std);
    }

    TrainReport report;
    if (examples.empty()) return report;

    model.metadata().mains = examples.mains_normalizer();
    if (examples.period() != 0) model.metadata().period = examples.period();
    if (states) model.metadata().appliance = *states;

    Adam adam(AdamConfig{cfg.learning_rate});
    std::mt19937_64 order_rng(cfg.seed);
    std::seed_seq noise_seed{cfg.seed, std::uint64_t{0x67756d62}};
    std::mt19937_64 noise_rng(noise_seed);

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t batch_index = 0;
    std::vector<WindowedExample> batch;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
        EpochRecord record{epoch, 0.0, 0.0, 0.0};
        for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
            const std::size_t last = std::min(order.size(), first + cfg.batch_size);
            batch.clear();
            for (std::size_t i = first; i < last; ++i) batch.push_back(examples.at(order[i]));
            const LossBreakdown loss = batch_loss(model, batch, options, &noise_rng, true);
            if (!std::isfinite(loss.total)) {
                model.zero_grad();
                throw Error("train: non-finite loss at batch " + std::to_string(batch_index) + " (epoch " +
                            std::to_string(epoch) + ")");
            }
            adam.step(model.parameters());
            const double weight = static_cast<double>(batch.size());
            record.loss_total += loss.total * weight;
            record.loss_output += loss.output * weight;
            record.loss_state += loss.state * weight;
            ++batch_index;
        }
        const double n = static_cast<double>(order.size());
        record.loss_total /= n;
        record.loss_output /= n;
        record.loss_state /= n;
        report.epochs.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    model.metadata().epochs_seen += cfg.epochs;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_clock).count();
    return report;
}

DisaggregationResult disaggregate(const DualDnnModel& model, const PowerSeries& mains,
                                  const ApplianceStateModel& state_model, Variant variant, std::size_t stride,
                                  const FilterConfig& filter) {
    const DualDnnConfig& mc = model.config();
    const std::size_t s = mc.window.s;
    const std::size_t l = mc.state_count;
    const std::size_t T = mains.size();
    state_model.validate();
    if (state_model.state_count() != l) {
        throw Error("disaggregate: state model has " + std::to_string(state_model.state_count()) +
                    " states, model expects " + std::to_string(l));
    }
    if (stride == 0) throw Error("disaggregate: stride must be >= 1");
    if (T < s) {
        throw Error("disaggregate: mains has " + std::to_string(T) + " samples, fewer than the output window " +
                    std::to_string(s));
    }
    if (mains.missing_count() > 0) throw Error("disaggregate: mains contains missing samples; fill gaps first");
    const std::int64_t grid = model.metadata().period;
    if (grid != 0 && mains.period != grid) {
        throw Error("disaggregate: mains period " + std::to_string(mains.period) + " s, model trained at " +
                    std::to_string(grid) + " s");
    }
    if (is_median(variant)) filter.validate();

    const Normalizer& norm = model.metadata().mains;
    norm.validate();
    const std::vector<double> normalized = normalize(mains.values, norm.mean, norm.std);
    const double pad = norm.apply(0.0);

    DisaggregationResult result;
    result.appliance = state_model.appliance_name;
    result.variant = variant;
    for (std::size_t start = 0; start < T; start += stride) result.window_starts.push_back(start);

    std::vector<std::vector<double>> ratings;
    ratings.reserve(result.window_starts.size());
    Tensor prob_sum({T, l});
    std::vector<std::size_t> coverage(T, 0);
    std::vector<std::vector<double>> inputs;
    for (std::size_t first = 0; first < result.window_starts.size(); first += kInferenceBatch) {
        const std::size_t last = std::min(result.window_starts.size(), first + kInferenceBatch);
        inputs.clear();
        for (std::size_t k = first; k < last; ++k) {
            inputs.push_back(window_input(normalized, result.window_starts[k], mc.window, pad));
        }
        const auto outputs = model.forward_batch(inputs);
        for (std::size_t k = first; k < last; ++k) {
            const ForwardOutput& out = outputs[k - first];
            const std::size_t start = result.window_starts[k];
            for (std::size_t t = 0; t < s && start + t < T; ++t) {
                for (std::size_t j = 0; j < l; ++j) prob_sum.at(start + t, j) += out.state_probs.at(t, j);
                ++coverage[start + t];
            }
            ratings.push_back(out.power_ratings);
        }
    }
    result.soft_states = std::move(prob_sum);
    for (std::size_t t = 0; t < T; ++t) {
        if (coverage[t] == 0) throw Error("disaggregate: position " + std::to_string(t) + " not covered");
        for (std::size_t j = 0; j < l; ++j) result.soft_states.at(t, j) /= static_cast<double>(coverage[t]);
    }

    switch (variant) {
        case Variant::plain:
            result.states = result.soft_states;
            break;
        case Variant::hard:
            result.states = hard_gate(result.soft_states);
            break;
        case Variant::hard_median:
            result.states = median_filter(hard_gate(result.soft_states), filter);
            break;
        case Variant::median: {
            // Keep soft rows; only rows whose decoded state the filter flips
            // become the one-hot of the filtered state.
            const Tensor filtered = median_filter(hard_gate(result.soft_states), filter);
            result.states = result.soft_states;
            for (std::size_t t = 0; t < T; ++t) {
                const std::size_t kept = row_argmax(filtered, t);
                if (kept == row_argmax(result.soft_states, t)) continue;
                for (std::size_t j = 0; j < l; ++j) result.states.at(t, j) = j == kept ? 1.0 : 0.0;
            }
            break;
        }
    }

    std::vector<WindowEstimate> estimates;
    estimates.reserve(result.window_starts.size());
    for (std::size_t k = 0; k < result.window_starts.size(); ++k) {
        const std::size_t start = result.window_starts[k];
        const std::size_t len = std::min(s, T - start);
        Tensor rows({len, l}, std::vector<double>(result.states.data() + start * l,
                                                 result.states.data() + (start + len) * l));
        estimates.push_back({start, is_hard(variant) ? combine_hard(ratings[k], rows) : combine(ratings[k], rows)});
    }
    const std::vector<double> merged = reconcile_overlaps(estimates, T);

    result.estimate = PowerSeries{mains.start_time, mains.period, std::vector<double>(T)};
    for (std::size_t t = 0; t < T; ++t) result.estimate.values[t] = std::max(0.0, state_model.normalizer().invert(merged[t]));
    for (const auto& r : ratings) {
        std::vector<double> watts(r.size());
        for (std::size_t j = 0; j < r.size(); ++j) watts[j] = std::max(0.0, state_model.normalizer().invert(r[j]));
        result.window_ratings.push_back(std::move(watts));
    }
    return result;
}

DisaggregationResult disaggregate(const DualDnnModel& model, const PowerSeries& mains, Variant variant,
                                  std::size_t stride, const FilterConfig& filter) {
    if (!model.metadata().appliance) throw Error("disaggregate: model carries no appliance state model");
    return disaggregate(model, mains, *model.metadata().appliance, variant, stride, filter);
}

std::uint64_t parameter_checksum(const DualDnnModel& model) {
    std::uint64_t hash = 1469598103934665603ull;
    for (const Parameter& p : model.parameters()) {
        for (double v : p.tensor.values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 8; ++i) {
                hash ^= (bits >> (8 * i)) & 0xff;
                hash *= 1099511628211ull;
            }
        }
    }
    return hash;
}

}  // namespace nilm
