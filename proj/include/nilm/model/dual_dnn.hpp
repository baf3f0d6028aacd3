#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nilm/core/tensor.hpp"
#include "nilm/data/series.hpp"
#include "nilm/data/states.hpp"
#include "nilm/data/windows.hpp"

namespace nilm {

struct LossOptions;
struct LossBreakdown;
class DualDnnModel;
LossBreakdown batch_loss(DualDnnModel& model, std::span<const WindowedExample> batch, const LossOptions& options,
                         std::mt19937_64* noise, bool accumulate);

struct ConvLayerSpec {
    std::size_t filters = 1;
    std::size_t kernel = 1;
    std::size_t stride = 1;

    bool operator==(const ConvLayerSpec&) const = default;
};

struct DualDnnConfig {
    WindowConfig window;
    std::size_t state_count = 2;
    std::vector<ConvLayerSpec> conv = seq2point_stack();
    std::size_t hidden = 1024;
    double gumbel_tau = 1.0;
    std::uint64_t seed = 0;

    // Five stride-1 layers: filters 30, 30, 40, 50, 50; kernels 10, 8, 6, 5, 5.
    static std::vector<ConvLayerSpec> seq2point_stack();

    // Channels x length after the conv stack, flattened.
    std::size_t feature_length() const;
    void validate() const;
};

// Normalization context and provenance carried alongside the weights so a
// checkpoint alone is enough to disaggregate.
struct ModelMetadata {
    std::size_t epochs_seen = 0;
    std::string dataset_tag;
    Normalizer mains;
    std::int64_t period = 0;  // seconds per sample of the training grid; 0 if unknown
    std::optional<ApplianceStateModel> appliance;
};

struct ForwardOutput {
    std::vector<double> power_ratings;  // [state_count], normalized
    Tensor state_probs;                 // [s, state_count]
    std::vector<double> combined;       // [s], normalized
};

// Power-rating regressor and per-timestep state classifier sharing nothing
// but the input window. Each subnetwork is conv stack -> relu -> dense hidden
// -> relu -> dense head; the power head has state_count outputs, the state
// head s * state_count logits, softmaxed per timestep.
class DualDnnModel {
public:
    explicit DualDnnModel(DualDnnConfig config);

    const DualDnnConfig& config() const { return config_; }
    ModelMetadata& metadata() { return metadata_; }
    const ModelMetadata& metadata() const { return metadata_; }

    std::span<Parameter> parameters() { return params_; }
    std::span<const Parameter> parameters() const { return params_; }
    Parameter& parameter(const std::string& name);
    const Parameter& parameter(const std::string& name) const;

    std::vector<double> forward_power(std::span<const double> input) const;
    Tensor forward_state(std::span<const double> input) const;
    ForwardOutput forward(std::span<const double> input) const;
    std::vector<ForwardOutput> forward_batch(std::span<const std::vector<double>> inputs) const;

    // Zeroes both head weight matrices (biases untouched).
    void zero_final_layers();

    void zero_grad();

private:
    friend LossBreakdown batch_loss(DualDnnModel&, std::span<const WindowedExample>, const LossOptions&,
                                    std::mt19937_64*, bool);

    struct SubnetTrace;
    struct Subnet {
        std::size_t first_param = 0;  // conv layers (weight, bias)..., hidden, head
        std::size_t head_width = 0;
    };

    DualDnnConfig config_;
    ModelMetadata metadata_;
    std::vector<Parameter> params_;
    Subnet power_;
    Subnet state_;

    void add_subnet(Subnet& net, const std::string& prefix, std::size_t head_width, std::mt19937_64& rng);
    void check_input(std::size_t length) const;
    SubnetTrace run_subnet(const Subnet& net, Tensor input) const;
    void backprop_subnet(const Subnet& net, const SubnetTrace& trace, const Tensor& grad_out);
    Tensor stack_inputs(std::span<const std::vector<double>> inputs) const;
};

// Matrix product of state probabilities and ratings: out[t] = sum_j probs[t, j] * ratings[j].
std::vector<double> combine(std::span<const double> power_ratings, const Tensor& state_probs);

double loss_output(std::span<const double> combined, std::span<const double> target_power);
double loss_power(std::span<const double> power_ratings, std::span<const double> centroid_targets);
double loss_state(const Tensor& state_probs, const Tensor& target_states);
// loss_output + loss_state + lambda_power * loss_power.
double total_loss(const WindowedExample& example, const ForwardOutput& output, double lambda_power = 0.0,
                  std::span<const double> centroid_targets = {});

struct LossOptions {
    double lambda_power = 0.0;
    std::vector<double> centroid_targets;  // normalized; required when lambda_power != 0
    // Use gumbel-softmax samples instead of probabilities inside the output
    // product (hard-gating variants). The state loss always sees probabilities.
    bool gumbel = false;
};

struct LossBreakdown {
    double total = 0.0;
    double output = 0.0;
    double state = 0.0;
    double power = 0.0;
};

// Batch-mean loss. With `accumulate` set, d(loss)/d(theta) is added into every
// parameter's gradient buffer. `noise` supplies the gumbel draws and must be
// non-null when options.gumbel is set.
LossBreakdown batch_loss(DualDnnModel& model, std::span<const WindowedExample> batch, const LossOptions& options,
                         std::mt19937_64* noise, bool accumulate);

}  // namespace nilm
