#include "nilm/model/dual_dnn.hpp"

#include <algorithm>
#include <cmath>

#include "nilm/core/ops.hpp"
#include "nilm/error.hpp"
#include "nilm/postprocess/postprocess.hpp"

namespace nilm {

std::vector<ConvLayerSpec> DualDnnConfig::seq2point_stack() {
    return {{30, 10, 1}, {30, 8, 1}, {40, 6, 1}, {50, 5, 1}, {50, 5, 1}};
}

std::size_t DualDnnConfig::feature_length() const {
    std::size_t length = window.input_length();
    std::size_t channels = 1;
    for (const auto& layer : conv) {
        if (layer.kernel > length) return 0;
        length = (length - layer.kernel) / layer.stride + 1;
        channels = layer.filters;
    }
    return channels * length;
}

void DualDnnConfig::validate() const {
    window.validate();
    if (state_count < 2) throw Error("model config: state_count must be >= 2");
    for (std::size_t i = 0; i < conv.size(); ++i) {
        if (conv[i].filters == 0 || conv[i].kernel == 0 || conv[i].stride == 0) {
            throw Error("model config: conv layer " + std::to_string(i) + " has a zero extent");
        }
    }
    if (feature_length() == 0) {
        throw Error("model config: conv stack does not fit an input of length " +
                    std::to_string(window.input_length()));
    }
    if (hidden == 0) throw Error("model config: hidden width must be >= 1");
    if (!(gumbel_tau > 0.0)) throw Error("model config: gumbel temperature must be positive");
}

struct DualDnnModel::SubnetTrace {
    std::vector<Tensor> acts;  // acts[0] is the input [B, 1, L]; acts[i + 1] = relu(conv_i(acts[i]))
    Tensor flat;               // [B, features]
    Tensor hidden;             // [B, hidden], post-relu
    Tensor out;                // [B, head]
};

DualDnnModel::DualDnnModel(DualDnnConfig config) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    add_subnet(power_, "power", config_.state_count, rng);
    add_subnet(state_, "state", config_.window.s * config_.state_count, rng);
}

void DualDnnModel::add_subnet(Subnet& net, const std::string& prefix, std::size_t head_width, std::mt19937_64& rng) {
    net.first_param = params_.size();
    net.head_width = head_width;
    auto add = [&](const std::string& name, Shape shape, double fan_in, double fan_out, bool random) {
        Tensor t(std::move(shape));
        if (random) {
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            std::uniform_real_distribution<double> dist(-limit, limit);
            for (double& v : t.values()) v = dist(rng);
        }
        params_.push_back({std::move(t), prefix + "." + name, true});
    };
    std::size_t channels = 1;
    for (std::size_t i = 0; i < config_.conv.size(); ++i) {
        const auto& layer = config_.conv[i];
        const std::string name = "conv" + std::to_string(i);
        add(name + ".weight", {layer.filters, channels, layer.kernel}, static_cast<double>(channels * layer.kernel),
            static_cast<double>(layer.filters * layer.kernel), true);
        add(name + ".bias", {layer.filters}, 0, 0, false);
        channels = layer.filters;
    }
    const std::size_t features = config_.feature_length();
    add("hidden.weight", {config_.hidden, features}, static_cast<double>(features), static_cast<double>(config_.hidden),
        true);
    add("hidden.bias", {config_.hidden}, 0, 0, false);
    add("head.weight", {head_width, config_.hidden}, static_cast<double>(config_.hidden),
        static_cast<double>(head_width), true);
    add("head.bias", {head_width}, 0, 0, false);
}

Parameter& DualDnnModel::parameter(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw Error("no parameter named '" + name + "'");
}

const Parameter& DualDnnModel::parameter(const std::string& name) const {
    return const_cast<DualDnnModel*>(this)->parameter(name);
}

void DualDnnModel::check_input(std::size_t length) const {
    if (length != config_.window.input_length()) {
        throw Error("model input has length " + std::to_string(length) + ", expected " +
                    std::to_string(config_.window.input_length()));
    }
}

Tensor DualDnnModel::stack_inputs(std::span<const std::vector<double>> inputs) const {
    const std::size_t length = config_.window.input_length();
    Tensor batch({inputs.size(), 1, length});
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        check_input(inputs[b].size());
        std::copy(inputs[b].begin(), inputs[b].end(), batch.data() + b * length);
    }
    return batch;
}

DualDnnModel::SubnetTrace DualDnnModel::run_subnet(const Subnet& net, Tensor input) const {
    SubnetTrace tr;
    const std::size_t batch = input.extent(0);
    tr.acts.push_back(std::move(input));
    std::size_t p = net.first_param;
    for (const auto& layer : config_.conv) {
        Tensor pre = ops::conv1d(tr.acts.back(), params_[p].tensor, params_[p + 1].tensor, layer.stride);
        tr.acts.push_back(ops::activation(pre, ops::Activation::relu));
        p += 2;
    }
    tr.flat = tr.acts.back();
    tr.flat.reshape({batch, config_.feature_length()});
    tr.hidden = ops::activation(ops::dense(tr.flat, params_[p].tensor, params_[p + 1].tensor), ops::Activation::relu);
    tr.out = ops::dense(tr.hidden, params_[p + 2].tensor, params_[p + 3].tensor);
    return tr;
}

void DualDnnModel::backprop_subnet(const Subnet& net, const SubnetTrace& tr, const Tensor& grad_out) {
    const std::size_t layers = config_.conv.size();
    const std::size_t p_hidden = net.first_param + 2 * layers;
    Tensor g = ops::dense_backward(tr.hidden, params_[p_hidden + 2].tensor, params_[p_hidden + 3].tensor, grad_out);
    g = ops::activation_backward(tr.hidden, ops::Activation::relu, g);
    g = ops::dense_backward(tr.flat, params_[p_hidden].tensor, params_[p_hidden + 1].tensor, g);
    g.reshape(tr.acts.back().shape());
    for (std::size_t i = layers; i-- > 0;) {
        const std::size_t p = net.first_param + 2 * i;
        g = ops::activation_backward(tr.acts[i + 1], ops::Activation::relu, g);
        g = ops::conv1d_backward(tr.acts[i], params_[p].tensor, params_[p + 1].tensor, config_.conv[i].stride, g);
    }
}

std::vector<double> DualDnnModel::forward_power(std::span<const double> input) const {
    check_input(input.size());
    Tensor batch({1, 1, input.size()}, std::vector<double>(input.begin(), input.end()));
    const auto tr = run_subnet(power_, std::move(batch));
    return {tr.out.values().begin(), tr.out.values().end()};
}

Tensor DualDnnModel::forward_state(std::span<const double> input) const {
    check_input(input.size());
    Tensor batch({1, 1, input.size()}, std::vector<double>(input.begin(), input.end()));
    auto tr = run_subnet(state_, std::move(batch));
    tr.out.reshape({config_.window.s, config_.state_count});
    return ops::activation(tr.out, ops::Activation::softmax);
}

ForwardOutput DualDnnModel::forward(std::span<const double> input) const {
    std::vector<std::vector<double>> one{std::vector<double>(input.begin(), input.end())};
    return std::move(forward_batch(one).front());
}

std::vector<ForwardOutput> DualDnnModel::forward_batch(std::span<const std::vector<double>> inputs) const {
    if (inputs.empty()) return {};
    Tensor batch = stack_inputs(inputs);
    const auto power = run_subnet(power_, batch);
    auto state = run_subnet(state_, std::move(batch));
    const std::size_t s = config_.window.s;
    const std::size_t l = config_.state_count;
    state.out.reshape({inputs.size() * s, l});
    const Tensor probs = ops::activation(state.out, ops::Activation::softmax);

    std::vector<ForwardOutput> out(inputs.size());
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        ForwardOutput& o = out[b];
        o.power_ratings.assign(power.out.data() + b * l, power.out.data() + (b + 1) * l);
        o.state_probs = Tensor({s, l}, std::vector<double>(probs.data() + b * s * l, probs.data() + (b + 1) * s * l));
        o.combined = combine(o.power_ratings, o.state_probs);
    }
    return out;
}

void DualDnnModel::zero_final_layers() {
    for (const Subnet* net : {&power_, &state_}) {
        auto& w = params_[net->first_param + 2 * config_.conv.size() + 2].tensor;
        std::fill(w.values().begin(), w.values().end(), 0.0);
    }
}

void DualDnnModel::zero_grad() {
    for (auto& p : params_) p.tensor.clear_grad();
}

std::vector<double> combine(std::span<const double> power_ratings, const Tensor& state_probs) {
    if (state_probs.rank() != 2 || state_probs.extent(1) != power_ratings.size()) {
        throw Error("combine: ratings of length " + std::to_string(power_ratings.size()) +
                    " do not conform with state matrix " + shape_str(state_probs.shape()));
    }
    const std::size_t l = power_ratings.size();
    std::vector<double> out(state_probs.extent(0), 0.0);
    for (std::size_t t = 0; t < out.size(); ++t) {
        double sum = 0.0;
        for (std::size_t j = 0; j < l; ++j) sum += state_probs.at(t, j) * power_ratings[j];
        out[t] = sum;
    }
    return out;
}

double loss_output(std::span<const double> combined, std::span<const double> target_power) {
    if (combined.size() != target_power.size()) {
        throw Error("loss_output: length " + std::to_string(combined.size()) + " vs " +
                    std::to_string(target_power.size()));
    }
    const Tensor pred({combined.size()}, std::vector<double>(combined.begin(), combined.end()));
    const Tensor target({target_power.size()}, std::vector<double>(target_power.begin(), target_power.end()));
    return ops::mse_loss(pred, target).value;
}

double loss_power(std::span<const double> power_ratings, std::span<const double> centroid_targets) {
    if (power_ratings.size() != centroid_targets.size()) {
        throw Error("loss_power: " + std::to_string(power_ratings.size()) + " ratings vs " +
                    std::to_string(centroid_targets.size()) + " centroids");
    }
    return loss_output(power_ratings, centroid_targets);
}

double loss_state(const Tensor& state_probs, const Tensor& target_states) {
    return ops::cross_entropy_loss(state_probs, target_states).value;
}

double total_loss(const WindowedExample& example, const ForwardOutput& output, double lambda_power,
                  std::span<const double> centroid_targets) {
    double total = loss_output(output.combined, example.target_power) + loss_state(output.state_probs, example.target_states);
    if (lambda_power != 0.0) total += lambda_power * loss_power(output.power_ratings, centroid_targets);
    return total;
}

LossBreakdown batch_loss(DualDnnModel& model, std::span<const WindowedExample> batch, const LossOptions& options,
                         std::mt19937_64* noise, bool accumulate) {
    const DualDnnConfig& cfg = model.config_;
    const std::size_t B = batch.size();
    const std::size_t s = cfg.window.s;
    const std::size_t l = cfg.state_count;
    if (B == 0) throw Error("batch_loss: empty batch");
    if (options.gumbel && noise == nullptr) throw Error("batch_loss: gumbel mixing needs a noise generator");
    if (options.lambda_power != 0.0 && options.centroid_targets.size() != l) {
        throw Error("batch_loss: power loss needs " + std::to_string(l) + " centroid targets");
    }
    const std::size_t length = cfg.window.input_length();
    Tensor input({B, 1, length});
    for (std::size_t b = 0; b < B; ++b) {
        const auto& ex = batch[b];
        if (ex.input.size() != length || ex.target_power.size() != s || ex.target_states.shape() != Shape{s, l}) {
            throw Error("batch_loss: example " + std::to_string(b) + " does not match the model's window/state shape");
        }
        std::copy(ex.input.begin(), ex.input.end(), input.data() + b * length);
    }

    const auto power = model.run_subnet(model.power_, input);
    auto state = model.run_subnet(model.state_, std::move(input));
    Tensor logits = state.out;
    logits.reshape({B * s, l});
    const Tensor probs = ops::activation(logits, ops::Activation::softmax);

    Tensor relaxed;
    if (options.gumbel) {
        relaxed = Tensor(logits.shape());
        std::vector<double> g(l);
        for (std::size_t r = 0; r < B * s; ++r) {
            for (double& v : g) v = sample_gumbel(*noise);
            const auto row = gumbel_softmax(std::span<const double>(logits.data() + r * l, l), g, cfg.gumbel_tau);
            std::copy(row.begin(), row.end(), relaxed.data() + r * l);
        }
    }
    const Tensor& mix = options.gumbel ? relaxed : probs;

    LossBreakdown loss;
    Tensor grad_ratings({B, l});
    Tensor grad_mix({B * s, l});
    Tensor grad_logits({B * s, l});
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t b = 0; b < B; ++b) {
        const auto& ex = batch[b];
        const double* ratings = power.out.data() + b * l;
        double out_loss = 0.0;
        double ce = 0.0;
        for (std::size_t t = 0; t < s; ++t) {
            const std::size_t r = b * s + t;
            double combined = 0.0;
            for (std::size_t j = 0; j < l; ++j) combined += mix.at(r, j) * ratings[j];
            const double diff = combined - ex.target_power[t];
            out_loss += diff * diff;
            const double d_combined = 2.0 * diff / static_cast<double>(s) * inv_b;
            for (std::size_t j = 0; j < l; ++j) {
                grad_ratings.at(b, j) += d_combined * mix.at(r, j);
                grad_mix.at(r, j) = d_combined * ratings[j];
                const double target = ex.target_states.at(t, j);
                if (target != 0.0) ce -= target * std::log(std::max(probs.at(r, j), ops::kLogClip));
                // softmax + log fused; equal to the clipped chain rule while p > clip.
                grad_logits.at(r, j) = (probs.at(r, j) - target) / static_cast<double>(s) * inv_b;
            }
        }
        out_loss /= static_cast<double>(s);
        ce /= static_cast<double>(s);
        double pw = 0.0;
        if (options.lambda_power != 0.0) {
            for (std::size_t j = 0; j < l; ++j) {
                const double diff = ratings[j] - options.centroid_targets[j];
                pw += diff * diff;
                grad_ratings.at(b, j) += options.lambda_power * 2.0 * diff / static_cast<double>(l) * inv_b;
            }
            pw /= static_cast<double>(l);
        }
        loss.output += out_loss * inv_b;
        loss.state += ce * inv_b;
        loss.power += pw * inv_b;
    }
    loss.total = loss.output + loss.state + options.lambda_power * loss.power;
    if (!accumulate) return loss;

    Tensor through_mix = ops::activation_backward(mix, ops::Activation::softmax, grad_mix);
    const double mix_scale = options.gumbel ? 1.0 / cfg.gumbel_tau : 1.0;
    for (std::size_t i = 0; i < grad_logits.size(); ++i) grad_logits[i] += mix_scale * through_mix[i];
    grad_logits.reshape({B, s * l});

    model.backprop_subnet(model.power_, power, grad_ratings);
    model.backprop_subnet(model.state_, state, grad_logits);
    return loss;
}

}  // namespace nilm
