#include "nilm/postprocess/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include "nilm/error.hpp"

namespace nilm {

namespace {

std::size_t argmax(const double* row, std::size_t width) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

std::vector<std::size_t> active_states(const Tensor& states, const char* what) {
    if (states.rank() != 2 || states.extent(1) == 0) {
        throw Error(std::string(what) + ": expected [T, states], got " + shape_str(states.shape()));
    }
    const std::size_t width = states.extent(1);
    std::vector<std::size_t> active(states.extent(0));
    for (std::size_t t = 0; t < active.size(); ++t) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < width; ++j) {
            const double v = states.at(t, j);
            if (v == 1.0) {
                ++ones;
                active[t] = j;
            } else if (v != 0.0) {
                ones = 2;
            }
        }
        if (ones != 1) throw Error(std::string(what) + ": row " + std::to_string(t) + " is not one-hot");
    }
    return active;
}

}  // namespace

void FilterConfig::validate() const {
    if (window < 3 || window % 2 == 0) {
        throw Error("median window must be odd and >= 3, got " + std::to_string(window));
    }
    if (!(tau > 0.0)) throw Error("gumbel temperature must be positive");
}

std::vector<double> hard_gate(std::span<const double> probabilities) {
    if (probabilities.empty()) throw Error("hard_gate: empty row");
    std::vector<double> out(probabilities.size(), 0.0);
    out[argmax(probabilities.data(), probabilities.size())] = 1.0;
    return out;
}

Tensor hard_gate(const Tensor& probabilities) {
    if (probabilities.rank() != 2 || probabilities.extent(1) == 0) {
        throw Error("hard_gate: expected [rows, states], got " + shape_str(probabilities.shape()));
    }
    const std::size_t width = probabilities.extent(1);
    Tensor out(probabilities.shape());
    for (std::size_t r = 0; r < probabilities.extent(0); ++r) {
        out.at(r, argmax(probabilities.data() + r * width, width)) = 1.0;
    }
    return out;
}

double sample_gumbel(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double u = 0.0;
    while (u <= 0.0) u = uniform(rng);
    return -std::log(-std::log(u));
}

std::vector<double> gumbel_softmax(std::span<const double> logits, std::span<const double> gumbel_noise, double tau) {
    if (!(tau > 0.0)) throw Error("gumbel_softmax: temperature must be positive");
    if (logits.empty() || logits.size() != gumbel_noise.size()) {
        throw Error("gumbel_softmax: logits and noise must be non-empty and equally long");
    }
    std::vector<double> out(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        if (!std::isfinite(logits[j])) throw Error("gumbel_softmax: non-finite logit");
        out[j] = (logits[j] + gumbel_noise[j]) / tau;
    }
    const double peak = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (double& v : out) sum += (v = std::exp(v - peak));
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau, std::mt19937_64& rng) {
    if (!(tau > 0.0)) throw Error("gumbel_softmax: temperature must be positive");
    std::vector<double> noise(logits.size());
    for (double& g : noise) g = sample_gumbel(rng);
    return gumbel_softmax(logits, noise, tau);
}

std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return gumbel_softmax_sample(logits, tau, rng);
}

Tensor median_filter(const Tensor& states, const FilterConfig& cfg) {
    cfg.validate();
    const auto active = active_states(states, "median_filter");
    const std::size_t n = active.size();
    const std::size_t width = states.extent(1);
    const std::size_t half = cfg.window / 2;

    // Prefix counts per channel make each window count O(1).
    std::vector<std::size_t> prefix((n + 1) * width, 0);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < width; ++j) prefix[(t + 1) * width + j] = prefix[t * width + j];
        ++prefix[(t + 1) * width + active[t]];
    }

    Tensor out(states.shape());
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t radius = std::min({half, t, n - 1 - t});
        const std::size_t lo = t - radius;
        const std::size_t hi = t + radius + 1;
        const std::size_t span = hi - lo;
        // Binary median per channel: 1 exactly when that channel holds the
        // majority. With no majority every median is 0 and argmax falls to the
        // lowest index; restrict that to states present in the window.
        std::size_t chosen = width;
        for (std::size_t j = 0; j < width; ++j) {
            const std::size_t count = prefix[hi * width + j] - prefix[lo * width + j];
            if (2 * count > span) {
                chosen = j;
                break;
            }
            if (count > 0 && chosen == width) chosen = j;
        }
        out.at(t, chosen) = 1.0;
    }
    return out;
}

std::vector<double> combine_hard(std::span<const double> power_ratings, const Tensor& states) {
    const auto active = active_states(states, "combine_hard");
    if (states.extent(1) != power_ratings.size()) {
        throw Error("combine_hard: " + std::to_string(power_ratings.size()) + " ratings vs state matrix " +
                    shape_str(states.shape()));
    }
    std::vector<double> out(active.size());
    for (std::size_t t = 0; t < active.size(); ++t) out[t] = power_ratings[active[t]];
    return out;
}

std::vector<double> reconcile_overlaps(std::span<const WindowEstimate> windows, std::size_t total_length) {
    std::vector<double> sum(total_length, 0.0);
    std::vector<std::size_t> count(total_length, 0);
    for (const auto& w : windows) {
        for (std::size_t i = 0; i < w.values.size() && w.start + i < total_length; ++i) {
            sum[w.start + i] += w.values[i];
            ++count[w.start + i];
        }
    }
    for (std::size_t t = 0; t < total_length; ++t) {
        if (count[t] == 0) throw Error("reconcile_overlaps: position " + std::to_string(t) + " is not covered");
        sum[t] /= static_cast<double>(count[t]);
    }
    return sum;
}

}  // namespace nilm
