#pragma once

// State-sequence post-processing: hard gating, gumbel-softmax relaxation,
// median filtering and reconciliation of overlapping window estimates.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nilm/core/tensor.hpp"

namespace nilm {

struct FilterConfig {
    std::size_t window = 5;  // odd, >= 3
    double tau = 1.0;        // gumbel temperature

    void validate() const;
};

// One-hot of the largest entry, ties to the lowest index.
std::vector<double> hard_gate(std::span<const double> probabilities);
// Row-wise hard_gate over [rows, states].
Tensor hard_gate(const Tensor& probabilities);

// Standard Gumbel(0, 1) draw.
double sample_gumbel(std::mt19937_64& rng);

std::vector<double> gumbel_softmax(std::span<const double> logits, std::span<const double> gumbel_noise, double tau);
std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau, std::mt19937_64& rng);
std::vector<double> gumbel_softmax_sample(std::span<const double> logits, double tau, std::uint64_t seed);

// Centered binary median per state channel over one-hot rows [T, states];
// the window shrinks symmetrically at the ends. Each filtered row is mapped
// back to one-hot: the channel whose median is 1, or when no channel holds a
// majority, the lowest-index state present in the window. With two states
// this is exactly the majority flip rule.
Tensor median_filter(const Tensor& states, const FilterConfig& cfg);

// out[t] = ratings[active state of row t].
std::vector<double> combine_hard(std::span<const double> power_ratings, const Tensor& states);

struct WindowEstimate {
    std::size_t start = 0;
    std::vector<double> values;
};

// Mean of all window estimates covering each position. Window samples past
// total_length are ignored.
std::vector<double> reconcile_overlaps(std::span<const WindowEstimate> windows, std::size_t total_length);

}  // namespace nilm
