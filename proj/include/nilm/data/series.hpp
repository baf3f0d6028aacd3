#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace nilm {

// Missing readings are stored as quiet NaN until fill_gaps removes them.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Uniformly sampled power readings in watts; sample t sits at start_time + t * period.
struct PowerSeries {
    std::int64_t start_time = 0;
    std::int64_t period = 1;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    std::int64_t time_at(std::size_t index) const { return start_time + static_cast<std::int64_t>(index) * period; }
    std::size_t missing_count() const;
    // Samples [begin, end).
    PowerSeries slice(std::size_t begin, std::size_t end) const;
};

// Parses "epoch_seconds,watts" rows (optional header line) onto a uniform grid
// starting at the first timestamp. A grid instant takes the latest reading at
// or before it when the gap to the following reading is at most `period`;
// wider holes are marked missing.
PowerSeries load_csv(const std::filesystem::path& path, std::int64_t period);
PowerSeries parse_csv(std::istream& in, std::int64_t period, const std::string& source = "<stream>");

// Writes "epoch_seconds,watts" with a header; missing samples are skipped.
void write_csv(const PowerSeries& series, const std::filesystem::path& path);

// Runs of missing samples lasting less than `short_gap_limit` seconds take the
// next valid value (the previous one for a trailing run); longer runs become 0 W.
PowerSeries fill_gaps(const PowerSeries& series, std::int64_t short_gap_limit = 180);

struct Normalizer {
    double mean = 0.0;
    double std = 1.0;

    double apply(double watts) const { return (watts - mean) / std; }
    double invert(double normalized) const { return normalized * std + mean; }
    void validate() const;
};

std::vector<double> normalize(std::span<const double> values, double mean, double std);
std::vector<double> denormalize(std::span<const double> values, double mean, double std);

// Mean and population standard deviation over non-missing samples; a zero
// spread falls back to 1 W so the result is always a valid normalizer.
Normalizer fit_normalizer(std::span<const double> values);

}  // namespace nilm
