#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nilm/data/series.hpp"

namespace nilm {

// Mean absolute error in watts.
double mae(std::span<const double> truth, std::span<const double> estimate);

// |estimate_total - truth_total| / truth_total.
double sae(double truth_total, double estimate_total);

// Sum of power x period, in watt-seconds.
double energy(const PowerSeries& series);

struct MetricRow {
    std::string appliance;
    double mae = 0.0;
    double sae = 0.0;
    std::size_t samples = 0;
    double truth_energy = 0.0;     // r
    double estimate_energy = 0.0;  // r~
};

struct ReportEntry {
    std::string appliance;
    PowerSeries truth;
    PowerSeries variant;  // the estimate being scored
    PowerSeries plain;    // optional comparison column; empty -> variant is repeated
};

// One row per entry, in input order. Series must share start time, period
// and length.
std::vector<MetricRow> report(std::span<const ReportEntry> entries);

// Columns appliance,MAE_W,SAE,T,r,r_tilde.
void write_metric_table(std::span<const MetricRow> rows, const std::filesystem::path& path);
std::vector<MetricRow> read_metric_table(const std::filesystem::path& path);

// Header "t,truth,plain,variant"; t is the epoch timestamp of each sample.
void write_plot_data(const ReportEntry& entry, const std::filesystem::path& path);

// Restricts two series to their common time span; both must share a period
// and a phase-aligned grid.
void align_series(PowerSeries& a, PowerSeries& b);

}  // namespace nilm
