#include "nilm/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nilm/error.hpp"

namespace nilm {

namespace {

void require_aligned(const PowerSeries& a, const PowerSeries& b, const std::string& what) {
    if (a.start_time != b.start_time || a.period != b.period || a.size() != b.size()) {
        throw Error(what + ": series are misaligned (start " + std::to_string(a.start_time) + "/" +
                    std::to_string(b.start_time) + ", period " + std::to_string(a.period) + "/" +
                    std::to_string(b.period) + ", length " + std::to_string(a.size()) + "/" +
                    std::to_string(b.size()) + ")");
    }
}

}  // namespace

double mae(std::span<const double> truth, std::span<const double> estimate) {
    if (truth.size() != estimate.size()) {
        throw Error("mae: length mismatch " + std::to_string(truth.size()) + " vs " + std::to_string(estimate.size()));
    }
    if (truth.empty()) throw Error("mae: empty series");
    double sum = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) sum += std::abs(truth[t] - estimate[t]);
    return sum / static_cast<double>(truth.size());
}

double sae(double truth_total, double estimate_total) {
    if (!(truth_total > 0.0)) throw Error("sae: ground-truth energy must be positive");
    return std::abs(estimate_total - truth_total) / truth_total;
}

double energy(const PowerSeries& series) {
    double sum = 0.0;
    for (double v : series.values) {
        if (!is_missing(v)) sum += v;
    }
    return sum * static_cast<double>(series.period);
}

std::vector<MetricRow> report(std::span<const ReportEntry> entries) {
    std::vector<MetricRow> rows;
    for (const auto& e : entries) {
        require_aligned(e.truth, e.variant, "report '" + e.appliance + "'");
        if (!e.plain.values.empty()) require_aligned(e.truth, e.plain, "report '" + e.appliance + "'");
        MetricRow row;
        row.appliance = e.appliance;
        row.mae = mae(e.truth.values, e.variant.values);
        row.samples = e.truth.size();
        row.truth_energy = energy(e.truth);
        row.estimate_energy = energy(e.variant);
        row.sae = sae(row.truth_energy, row.estimate_energy);
        rows.push_back(row);
    }
    return rows;
}

void write_metric_table(std::span<const MetricRow> rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "appliance,MAE_W,SAE,T,r,r_tilde\n";
    for (const auto& r : rows) {
        out << r.appliance << ',' << r.mae << ',' << r.sae << ',' << r.samples << ',' << r.truth_energy << ','
            << r.estimate_energy << '\n';
    }
}

std::vector<MetricRow> read_metric_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        MetricRow r;
        std::string field;
        std::getline(ss, r.appliance, ',');
        char comma;
        if (!(ss >> r.mae >> comma >> r.sae >> comma >> r.samples >> comma >> r.truth_energy >> comma >>
              r.estimate_energy)) {
            throw Error(path.string() + ": malformed metric row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

void write_plot_data(const ReportEntry& e, const std::filesystem::path& path) {
    require_aligned(e.truth, e.variant, "plot data '" + e.appliance + "'");
    const PowerSeries& plain = e.plain.values.empty() ? e.variant : e.plain;
    require_aligned(e.truth, plain, "plot data '" + e.appliance + "'");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    out << "t,truth,plain,variant\n";
    for (std::size_t i = 0; i < e.truth.size(); ++i) {
        out << e.truth.time_at(i) << ',' << e.truth.values[i] << ',' << plain.values[i] << ',' << e.variant.values[i]
            << '\n';
    }
}

void align_series(PowerSeries& a, PowerSeries& b) {
    if (a.period != b.period) {
        throw Error("align: periods differ (" + std::to_string(a.period) + " vs " + std::to_string(b.period) + ")");
    }
    if ((a.start_time - b.start_time) % a.period != 0) throw Error("align: sample grids are out of phase");
    const std::int64_t start = std::max(a.start_time, b.start_time);
    const std::int64_t end = std::min(a.time_at(a.size()), b.time_at(b.size()));
    if (end <= start) throw Error("align: series do not overlap in time");
    auto cut = [&](PowerSeries& s) {
        const auto begin = static_cast<std::size_t>((start - s.start_time) / s.period);
        const auto stop = static_cast<std::size_t>((end - s.start_time) / s.period);
        s = s.slice(begin, stop);
    };
    cut(a);
    cut(b);
}

}  // namespace nilm
