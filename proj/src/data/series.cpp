#include "nilm/data/series.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "nilm/error.hpp"

namespace nilm {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

struct Row {
    double time;
    double watts;
};

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

std::size_t PowerSeries::missing_count() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), is_missing));
}

PowerSeries PowerSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > values.size()) {
        throw Error("series slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range " +
                    std::to_string(values.size()));
    }
    PowerSeries out{time_at(begin), period, {}};
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin),
                      values.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

PowerSeries parse_csv(std::istream& in, std::int64_t period, const std::string& source) {
    if (period <= 0) throw Error("load_csv: period must be positive");
    std::vector<Row> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        const auto comma = view.find(',');
        Row row{};
        const bool ok = comma != std::string_view::npos && parse_double(view.substr(0, comma), row.time) &&
                        parse_double(view.substr(comma + 1), row.watts);
        if (!ok) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw Error(source + ":" + std::to_string(line_no) + ": cannot parse row '" + std::string(view) + "'");
        }
        if (row.watts < 0.0) {
            throw Error(source + ":" + std::to_string(line_no) + ": negative power reading");
        }
        if (!rows.empty() && row.time < rows.back().time) {
            throw Error(source + ":" + std::to_string(line_no) + ": timestamp " + format_double(row.time) +
                        " precedes " + format_double(rows.back().time));
        }
        if (!rows.empty() && row.time == rows.back().time) {
            rows.back() = row;
        } else {
            rows.push_back(row);
        }
    }
    if (rows.empty()) throw Error(source + ": no data rows");

    const double start = rows.front().time;
    const double p = static_cast<double>(period);
    const auto count = static_cast<std::size_t>(std::floor((rows.back().time - start) / p)) + 1;
    PowerSeries series{static_cast<std::int64_t>(std::llround(start)), period, std::vector<double>(count, kMissing)};
    std::size_t r = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const double grid = start + static_cast<double>(k) * p;
        while (r + 1 < rows.size() && rows[r + 1].time <= grid) ++r;
        if (rows[r].time == grid) {
            series.values[k] = rows[r].watts;
        } else if (r + 1 < rows.size() && rows[r + 1].time - rows[r].time <= p) {
            series.values[k] = rows[r].watts;
        }
    }
    return series;
}

PowerSeries load_csv(const std::filesystem::path& path, std::int64_t period) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return parse_csv(in, period, path.string());
}

void write_csv(const PowerSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch_seconds,watts\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (is_missing(series.values[i])) continue;
        out << series.time_at(i) << ',' << format_double(series.values[i]) << '\n';
    }
    if (!out) throw Error("write failed for " + path.string());
}

PowerSeries fill_gaps(const PowerSeries& series, std::int64_t short_gap_limit) {
    PowerSeries out = series;
    auto& v = out.values;
    if (!v.empty() && std::all_of(v.begin(), v.end(), is_missing)) throw Error("fill_gaps: series is entirely missing");
    std::size_t i = 0;
    while (i < v.size()) {
        if (!is_missing(v[i])) {
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < v.size() && is_missing(v[end])) ++end;
        const auto duration = static_cast<std::int64_t>(end - i) * series.period;
        double fill = 0.0;
        if (duration < short_gap_limit) fill = end < v.size() ? v[end] : v[i - 1];
        std::fill(v.begin() + static_cast<std::ptrdiff_t>(i), v.begin() + static_cast<std::ptrdiff_t>(end), fill);
        i = end;
    }
    return out;
}

void Normalizer::validate() const {
    if (!(std > 0.0) || !std::isfinite(std) || !std::isfinite(mean)) {
        throw Error("normalization requires finite mean and std > 0, got std=" + format_double(std));
    }
}

std::vector<double> normalize(std::span<const double> values, double mean, double std) {
    Normalizer{mean, std}.validate();
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / std;
    return out;
}

std::vector<double> denormalize(std::span<const double> values, double mean, double std) {
    Normalizer{mean, std}.validate();
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * std + mean;
    return out;
}

Normalizer fit_normalizer(std::span<const double> values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        if (is_missing(v)) continue;
        sum += v;
        ++n;
    }
    if (n == 0) throw Error("fit_normalizer: no valid samples");
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double v : values) {
        if (!is_missing(v)) sq += (v - mean) * (v - mean);
    }
    const double std = std::sqrt(sq / static_cast<double>(n));
    return {mean, std > 0.0 ? std : 1.0};
}

}  // namespace nilm
