#include "nilm/data/states.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include <json.hpp>

#include "nilm/error.hpp"

namespace nilm {

namespace {

constexpr int kRestarts = 10;
constexpr int kMaxIterations = 500;

struct Clustering {
    std::vector<double> centers;
    double inertia = std::numeric_limits<double>::infinity();
};

std::size_t nearest(double x, const std::vector<double>& centers) {
    std::size_t best = 0;
    double best_d = std::abs(x - centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = std::abs(x - centers[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

Clustering lloyd(const std::vector<double>& points, std::vector<double> centers) {
    const std::size_t k = centers.size();
    std::vector<std::size_t> assign(points.size(), k);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const std::size_t c = nearest(points[i], centers);
            if (c != assign[i]) {
                assign[i] = c;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<double> sum(k, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            sum[assign[i]] += points[i];
            ++count[assign[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] > 0) {
                centers[c] = sum[c] / static_cast<double>(count[c]);
                continue;
            }
            // Empty cluster: move it to the point worst served by its center.
            std::size_t worst = 0;
            double worst_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                const double d = std::abs(points[i] - centers[assign[i]]);
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            centers[c] = points[worst];
            assign[worst] = c;
        }
    }
    Clustering out{std::move(centers), 0.0};
    for (double p : points) {
        const double d = p - out.centers[nearest(p, out.centers)];
        out.inertia += d * d;
    }
    return out;
}

std::vector<double> farthest_point_seeds(const std::vector<double>& points, std::size_t k, std::size_t first) {
    std::vector<double> centers{points[first]};
    std::vector<double> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) dist[i] = std::abs(points[i] - centers[0]);
    while (centers.size() < k) {
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        centers.push_back(points[far]);
        for (std::size_t i = 0; i < points.size(); ++i) dist[i] = std::min(dist[i], std::abs(points[i] - points[far]));
    }
    return centers;
}

}  // namespace

void ApplianceStateModel::validate() const {
    if (centroids.size() < 2) throw Error("state model '" + appliance_name + "': needs at least 2 states");
    if (centroids[0] != 0.0) throw Error("state model '" + appliance_name + "': OFF centroid must be 0 W");
    for (std::size_t j = 1; j < centroids.size(); ++j) {
        if (!(centroids[j] > centroids[j - 1])) {
            throw Error("state model '" + appliance_name + "': centroids must be strictly increasing");
        }
    }
    if (!(norm_std > 0.0)) throw Error("state model '" + appliance_name + "': norm_std must be positive");
    if (!(on_threshold >= 0.0)) throw Error("state model '" + appliance_name + "': on_threshold must be >= 0");
}

ApplianceStateModel cluster_states(const PowerSeries& series, std::size_t state_count, double on_threshold,
                                   std::uint64_t seed, std::string appliance_name) {
    if (state_count < 2) throw Error("cluster_states: state count must be >= 2");
    std::vector<double> on;
    for (double v : series.values) {
        if (!is_missing(v) && v > on_threshold) on.push_back(v);
    }
    const std::set<double> distinct(on.begin(), on.end());
    const std::size_t k = state_count - 1;
    if (distinct.size() < k) {
        throw Error("cluster_states: need " + std::to_string(k) + " distinct readings above " +
                    std::to_string(on_threshold) + " W, found " + std::to_string(distinct.size()));
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, on.size() - 1);
    Clustering best;
    for (int restart = 0; restart < kRestarts; ++restart) {
        Clustering run = lloyd(on, farthest_point_seeds(on, k, pick(rng)));
        if (run.inertia < best.inertia) best = std::move(run);
    }
    std::sort(best.centers.begin(), best.centers.end());

    ApplianceStateModel model;
    model.appliance_name = std::move(appliance_name);
    model.centroids.push_back(0.0);
    model.centroids.insert(model.centroids.end(), best.centers.begin(), best.centers.end());
    const Normalizer norm = fit_normalizer(series.values);
    model.norm_mean = norm.mean;
    model.norm_std = norm.std;
    model.on_threshold = on_threshold;
    model.validate();
    return model;
}

std::size_t label_state(double watts, const ApplianceStateModel& model) {
    if (watts <= model.on_threshold) return 0;
    return nearest(watts, model.centroids);
}

std::vector<std::size_t> label_state_indices(std::span<const double> watts, const ApplianceStateModel& model) {
    std::vector<std::size_t> out(watts.size());
    for (std::size_t t = 0; t < watts.size(); ++t) out[t] = label_state(watts[t], model);
    return out;
}

Tensor label_states(std::span<const double> watts, const ApplianceStateModel& model) {
    Tensor out({watts.size(), model.state_count()});
    for (std::size_t t = 0; t < watts.size(); ++t) out.at(t, label_state(watts[t], model)) = 1.0;
    return out;
}

void save_state_model(const ApplianceStateModel& model, const std::filesystem::path& path) {
    model.validate();
    nlohmann::json j;
    j["name"] = model.appliance_name;
    j["state_count"] = model.state_count();
    j["centroids"] = model.centroids;
    j["norm_mean"] = model.norm_mean;
    j["norm_std"] = model.norm_std;
    j["on_threshold"] = model.on_threshold;
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

ApplianceStateModel load_state_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    ApplianceStateModel model;
    try {
        const auto j = nlohmann::json::parse(in);
        model.appliance_name = j.at("name").get<std::string>();
        model.centroids = j.at("centroids").get<std::vector<double>>();
        model.norm_mean = j.at("norm_mean").get<double>();
        model.norm_std = j.at("norm_std").get<double>();
        model.on_threshold = j.value("on_threshold", kDefaultOnThreshold);
        if (j.contains("state_count") && j.at("state_count").get<std::size_t>() != model.centroids.size()) {
            throw Error("state_count does not match centroid count");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    model.validate();
    return model;
}

}  // namespace nilm
