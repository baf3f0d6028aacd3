// nilm: synthesize data, discover states, train, disaggregate, evaluate.
//
// Settings resolve as built-in defaults < --config JSON file < flags. Every
// command writes the resolved settings to <out>/effective_config.json.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nilm/data/series.hpp"
#include "nilm/data/states.hpp"
#include "nilm/data/synth.hpp"
#include "nilm/data/windows.hpp"
#include "nilm/error.hpp"
#include "nilm/eval/metrics.hpp"
#include "nilm/model/checkpoint.hpp"
#include "nilm/model/dual_dnn.hpp"
#include "nilm/postprocess/postprocess.hpp"
#include "nilm/trainer/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace nilm;

namespace {

json defaults_for(const std::string& dataset) {
    const bool redd = dataset == "redd";
    const WindowConfig w = redd ? WindowConfig::redd() : WindowConfig::ukdale();
    json conv = json::array();
    for (const auto& l : DualDnnConfig::seq2point_stack()) conv.push_back({l.filters, l.kernel, l.stride});
    return {
        {"seed", 0},
        {"out", "out"},
        {"dataset", dataset},
        {"period", redd ? 3 : 6},
        {"window", {{"s", w.s}, {"w", w.w}}},
        {"model", {{"conv", conv}, {"hidden", 1024}, {"gumbel_tau", 1.0}}},
        {"train",
         {{"batch_size", 16},
          {"learning_rate", 1e-3},
          {"epochs", 10},
          {"lambda_power", 0.0},
          {"variant", "plain"},
          {"shuffle", true},
          {"gumbel_training", true},
          {"train_fraction", 0.8},
          {"stride", w.s}}},
        {"filter", {{"window", 5}, {"tau", 1.0}}},
        {"disaggregate", {{"stride", w.s}, {"tail", 1.0}}},
        {"states", {{"count", 0}, {"on_threshold", kDefaultOnThreshold}, {"table", ""}, {"appliance", ""}}},
        {"paths",
         {{"scenario", ""},
          {"mains", ""},
          {"appliance", ""},
          {"state_model", ""},
          {"checkpoint", ""},
          {"estimate", ""},
          {"truth", ""},
          {"plain", ""}}},
    };
}

// A flag bound to a location in the config document; it only overrides when given.
struct Override {
    std::string pointer;
    std::optional<std::string> text;
    std::optional<double> number;
    std::optional<std::int64_t> integer;
    std::optional<bool> flag;
};

class Overrides {
public:
    void text(CLI::App* app, const std::string& name, const std::string& pointer, const std::string& help) {
        auto& o = add(pointer);
        app->add_option(name, o.text, help);
    }
    void number(CLI::App* app, const std::string& name, const std::string& pointer, const std::string& help) {
        auto& o = add(pointer);
        app->add_option(name, o.number, help);
    }
    void integer(CLI::App* app, const std::string& name, const std::string& pointer, const std::string& help) {
        auto& o = add(pointer);
        app->add_option(name, o.integer, help)->check(CLI::NonNegativeNumber);
    }
    void boolean(CLI::App* app, const std::string& name, const std::string& pointer, const std::string& help) {
        auto& o = add(pointer);
        app->add_option(name, o.flag, help);
    }
    CLI::Option* variant(CLI::App* app) {
        auto& o = add("/train/variant");
        return app->add_option("--variant", o.text, "plain | median | hard | hard-median")
            ->check(CLI::IsMember({"plain", "median", "hard", "hard-median", "hard_median"}));
    }

    void apply(json& doc) const {
        for (const auto& o : items_) {
            const json::json_pointer ptr(o->pointer);
            if (o->text) doc[ptr] = *o->text;
            if (o->number) doc[ptr] = *o->number;
            if (o->integer) doc[ptr] = *o->integer;
            if (o->flag) doc[ptr] = *o->flag;
        }
    }

    std::optional<std::string> dataset() const {
        for (const auto& o : items_) {
            if (o->pointer == "/dataset" && o->text) return o->text;
        }
        return std::nullopt;
    }

private:
    Override& add(const std::string& pointer) {
        items_.push_back(std::make_unique<Override>());
        items_.back()->pointer = pointer;
        return *items_.back();
    }
    // unique_ptr keeps addresses stable; CLI11 writes through them.
    std::vector<std::unique_ptr<Override>> items_;
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

// Defaults (chosen by dataset) merged with the file, then the flags.
json resolve(const std::string& config_path, const Overrides& overrides) {
    json file = config_path.empty() ? json::object() : read_json(config_path);
    if (!file.is_object()) throw Error(config_path + ": config must be a JSON object");
    std::string dataset = file.value("dataset", "ukdale");
    if (auto d = overrides.dataset()) dataset = *d;
    if (dataset != "ukdale" && dataset != "redd") throw Error("dataset must be ukdale or redd, got '" + dataset + "'");
    json doc = defaults_for(dataset);
    doc.merge_patch(file);
    overrides.apply(doc);
    doc["dataset"] = dataset;
    return doc;
}

fs::path out_dir(const json& doc) {
    fs::path dir = doc.at("out").get<std::string>();
    fs::create_directories(dir);
    return dir;
}

void echo_config(const json& doc, const fs::path& dir) {
    std::ofstream out(dir / "effective_config.json");
    out << doc.dump(2) << '\n';
    if (!out) throw Error("cannot write " + (dir / "effective_config.json").string());
}

std::string need_path(const json& doc, const std::string& key, const std::string& flag) {
    const std::string p = doc.at("paths").value(key, "");
    if (p.empty()) throw Error("missing input: pass " + flag + " or set paths." + key + " in the config");
    return p;
}

WindowConfig window_of(const json& doc) {
    WindowConfig w{doc.at("window").at("s").get<std::size_t>(), doc.at("window").at("w").get<std::size_t>()};
    w.validate();
    return w;
}

FilterConfig filter_of(const json& doc) {
    FilterConfig f;
    f.window = doc.at("filter").at("window").get<std::size_t>();
    f.tau = doc.at("filter").at("tau").get<double>();
    f.validate();
    return f;
}

DualDnnConfig model_config_of(const json& doc, std::size_t state_count) {
    DualDnnConfig cfg;
    cfg.window = window_of(doc);
    cfg.state_count = state_count;
    cfg.conv.clear();
    for (const auto& layer : doc.at("model").at("conv")) {
        if (!layer.is_array() || layer.size() != 3) throw Error("model.conv entries must be [filters, kernel, stride]");
        cfg.conv.push_back({layer[0].get<std::size_t>(), layer[1].get<std::size_t>(), layer[2].get<std::size_t>()});
    }
    cfg.hidden = doc.at("model").at("hidden").get<std::size_t>();
    cfg.gumbel_tau = doc.at("model").at("gumbel_tau").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.validate();
    return cfg;
}

void write_states_csv(const PowerSeries& grid, const std::vector<std::size_t>& states, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch_seconds,state\n";
    for (std::size_t t = 0; t < states.size(); ++t) out << grid.time_at(t) << ',' << states[t] << '\n';
    if (!out) throw Error("write failed for " + path.string());
}

std::vector<std::size_t> row_argmax(const Tensor& rows) {
    std::vector<std::size_t> idx(rows.extent(0));
    for (std::size_t t = 0; t < idx.size(); ++t) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < rows.extent(1); ++j) {
            if (rows.at(t, j) > rows.at(t, best)) best = j;
        }
        idx[t] = best;
    }
    return idx;
}

std::string safe_name(const std::string& name) {
    std::string s = name;
    for (char& c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return s.empty() ? "appliance" : s;
}

PowerSeries load_filled(const std::string& path, std::int64_t period) {
    return fill_gaps(load_csv(path, period));
}

int cmd_synth(const json& doc) {
    const fs::path dir = out_dir(doc);
    SyntheticScenario sc = load_scenario(need_path(doc, "scenario", "--scenario"));
    if (doc.contains("/synth/seed"_json_pointer)) sc.seed = doc.at("synth").at("seed").get<std::uint64_t>();
    const auto data = synth_generate(sc);
    write_csv(data.mains, dir / "mains.csv");
    for (std::size_t i = 0; i < sc.appliances.size(); ++i) {
        const std::string name = safe_name(sc.appliances[i].name);
        write_csv(data.appliances[i], dir / (name + ".csv"));
        write_states_csv(data.appliances[i], data.states[i], dir / (name + ".states"));
    }
    echo_config(doc, dir);
    std::cout << "wrote " << sc.appliances.size() << " appliance traces and mains (" << sc.duration
              << " samples) to " << dir.string() << '\n';
    return 0;
}

int cmd_states(const json& doc) {
    const fs::path dir = out_dir(doc);
    const std::int64_t period = doc.at("period").get<std::int64_t>();
    const auto series = load_filled(need_path(doc, "appliance", "--input"), period);
    const json& st = doc.at("states");
    std::size_t count = st.at("count").get<std::size_t>();
    std::string name = st.at("appliance").get<std::string>();
    std::optional<Normalizer> table_norm;
    const std::string table_path = st.at("table").get<std::string>();
    if (!table_path.empty()) {
        if (name.empty()) throw Error("--table needs --name to pick an appliance");
        const json table = read_json(table_path);
        const std::string dataset = doc.at("dataset").get<std::string>();
        if (!table.contains(dataset) || !table[dataset].contains(name)) {
            throw Error(table_path + ": no entry for '" + name + "' under '" + dataset + "'");
        }
        const json& row = table[dataset][name];
        if (count == 0) count = row.at("states").get<std::size_t>();
        table_norm = Normalizer{row.at("mean").get<double>(), row.at("std").get<double>()};
    }
    if (count == 0) throw Error("state count missing: pass --count or --table with --name");
    if (name.empty()) name = fs::path(doc.at("paths").at("appliance").get<std::string>()).stem().string();
    auto model = cluster_states(series, count, st.at("on_threshold").get<double>(), doc.at("seed").get<std::uint64_t>(),
                                name);
    if (table_norm) {
        model.norm_mean = table_norm->mean;
        model.norm_std = table_norm->std;
    }
    const fs::path path = dir / (safe_name(name) + ".model.json");
    save_state_model(model, path);
    echo_config(doc, dir);
    std::cout << name << ": " << model.state_count() << " states at";
    for (double c : model.centroids) std::cout << ' ' << c;
    std::cout << " W -> " << path.string() << '\n';
    return 0;
}

int cmd_train(const json& doc) {
    const fs::path dir = out_dir(doc);
    const std::int64_t period = doc.at("period").get<std::int64_t>();
    const auto mains = load_filled(need_path(doc, "mains", "--mains"), period);
    auto appliance = load_filled(need_path(doc, "appliance", "--appliance"), period);
    const auto state_model = load_state_model(need_path(doc, "state_model", "--state-model"));
    PowerSeries m = mains;
    align_series(m, appliance);

    const json& t = doc.at("train");
    const double fraction = t.at("train_fraction").get<double>();
    if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("train_fraction must lie in (0, 1]");
    const auto split = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m.size())));
    const PowerSeries mains_train = m.slice(0, split);
    const PowerSeries appliance_train = appliance.slice(0, split);

    const WindowConfig window = window_of(doc);
    const auto stride = t.at("stride").get<std::size_t>();
    const Normalizer mains_norm = fit_normalizer(mains_train.values);
    const auto examples = make_windows(mains_train, appliance_train, state_model, window, stride, mains_norm);
    if (examples.empty()) throw Error("training split has fewer than s=" + std::to_string(window.s) + " samples");

    TrainConfig tc;
    tc.batch_size = t.at("batch_size").get<std::size_t>();
    tc.learning_rate = t.at("learning_rate").get<double>();
    tc.epochs = t.at("epochs").get<std::size_t>();
    tc.lambda_power = t.at("lambda_power").get<double>();
    tc.variant = parse_variant(t.at("variant").get<std::string>());
    tc.shuffle = t.at("shuffle").get<bool>();
    tc.gumbel_training = t.at("gumbel_training").get<bool>();
    tc.seed = doc.at("seed").get<std::uint64_t>();

    DualDnnModel model(model_config_of(doc, state_model.state_count()));
    model.metadata().dataset_tag = doc.at("dataset").get<std::string>();
    echo_config(doc, dir);
    auto report = train(model, examples, tc, [](const EpochRecord& r) {
        std::cout << "epoch " << r.epoch << " loss " << r.loss_total << " (output " << r.loss_output << ", state "
                  << r.loss_state << ")\n"
                  << std::flush;
    });
    const fs::path ckpt = dir / "model.ddnn";
    save_checkpoint(model, ckpt);
    report.checkpoint_path = ckpt.string();
    report.write_csv(dir / "train_report.csv");
    std::cout << "trained on " << examples.size() << " windows in " << report.wall_seconds << " s -> "
              << ckpt.string() << '\n';
    return 0;
}

int cmd_disaggregate(const json& doc) {
    const fs::path dir = out_dir(doc);
    const DualDnnModel model = load_checkpoint(need_path(doc, "checkpoint", "--checkpoint"));
    std::int64_t period = model.metadata().period;
    if (period == 0) period = doc.at("period").get<std::int64_t>();
    PowerSeries mains = load_filled(need_path(doc, "mains", "--mains"), period);
    const json& d = doc.at("disaggregate");
    const double tail = d.at("tail").get<double>();
    if (!(tail > 0.0 && tail <= 1.0)) throw Error("tail must lie in (0, 1]");
    const auto skip =
        static_cast<std::size_t>(std::ceil((1.0 - tail) * static_cast<double>(mains.size())));
    mains = mains.slice(std::min(skip, mains.size()), mains.size());

    const Variant variant = parse_variant(doc.at("train").at("variant").get<std::string>());
    const auto result = disaggregate(model, mains, variant, d.at("stride").get<std::size_t>(), filter_of(doc));
    const std::string name = safe_name(result.appliance);
    echo_config(doc, dir);
    write_csv(result.estimate, dir / (name + "." + to_string(variant) + ".csv"));
    write_states_csv(result.estimate, row_argmax(result.states), dir / (name + "." + to_string(variant) + ".states"));
    std::cout << result.appliance << " (" << to_string(variant) << "): " << result.estimate.size()
              << " samples -> " << (dir / (name + "." + to_string(variant) + ".csv")).string() << '\n';
    return 0;
}

int cmd_evaluate(const json& doc) {
    const fs::path dir = out_dir(doc);
    const std::int64_t period = doc.at("period").get<std::int64_t>();
    PowerSeries estimate = load_filled(need_path(doc, "estimate", "--estimate"), period);
    PowerSeries truth = load_filled(need_path(doc, "truth", "--truth"), period);
    align_series(truth, estimate);
    ReportEntry entry;
    entry.appliance = fs::path(doc.at("paths").at("truth").get<std::string>()).stem().string();
    entry.truth = truth;
    entry.variant = estimate;
    const std::string plain_path = doc.at("paths").at("plain").get<std::string>();
    if (!plain_path.empty()) {
        PowerSeries plain = load_filled(plain_path, period);
        align_series(entry.truth, plain);
        align_series(entry.variant, plain);
        align_series(entry.truth, entry.variant);
        entry.plain = plain;
    }
    const std::vector<ReportEntry> entries{entry};
    const auto rows = report(entries);
    echo_config(doc, dir);
    write_metric_table(rows, dir / "metrics.csv");
    write_plot_data(entry, dir / (safe_name(entry.appliance) + ".plot.csv"));
    for (const auto& r : rows) std::cout << r.appliance << ": MAE " << r.mae << " W, SAE " << r.sae << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-DNN energy disaggregation"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides ov;
    std::string config_path;
    app.add_option("--config", config_path, "JSON run config; flags override its values");
    ov.integer(&app, "--seed", "/seed", "seed for clustering, initialization and shuffling");
    ov.text(&app, "--out", "/out", "output directory");
    ov.text(&app, "--dataset", "/dataset", "ukdale (6 s grid, 32+2x200 windows) or redd (3 s, 64+2x400)");
    ov.integer(&app, "--period", "/period", "grid period in seconds");

    auto* synth = app.add_subcommand("synth", "generate a synthetic scenario");
    ov.text(synth, "--scenario", "/paths/scenario", "scenario JSON file");
    ov.integer(synth, "--scenario-seed", "/synth/seed", "override the scenario's own seed");

    auto* states = app.add_subcommand("states", "cluster an appliance trace into operating states");
    ov.text(states, "--input", "/paths/appliance", "appliance CSV");
    ov.integer(states, "--count", "/states/count", "number of states including OFF");
    ov.text(states, "--table", "/states/table", "appliance parameter table (JSON)");
    ov.text(states, "--name", "/states/appliance", "appliance name");
    ov.number(states, "--on-threshold", "/states/on_threshold", "ON threshold in watts");

    auto* train_cmd = app.add_subcommand("train", "train a dual-DNN for one appliance");
    ov.text(train_cmd, "--mains", "/paths/mains", "mains CSV");
    ov.text(train_cmd, "--appliance", "/paths/appliance", "appliance CSV");
    ov.text(train_cmd, "--state-model", "/paths/state_model", "state model JSON");
    ov.variant(train_cmd);
    ov.integer(train_cmd, "--epochs", "/train/epochs", "training epochs");
    ov.integer(train_cmd, "--batch-size", "/train/batch_size", "mini-batch size");
    ov.number(train_cmd, "--learning-rate", "/train/learning_rate", "Adam learning rate");
    ov.number(train_cmd, "--lambda-power", "/train/lambda_power", "weight of the rating loss");
    ov.number(train_cmd, "--train-fraction", "/train/train_fraction", "leading fraction used for training");
    ov.integer(train_cmd, "--stride", "/train/stride", "window stride in samples");
    ov.boolean(train_cmd, "--gumbel", "/train/gumbel_training", "train hard variants through gumbel samples");
    ov.integer(train_cmd, "--hidden", "/model/hidden", "dense hidden width");

    auto* dis = app.add_subcommand("disaggregate", "estimate appliance power from mains");
    ov.text(dis, "--checkpoint", "/paths/checkpoint", "model checkpoint");
    ov.text(dis, "--mains", "/paths/mains", "mains CSV");
    ov.variant(dis);
    ov.integer(dis, "--stride", "/disaggregate/stride", "window stride in samples");
    ov.number(dis, "--tail", "/disaggregate/tail", "trailing fraction of mains to process");
    ov.integer(dis, "--median-window", "/filter/window", "odd median window length");

    auto* eval_cmd = app.add_subcommand("evaluate", "score an estimate against ground truth");
    ov.text(eval_cmd, "--estimate", "/paths/estimate", "estimate CSV");
    ov.text(eval_cmd, "--truth", "/paths/truth", "ground-truth CSV");
    ov.text(eval_cmd, "--plain", "/paths/plain", "optional plain-variant estimate for plot data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const json doc = resolve(config_path, ov);
        if (synth->parsed()) return cmd_synth(doc);
        if (states->parsed()) return cmd_states(doc);
        if (train_cmd->parsed()) return cmd_train(doc);
        if (dis->parsed()) return cmd_disaggregate(doc);
        if (eval_cmd->parsed()) return cmd_evaluate(doc);
    } catch (const std::exception& e) {
        std::cerr << "nilm: error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
