#include "nilm/model/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "nilm/error.hpp"

namespace nilm {

namespace {

constexpr std::string_view kMagic = "DDNN";

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

template <typename T>
std::string fmt_int(T v) {
    return std::to_string(v);
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += fmt(values[i]);
    }
    return out;
}

class Writer {
public:
    void bytes(std::string_view s) { out_.append(s); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint64_t v) {
        if (v > 0xffffffffu) throw Error("checkpoint: field exceeds u32 range");
        put(v, 4);
    }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void text(std::string_view s) {
        u32(s.size());
        bytes(s);
    }
    std::string take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    std::string_view bytes(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string text() {
        const std::uint32_t n = u32();
        return std::string(bytes(n));
    }
    std::size_t offset() const { return pos_; }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw Error("checkpoint truncated at byte offset " + std::to_string(pos_) + " (needed " +
                        std::to_string(n) + " more bytes, " + std::to_string(data_.size() - pos_) + " left)");
        }
    }
    std::uint64_t get(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

using Entries = std::map<std::string, std::string>;

Entries config_entries(const DualDnnModel& model) {
    const auto& c = model.config();
    const auto& m = model.metadata();
    Entries e;
    e["window.s"] = fmt_int(c.window.s);
    e["window.w"] = fmt_int(c.window.w);
    e["state_count"] = fmt_int(c.state_count);
    std::string conv;
    for (std::size_t i = 0; i < c.conv.size(); ++i) {
        if (i) conv += ',';
        conv += fmt_int(c.conv[i].filters) + ":" + fmt_int(c.conv[i].kernel) + ":" + fmt_int(c.conv[i].stride);
    }
    e["conv"] = conv;
    e["hidden"] = fmt_int(c.hidden);
    e["gumbel_tau"] = fmt(c.gumbel_tau);
    e["seed"] = fmt_int(c.seed);
    e["meta.epochs_seen"] = fmt_int(m.epochs_seen);
    e["meta.dataset_tag"] = m.dataset_tag;
    e["meta.mains_mean"] = fmt(m.mains.mean);
    e["meta.mains_std"] = fmt(m.mains.std);
    e["meta.period"] = fmt_int(m.period);
    if (m.appliance) {
        e["appliance.name"] = m.appliance->appliance_name;
        e["appliance.centroids"] = join(m.appliance->centroids);
        e["appliance.norm_mean"] = fmt(m.appliance->norm_mean);
        e["appliance.norm_std"] = fmt(m.appliance->norm_std);
        e["appliance.on_threshold"] = fmt(m.appliance->on_threshold);
    }
    return e;
}

const std::string& lookup(const Entries& e, const std::string& key) {
    auto it = e.find(key);
    if (it == e.end()) throw Error("checkpoint: missing config key '" + key + "'");
    return it->second;
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error("checkpoint: bad value '" + std::string(text) + "' for '" + key + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    if (text.empty()) return parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

DualDnnModel model_from_entries(const Entries& e) {
    DualDnnConfig c;
    c.window.s = parse_number<std::size_t>(lookup(e, "window.s"), "window.s");
    c.window.w = parse_number<std::size_t>(lookup(e, "window.w"), "window.w");
    c.state_count = parse_number<std::size_t>(lookup(e, "state_count"), "state_count");
    c.conv.clear();
    for (auto layer : split(lookup(e, "conv"), ',')) {
        const auto f = split(layer, ':');
        if (f.size() != 3) throw Error("checkpoint: bad conv layer '" + std::string(layer) + "'");
        c.conv.push_back({parse_number<std::size_t>(f[0], "conv"), parse_number<std::size_t>(f[1], "conv"),
                          parse_number<std::size_t>(f[2], "conv")});
    }
    c.hidden = parse_number<std::size_t>(lookup(e, "hidden"), "hidden");
    c.gumbel_tau = parse_number<double>(lookup(e, "gumbel_tau"), "gumbel_tau");
    c.seed = parse_number<std::uint64_t>(lookup(e, "seed"), "seed");

    DualDnnModel model(c);
    auto& m = model.metadata();
    m.epochs_seen = parse_number<std::size_t>(lookup(e, "meta.epochs_seen"), "meta.epochs_seen");
    m.dataset_tag = lookup(e, "meta.dataset_tag");
    m.mains.mean = parse_number<double>(lookup(e, "meta.mains_mean"), "meta.mains_mean");
    m.mains.std = parse_number<double>(lookup(e, "meta.mains_std"), "meta.mains_std");
    m.period = parse_number<std::int64_t>(lookup(e, "meta.period"), "meta.period");
    if (e.count("appliance.name")) {
        ApplianceStateModel a;
        a.appliance_name = lookup(e, "appliance.name");
        for (auto v : split(lookup(e, "appliance.centroids"), ',')) {
            a.centroids.push_back(parse_number<double>(v, "appliance.centroids"));
        }
        a.norm_mean = parse_number<double>(lookup(e, "appliance.norm_mean"), "appliance.norm_mean");
        a.norm_std = parse_number<double>(lookup(e, "appliance.norm_std"), "appliance.norm_std");
        a.on_threshold = parse_number<double>(lookup(e, "appliance.on_threshold"), "appliance.on_threshold");
        a.validate();
        m.appliance = std::move(a);
    }
    return model;
}

}  // namespace

std::string serialize_model(const DualDnnModel& model) {
    Writer w;
    w.bytes(kMagic);
    w.u16(kCheckpointVersion);
    const Entries entries = config_entries(model);
    w.u32(entries.size());
    for (const auto& [key, value] : entries) {
        w.text(key);
        w.text(value);
    }
    const auto params = model.parameters();
    w.u32(params.size());
    for (const Parameter& p : params) {
        w.text(p.name);
        w.u32(p.tensor.rank());
        for (std::size_t extent : p.tensor.shape()) w.u32(extent);
        for (double v : p.tensor.values()) w.f64(v);
    }
    return w.take();
}

DualDnnModel deserialize_model(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(kMagic.size()) != kMagic) throw Error("checkpoint: bad magic (expected \"DDNN\")");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw Error("checkpoint: unsupported format version " + std::to_string(version));
    }
    Entries entries;
    const std::uint32_t n_entries = r.u32();
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        std::string key = r.text();
        entries[key] = r.text();
    }
    DualDnnModel model = model_from_entries(entries);

    const std::uint32_t n_params = r.u32();
    if (n_params != model.parameters().size()) {
        throw Error("checkpoint: " + std::to_string(n_params) + " parameters, config implies " +
                    std::to_string(model.parameters().size()));
    }
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::size_t at = r.offset();
        const std::string name = r.text();
        Parameter& p = model.parameter(name);
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& extent : shape) extent = r.u32();
        if (shape != p.tensor.shape()) {
            throw Error("checkpoint: parameter '" + name + "' at byte offset " + std::to_string(at) + " has shape " +
                        shape_str(shape) + ", config implies " + shape_str(p.tensor.shape()));
        }
        for (double& v : p.tensor.values()) v = r.f64();
    }
    if (!r.done()) throw Error("checkpoint: trailing bytes after offset " + std::to_string(r.offset()));
    return model;
}

void save_checkpoint(const DualDnnModel& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

DualDnnModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace nilm
