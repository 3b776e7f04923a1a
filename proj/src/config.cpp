#include "hifd/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <vector>

#include "hifd/errors.hpp"

extern char** environ;

namespace hifd::config {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

/// Strict object reader: every key must be consumed, leftovers are errors.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError("expected an object", path_);
    }

    [[nodiscard]] bool has(const char* key) const { return j_->contains(key); }

    [[nodiscard]] std::string key_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    const json& at(const char* key) {
        seen_.insert(key);
        return j_->at(key);
    }

    void get(const char* key, double& out) {
        if (!has(key)) return;
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError("expected a number", key_path(key));
        out = v.get<double>();
    }

    void get(const char* key, int& out) {
        if (!has(key)) return;
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError("expected an integer", key_path(key));
        out = v.get<int>();
    }

    void get(const char* key, std::uint64_t& out) {
        if (!has(key)) return;
        const json& v = at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
            throw ConfigError("expected a non-negative integer", key_path(key));
        out = v.get<std::uint64_t>();
    }

    void get(const char* key, std::string& out) {
        if (!has(key)) return;
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError("expected a string", key_path(key));
        out = v.get<std::string>();
    }

    Obj child(const char* key) { return Obj(at(key), key_path(key)); }

    void done() const {
        for (const auto& [key, _] : j_->items())
            if (!seen_.contains(key)) throw ConfigError("unknown configuration key", key_path(key));
    }

private:
    const json* j_;
    std::string path_;
    std::set<std::string> seen_;
};

void parse_sim(Obj o, wavesim::SimConfig& sim) {
    o.get("system_frequency", sim.system_frequency);
    o.get("samples_per_cycle", sim.samples_per_cycle);
    o.get("duration", sim.duration);
    o.get("source_voltage_rms", sim.source_voltage_rms);
    if (o.has("source_impedance")) {
        Obj z = o.child("source_impedance");
        z.get("resistance", sim.source_impedance.resistance);
        z.get("inductance", sim.source_impedance.inductance);
        z.done();
    }
    o.get("transformer_ratio", sim.transformer_ratio);
    if (o.has("baseline_load")) {
        Obj z = o.child("baseline_load");
        z.get("resistance", sim.baseline_load.resistance);
        z.get("inductance", sim.baseline_load.inductance);
        z.done();
    }
    if (o.has("baseline_harmonics")) {
        const json& arr = o.at("baseline_harmonics");
        if (!arr.is_array()) throw ConfigError("expected an array", o.key_path("baseline_harmonics"));
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Obj h(arr[i], o.key_path("baseline_harmonics") + "[" + std::to_string(i) + "]");
            wavesim::Harmonic hh;
            h.get("order", hh.order);
            h.get("fraction", hh.fraction);
            h.done();
            sim.baseline_harmonics.push_back(hh);
        }
    }
    o.get("noise_sigma", sim.noise_sigma);
    if (o.has("inrush")) {
        wavesim::InrushParams inr;
        Obj z = o.child("inrush");
        z.get("peak_multiple", inr.peak_multiple);
        z.get("decay_tau", inr.decay_tau);
        z.get("second_harmonic_fraction", inr.second_harmonic_fraction);
        z.done();
        sim.inrush = inr;
    }
    o.get("rng_seed", sim.rng_seed);
    o.done();
}

wavesim::Event parse_event(Obj o) {
    std::string type;
    o.get("type", type);
    wavesim::Event ev;
    o.get("onset", ev.onset);
    o.get("duration", ev.duration);
    if (type == "hif") {
        wavesim::HifParams p;
        o.get("R0", p.R0);
        o.get("tau", p.tau);
        o.get("u0", p.u0);
        o.get("r0", p.r0);
        o.get("g_init", p.g_init);
        ev.params = p;
    } else if (type == "motor_start" || type == "load_switch") {
        wavesim::RlParams p;
        p.kind = type == "motor_start" ? wavesim::RlKind::motor_start
                                       : wavesim::RlKind::load_switch;
        o.get("R", p.R);
        o.get("L", p.L);
        ev.params = p;
    } else {
        throw ConfigError("event type must be one of hif, motor_start, load_switch",
                          o.key_path("type"));
    }
    o.done();
    return ev;
}

void parse_havok(Obj o, havok::RollingConfig& h) {
    o.get("window_k", h.window_k);
    o.get("window_cycles", h.window_cycles);
    o.get("hop_cycles", h.hop_cycles);
    o.get("rank_override", h.rank_override);
    o.done();
}

void parse_s2g(Obj o, s2g::S2gConfig& s) {
    o.get("subseq_len_l", s.subseq_len_l);
    o.get("query_len_lq", s.query_len_lq);
    o.get("embed_dim", s.embed_dim);
    o.get("bins_per_axis", s.bins_per_axis);
    o.done();
}

void parse_detector(Obj o, detector::DetectorConfig& d) {
    o.get("baseline_span", d.baseline_span);
    o.get("smoothing_window", d.smoothing_window);
    o.get("sigma_multiplier", d.sigma_multiplier);
    o.get("min_event_duration", d.min_event_duration);
    if (o.has("theta_override")) {
        const json& v = o.at("theta_override");
        if (v.is_null()) {
            d.theta_override.reset();
        } else if (v.is_number()) {
            d.theta_override = v.get<double>();
        } else {
            throw ConfigError("expected a number or null", o.key_path("theta_override"));
        }
    }
    o.done();
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// HIFD_<SECTION>__<KEY>[__<SUBKEY>]=value overlays onto the JSON document;
/// strict parsing afterwards still rejects unknown paths.
void overlay_env(json& doc) {
    std::vector<std::pair<std::string, std::string>> vars;
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        const auto eq = entry.find('=');
        if (eq == std::string::npos || entry.rfind("HIFD_", 0) != 0) continue;
        vars.emplace_back(entry.substr(5, eq - 5), entry.substr(eq + 1));
    }
    std::sort(vars.begin(), vars.end());

    for (const auto& [name, value] : vars) {
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (pos <= name.size()) {
            const auto next = name.find("__", pos);
            if (next == std::string::npos) {
                parts.push_back(lower(name.substr(pos)));
                break;
            }
            parts.push_back(lower(name.substr(pos, next - pos)));
            pos = next + 2;
        }
        if (parts.empty() || parts.front().empty()) continue;

        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::parse_error&) {
            parsed = value;  // plain string
        }
        json* node = &doc;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &((*node)[parts[i]]);
        (*node)[parts.back()] = parsed;
    }
}

RunConfig parse_document(const json& doc) {
    RunConfig cfg;
    Obj root(doc, "");
    if (root.has("sim")) parse_sim(root.child("sim"), cfg.sim);
    if (root.has("events")) {
        const json& ev = root.at("events");
        if (!ev.is_array()) throw ConfigError("expected an array", "events");
        for (std::size_t i = 0; i < ev.size(); ++i)
            cfg.schedule.events.push_back(
                parse_event(Obj(ev[i], "events[" + std::to_string(i) + "]")));
    }
    if (root.has("havok")) parse_havok(root.child("havok"), cfg.detector.havok);
    if (root.has("s2g")) parse_s2g(root.child("s2g"), cfg.detector.s2g);
    if (root.has("detector")) parse_detector(root.child("detector"), cfg.detector);
    root.done();

    cfg.detector.havok.samples_per_cycle = cfg.sim.samples_per_cycle;
    try {
        cfg.schedule.normalize(cfg.sim.duration);
        cfg.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(std::string("invalid configuration value: ") + e.what());
    }
    return cfg;
}

constexpr std::string_view kCaseA = R"json({
  "sim": {
    "system_frequency": 60.0,
    "samples_per_cycle": 2048,
    "duration": 2.0,
    "source_voltage_rms": 115000.0,
    "source_impedance": {"resistance": 18.0, "inductance": 0.49},
    "transformer_ratio": 27.644230769230769,
    "baseline_load": {"resistance": 7.79, "inductance": 0.010},
    "baseline_harmonics": [{"order": 7, "fraction": 0.02}],
    "noise_sigma": 0.001,
    "rng_seed": 44
  },
  "events": [
    {"type": "motor_start", "onset": 1.0, "duration": 0.25, "R": 4.0, "L": 0.005},
    {"type": "load_switch", "onset": 1.1, "duration": 0.15, "R": 16.44, "L": 0.0143},
    {"type": "hif", "onset": 1.2, "duration": 0.05,
     "R0": 40.0, "tau": 0.0004, "u0": 300.0, "r0": 0.5, "g_init": 0.5},
    {"type": "load_switch", "onset": 1.3, "duration": 0.15, "R": 16.44, "L": 0.0143},
    {"type": "hif", "onset": 1.4, "duration": 0.05,
     "R0": 40.0, "tau": 0.0004, "u0": 300.0, "r0": 0.5, "g_init": 0.5},
    {"type": "load_switch", "onset": 1.5, "duration": 0.15, "R": 16.44, "L": 0.0143},
    {"type": "hif", "onset": 1.6, "duration": 0.05,
     "R0": 40.0, "tau": 0.0004, "u0": 300.0, "r0": 0.5, "g_init": 0.5},
    {"type": "motor_start", "onset": 1.7, "duration": 0.25, "R": 4.0, "L": 0.005}
  ],
  "havok": {"window_k": 256, "window_cycles": 4.0, "hop_cycles": 0.25, "rank_override": 0},
  "s2g": {"subseq_len_l": 64, "query_len_lq": 128, "embed_dim": 2, "bins_per_axis": 50},
  "detector": {
    "baseline_span": 0.5,
    "smoothing_window": 1025,
    "sigma_multiplier": 3.0,
    "min_event_duration": 0.03
  }
})json";

constexpr std::string_view kCaseB = R"json({
  "sim": {
    "system_frequency": 60.0,
    "samples_per_cycle": 2048,
    "duration": 2.0,
    "source_voltage_rms": 4160.0,
    "source_impedance": {"resistance": 2.0, "inductance": 0.056},
    "transformer_ratio": 8.6666666666666667,
    "baseline_load": {"resistance": 0.9, "inductance": 0.00115},
    "baseline_harmonics": [{"order": 7, "fraction": 0.02}],
    "noise_sigma": 0.001,
    "rng_seed": 7
  },
  "events": [
    {"type": "load_switch", "onset": 1.2, "duration": 0.15, "R": 1.9, "L": 0.00165},
    {"type": "hif", "onset": 1.4, "duration": 0.05,
     "R0": 4.6, "tau": 0.0004, "u0": 35.0, "r0": 0.06, "g_init": 0.5},
    {"type": "motor_start", "onset": 1.6, "duration": 0.25, "R": 0.46, "L": 0.00058}
  ],
  "havok": {"window_k": 256, "window_cycles": 4.0, "hop_cycles": 0.25, "rank_override": 0},
  "s2g": {"subseq_len_l": 64, "query_len_lq": 128, "embed_dim": 2, "bins_per_axis": 50},
  "detector": {
    "baseline_span": 0.5,
    "smoothing_window": 1025,
    "sigma_multiplier": 3.0,
    "min_event_duration": 0.03
  }
})json";

}  // namespace

void RunConfig::validate() const {
    sim.validate();
    schedule.validate(sim.duration);
    detector.validate();
}

RunConfig parse_config_json(std::string_view text) { return parse_config_json(text, false); }

RunConfig parse_config_json(std::string_view text, bool apply_env) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (apply_env) overlay_env(doc);
    return parse_document(doc);
}

RunConfig load_config(const std::filesystem::path& path, bool apply_env) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();

    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    if (apply_env) overlay_env(doc);
    return parse_document(doc);
}

std::string canonical_echo(const RunConfig& cfg) {
    ordered_json j;
    ordered_json sim;
    sim["system_frequency"] = cfg.sim.system_frequency;
    sim["samples_per_cycle"] = cfg.sim.samples_per_cycle;
    sim["duration"] = cfg.sim.duration;
    sim["source_voltage_rms"] = cfg.sim.source_voltage_rms;
    sim["source_impedance"] = {{"resistance", cfg.sim.source_impedance.resistance},
                               {"inductance", cfg.sim.source_impedance.inductance}};
    sim["transformer_ratio"] = cfg.sim.transformer_ratio;
    sim["baseline_load"] = {{"resistance", cfg.sim.baseline_load.resistance},
                            {"inductance", cfg.sim.baseline_load.inductance}};
    if (!cfg.sim.baseline_harmonics.empty()) {
        ordered_json harmonics = ordered_json::array();
        for (const auto& h : cfg.sim.baseline_harmonics)
            harmonics.push_back({{"order", h.order}, {"fraction", h.fraction}});
        sim["baseline_harmonics"] = std::move(harmonics);
    }
    sim["noise_sigma"] = cfg.sim.noise_sigma;
    if (cfg.sim.inrush) {
        sim["inrush"] = {{"peak_multiple", cfg.sim.inrush->peak_multiple},
                         {"decay_tau", cfg.sim.inrush->decay_tau},
                         {"second_harmonic_fraction", cfg.sim.inrush->second_harmonic_fraction}};
    }
    sim["rng_seed"] = cfg.sim.rng_seed;
    j["sim"] = std::move(sim);

    ordered_json events = ordered_json::array();
    for (const auto& ev : cfg.schedule.events) {
        ordered_json e;
        if (const auto* hif = std::get_if<wavesim::HifParams>(&ev.params)) {
            e["type"] = "hif";
            e["onset"] = ev.onset;
            e["duration"] = ev.duration;
            e["R0"] = hif->R0;
            e["tau"] = hif->tau;
            e["u0"] = hif->u0;
            e["r0"] = hif->r0;
            e["g_init"] = hif->g_init;
        } else {
            const auto& rl = std::get<wavesim::RlParams>(ev.params);
            e["type"] = rl.kind == wavesim::RlKind::motor_start ? "motor_start" : "load_switch";
            e["onset"] = ev.onset;
            e["duration"] = ev.duration;
            e["R"] = rl.R;
            e["L"] = rl.L;
        }
        events.push_back(std::move(e));
    }
    j["events"] = std::move(events);

    j["havok"] = {{"window_k", cfg.detector.havok.window_k},
                  {"window_cycles", cfg.detector.havok.window_cycles},
                  {"hop_cycles", cfg.detector.havok.hop_cycles},
                  {"rank_override", cfg.detector.havok.rank_override}};
    j["s2g"] = {{"subseq_len_l", cfg.detector.s2g.subseq_len_l},
                {"query_len_lq", cfg.detector.s2g.query_len_lq},
                {"embed_dim", cfg.detector.s2g.embed_dim},
                {"bins_per_axis", cfg.detector.s2g.bins_per_axis}};
    ordered_json det;
    det["baseline_span"] = cfg.detector.baseline_span;
    det["smoothing_window"] = cfg.detector.smoothing_window;
    det["sigma_multiplier"] = cfg.detector.sigma_multiplier;
    det["min_event_duration"] = cfg.detector.min_event_duration;
    if (cfg.detector.theta_override) det["theta_override"] = *cfg.detector.theta_override;
    j["detector"] = std::move(det);

    return j.dump(2) + "\n";
}

std::string_view preset(std::string_view name) {
    if (name == "case_a") return kCaseA;
    if (name == "case_b") return kCaseB;
    return {};
}

}  // namespace hifd::config
