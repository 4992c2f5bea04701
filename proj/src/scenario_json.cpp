#include "breathradar/scenario_json.hpp"

#include <cstdio>
#include <stdexcept>

#include "breathradar/formats.hpp"
#include "breathradar/rng.hpp"

namespace breathradar {

using nlohmann::json;

namespace {

template <class T>
void get_opt(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

std::string window_key(double w) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", w);
    return buf;
}

json complex_json(cplx c) { return json::array({c.real(), c.imag()}); }

cplx complex_from(const json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2) throw ConfigError("complex value must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void to_json(json& j, const Vec3& v) { j = json::array({v.x, v.y, v.z}); }

void from_json(const json& j, Vec3& v) {
    if (!j.is_array() || j.size() < 2 || j.size() > 3) throw ConfigError("position must be [x, y] or [x, y, z]");
    v = {j[0].get<double>(), j[1].get<double>(), j.size() == 3 ? j[2].get<double>() : 0.0};
}

void to_json(json& j, const WaveformConfig& c) {
    j = json{{"carrier_freq", c.carrier_freq}, {"sample_rate", c.sample_rate}, {"training_len", c.training_len},
             {"payload_len", c.payload_len},   {"frame_gap", c.frame_gap},     {"subcarrier_count", c.subcarrier_count},
             {"seed", c.seed}};
}

void from_json(const json& j, WaveformConfig& c) {
    get_opt(j, "carrier_freq", c.carrier_freq);
    get_opt(j, "sample_rate", c.sample_rate);
    get_opt(j, "training_len", c.training_len);
    get_opt(j, "payload_len", c.payload_len);
    get_opt(j, "frame_gap", c.frame_gap);
    get_opt(j, "subcarrier_count", c.subcarrier_count);
    get_opt(j, "seed", c.seed);
}

void to_json(json& j, const BreathingTarget& t) {
    j = json{{"position", t.position}, {"amplitude", t.amplitude}, {"rate", t.rate}, {"phase", t.phase}, {"rcs_gain", t.rcs_gain}};
}

void from_json(const json& j, BreathingTarget& t) {
    get_opt(j, "position", t.position);
    get_opt(j, "amplitude", t.amplitude);
    get_opt(j, "rate", t.rate);
    get_opt(j, "phase", t.phase);
    get_opt(j, "rcs_gain", t.rcs_gain);
}

void to_json(json& j, const Interferer& i) {
    json wps = json::array();
    for (const auto& w : i.waypoints) wps.push_back(json{{"time", w.time}, {"position", w.position}});
    j = json{{"waypoints", wps}, {"rcs_gain", i.rcs_gain}};
}

void from_json(const json& j, Interferer& i) {
    i.waypoints.clear();
    if (auto it = j.find("waypoints"); it != j.end()) {
        for (const auto& w : *it) i.waypoints.push_back({w.at("time").get<double>(), w.at("position").get<Vec3>()});
    }
    get_opt(j, "rcs_gain", i.rcs_gain);
}

void to_json(json& j, const ClutterPath& p) { j = json{{"attenuation", complex_json(p.attenuation)}, {"delay", p.delay}}; }

void from_json(const json& j, ClutterPath& p) {
    if (auto it = j.find("attenuation"); it != j.end()) p.attenuation = complex_from(*it);
    get_opt(j, "delay", p.delay);
}

void to_json(json& j, const Scenario& s) {
    j = json{{"waveform", s.waveform},
             {"tx_pos", s.tx_pos},
             {"ref_rx_pos", s.ref_rx_pos},
             {"sur_rx_pos", json::array({s.sur_rx_pos[0], s.sur_rx_pos[1]})},
             {"target", s.target ? json(*s.target) : json(nullptr)},
             {"interferer", s.interferer ? json(*s.interferer) : json(nullptr)},
             {"clutter", json::array({s.clutter[0], s.clutter[1]})},
             {"ref_attenuation", complex_json(s.ref_attenuation)},
             {"ref_delay", s.ref_delay},
             {"cfo", s.cfo},
             {"noise_power", s.noise_power},
             {"duration", s.duration}};
}

void from_json(const json& j, Scenario& s) {
    get_opt(j, "waveform", s.waveform);
    get_opt(j, "tx_pos", s.tx_pos);
    get_opt(j, "ref_rx_pos", s.ref_rx_pos);
    if (auto it = j.find("sur_rx_pos"); it != j.end()) {
        if (!it->is_array() || it->size() != 2) throw ConfigError("sur_rx_pos must list two receivers");
        s.sur_rx_pos = {(*it)[0].get<Vec3>(), (*it)[1].get<Vec3>()};
    }
    s.target.reset();
    if (auto it = j.find("target"); it != j.end() && !it->is_null()) s.target = it->get<BreathingTarget>();
    s.interferer.reset();
    if (auto it = j.find("interferer"); it != j.end() && !it->is_null()) s.interferer = it->get<Interferer>();
    if (auto it = j.find("clutter"); it != j.end()) {
        if (!it->is_array() || it->size() != 2) throw ConfigError("clutter must list paths for two channels");
        s.clutter = {(*it)[0].get<std::vector<ClutterPath>>(), (*it)[1].get<std::vector<ClutterPath>>()};
    }
    if (auto it = j.find("ref_attenuation"); it != j.end()) s.ref_attenuation = complex_from(*it);
    get_opt(j, "ref_delay", s.ref_delay);
    get_opt(j, "cfo", s.cfo);
    get_opt(j, "noise_power", s.noise_power);
    get_opt(j, "duration", s.duration);
}

void to_json(json& j, const ClutterCancelConfig& c) { j = json{{"taps", c.taps}, {"regularization", c.regularization}}; }

void from_json(const json& j, ClutterCancelConfig& c) {
    get_opt(j, "taps", c.taps);
    get_opt(j, "regularization", c.regularization);
}

void to_json(json& j, const CafConfig& c) {
    j = json{{"cit", c.cit}, {"doppler_bins", c.doppler_bins}, {"delay_search", c.delay_search}};
}

void from_json(const json& j, CafConfig& c) {
    get_opt(j, "cit", c.cit);
    get_opt(j, "doppler_bins", c.doppler_bins);
    get_opt(j, "delay_search", c.delay_search);
}

void to_json(json& j, const CfarConfig& c) {
    j = json{{"train", json::array({c.train[0], c.train[1]})}, {"guard", json::array({c.guard[0], c.guard[1]})}, {"pfa", c.pfa}};
}

void from_json(const json& j, CfarConfig& c) {
    if (auto it = j.find("train"); it != j.end()) c.train = {(*it).at(0).get<int>(), (*it).at(1).get<int>()};
    if (auto it = j.find("guard"); it != j.end()) c.guard = {(*it).at(0).get<int>(), (*it).at(1).get<int>()};
    get_opt(j, "pfa", c.pfa);
}

void to_json(json& j, const EstimatorConfig& c) {
    json th = json::object();
    for (const auto& [w, t] : c.presence_threshold) th[window_key(w)] = t;
    j = json{{"band_hz", c.band_hz},       {"breath_lo", c.breath_lo},   {"breath_hi", c.breath_hi},
             {"floor_lo", c.floor_lo},     {"floor_hi", c.floor_hi},     {"count_lo", c.count_lo},
             {"count_hi", c.count_hi},     {"count_floor", c.count_floor}, {"count_grid", c.count_grid},
             {"gate", c.gate},             {"floor_gate", c.floor_gate}, {"min_active", c.min_active},
             {"active_max_hz", c.active_max_hz}, {"clip_hz", c.clip_hz}, {"presence_threshold", th}};
}

void from_json(const json& j, EstimatorConfig& c) {
    get_opt(j, "band_hz", c.band_hz);
    get_opt(j, "breath_lo", c.breath_lo);
    get_opt(j, "breath_hi", c.breath_hi);
    get_opt(j, "floor_lo", c.floor_lo);
    get_opt(j, "floor_hi", c.floor_hi);
    get_opt(j, "count_lo", c.count_lo);
    get_opt(j, "count_hi", c.count_hi);
    get_opt(j, "count_floor", c.count_floor);
    get_opt(j, "count_grid", c.count_grid);
    get_opt(j, "gate", c.gate);
    get_opt(j, "floor_gate", c.floor_gate);
    get_opt(j, "min_active", c.min_active);
    get_opt(j, "active_max_hz", c.active_max_hz);
    get_opt(j, "clip_hz", c.clip_hz);
    if (auto it = j.find("presence_threshold"); it != j.end()) {
        if (!it->is_object()) throw ConfigError("presence_threshold must map window seconds to thresholds");
        c.presence_threshold.clear();
        for (const auto& [k, v] : it->items()) {
            try {
                c.presence_threshold[std::stod(k)] = v.get<double>();
            } catch (const std::invalid_argument&) {
                throw ConfigError("presence_threshold key is not a number: " + k);
            }
        }
    }
}

std::uint64_t json_hash(const json& j) { return fnv1a(j.dump()); }

Scenario load_scenario(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
        return j.get<Scenario>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid scenario " + path.string() + ": " + e.what());
    }
}

void save_scenario(const std::filesystem::path& path, const Scenario& s) { write_text(path, json(s).dump(2) + "\n"); }

EstimatorConfig load_estimator_config(const std::filesystem::path& path) {
    try {
        return json::parse(read_text(path)).get<EstimatorConfig>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid estimator config " + path.string() + ": " + e.what());
    }
}

}  // namespace breathradar
