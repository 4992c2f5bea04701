#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "breathradar/caf.hpp"
#include "breathradar/cfar.hpp"
#include "breathradar/clutter.hpp"
#include "breathradar/estimator.hpp"
#include "breathradar/synth.hpp"

namespace breathradar {

// JSON mirrors of the configuration types. Missing fields keep their
// defaults, so partial documents are accepted.

void to_json(nlohmann::json& j, const Vec3& v);
void from_json(const nlohmann::json& j, Vec3& v);
void to_json(nlohmann::json& j, const WaveformConfig& c);
void from_json(const nlohmann::json& j, WaveformConfig& c);
void to_json(nlohmann::json& j, const BreathingTarget& t);
void from_json(const nlohmann::json& j, BreathingTarget& t);
void to_json(nlohmann::json& j, const Interferer& i);
void from_json(const nlohmann::json& j, Interferer& i);
void to_json(nlohmann::json& j, const ClutterPath& p);
void from_json(const nlohmann::json& j, ClutterPath& p);
void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);
void to_json(nlohmann::json& j, const ClutterCancelConfig& c);
void from_json(const nlohmann::json& j, ClutterCancelConfig& c);
void to_json(nlohmann::json& j, const CafConfig& c);
void from_json(const nlohmann::json& j, CafConfig& c);
void to_json(nlohmann::json& j, const CfarConfig& c);
void from_json(const nlohmann::json& j, CfarConfig& c);
void to_json(nlohmann::json& j, const EstimatorConfig& c);
void from_json(const nlohmann::json& j, EstimatorConfig& c);

/// FNV-1a of the compact, key-sorted dump.
std::uint64_t json_hash(const nlohmann::json& j);
inline std::uint64_t scenario_hash(const Scenario& s) { return json_hash(nlohmann::json(s)); }

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const std::filesystem::path& path, const Scenario& s);

EstimatorConfig load_estimator_config(const std::filesystem::path& path);

}  // namespace breathradar
