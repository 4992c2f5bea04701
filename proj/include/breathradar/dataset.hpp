#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "breathradar/caf.hpp"
#include "breathradar/cfar.hpp"
#include "breathradar/clutter.hpp"
#include "breathradar/estimator.hpp"
#include "breathradar/synth.hpp"

namespace breathradar {

enum class DatasetKind { Detection, Counting };

/// Labeled synthetic dataset description. The first block mirrors the
/// published dataset layout; the second fixes the simulated world and the
/// processing chain applied to every entry.
struct DatasetSpec {
    DatasetKind kind = DatasetKind::Detection;
    int samples_per_class = 200;
    std::vector<double> windows{2.5, 5.0, 7.0, 10.0};
    std::vector<int> classes{2, 3, 4, 5, 6};
    double split = 0.8;
    int folds = 5;
    double closest_distance = 0.3;  // m, target to nearest surveillance receiver
    std::uint64_t master_seed = 1;

    double sample_rate = 125e3;     // Hz
    double duration = 10.0;         // s
    double noise_power = 1.0;
    double interferer_rcs = 5.0;
    double target_rcs = 1.0;
    double realism_margin_db = 10.0;
    bool store_iq = true;
    ClutterCancelConfig clutter;
    CafConfig caf;
    CfarConfig cfar;

    void validate() const;
    /// Labels in generation order: {1, 0} for detection, `classes` for counting.
    std::vector<int> labels() const;
};

struct ManifestEntry {
    std::string id;
    int label = 0;
    std::uint64_t seed = 0;
    std::string scenario_hash;
    double rate = 0.0;  // ground-truth breathing rate, Hz (0 without target)
    double realism_db = 0.0;
    std::string scenario_path;
    std::vector<std::string> iq_paths;           // ref, sur1, sur2 (empty when IQ is not stored)
    std::vector<std::string> spectrogram_paths;  // complex CAF per surveillance channel
    std::vector<std::string> cfar_paths;         // detection masks per surveillance channel
    int fold = 0;
    std::string split;  // "train" | "test"
};

inline constexpr int kManifestFormatVersion = 1;

struct DatasetManifest {
    int format_version = kManifestFormatVersion;
    DatasetSpec spec;
    std::vector<ManifestEntry> entries;
};

void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);
void to_json(nlohmann::json& j, const ManifestEntry& e);
void from_json(const nlohmann::json& j, ManifestEntry& e);
void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

DatasetSpec load_dataset_spec(const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Seed of entry `index` of class `label`.
std::uint64_t entry_seed(const DatasetSpec& spec, int label, int index);

/// Randomized world for one entry. For detection, label 1 carries a
/// breathing target and label 0 does not.
Scenario make_scenario(const DatasetSpec& spec, int label, std::uint64_t seed);

/// Interferer-to-target CAF energy ratio (dB) outside |f| <= 1 Hz, each
/// scatterer measured alone without noise or clutter; minimum over the two
/// surveillance channels. +inf without a target,
/// -inf without an interferer.
double realism_ratio_db(const Scenario& scn, const CafConfig& caf);

/// Raises the interferer gain until realism_ratio_db clears the margin.
/// Returns the final ratio.
double enforce_realism(Scenario& scn, const CafConfig& caf, double margin_db);

/// Processing chain shared by the dataset and the CLI.
struct PipelineOutput {
    std::array<DopplerMap, 2> maps;
    std::array<CfarMap, 2> cfar;
};
PipelineOutput run_pipeline(const ChannelSet& channels, const ClutterCancelConfig& clutter, const CafConfig& caf,
                            const CfarConfig& cfar);

/// Writes `<path>.json` next to an artifact.
void write_sidecar(const std::filesystem::path& artifact, std::uint64_t config_hash, const nlohmann::json& extra = {});

/// Name of the marker left in out_dir when generation fails part way.
inline constexpr const char* kPartialMarker = "PARTIAL";

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Entry ids, labels, seeds, folds and splits, without generating anything.
DatasetManifest plan_manifest(const DatasetSpec& spec);

/// Generates every entry under out_dir/entries/<id>/ and writes
/// out_dir/manifest.json. Output is independent of `jobs`.
DatasetManifest generate(const DatasetSpec& spec, const std::filesystem::path& out_dir, int jobs = 1,
                         const ProgressFn& progress = {});

/// Entry ids of the train and test sides of one fold.
std::pair<std::vector<std::string>, std::vector<std::string>> kfold(const DatasetManifest& m, int fold);

/// Tracks of both channels read back from an entry's spectrograms.
std::array<SlowTimeTrack, 2> load_tracks(const std::filesystem::path& dataset_dir, const ManifestEntry& e,
                                         const DatasetSpec& spec, double band_hz);

}  // namespace breathradar
