#include "breathradar/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "breathradar/formats.hpp"
#include "breathradar/rng.hpp"
#include "breathradar/scenario_json.hpp"

namespace breathradar {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetSpec::validate() const {
    if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
    if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must lie in (0, 1)");
    if (folds < 2) throw ConfigError("folds must be >= 2");
    if (kind == DatasetKind::Counting && classes.empty()) throw ConfigError("counting dataset needs classes");
    if (kind == DatasetKind::Counting) {
        for (int c : classes) {
            if (c < 1) throw ConfigError("counting classes must be positive");
        }
        auto sorted = classes;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ConfigError("duplicate class");
    }
    if (windows.empty()) throw ConfigError("windows must be nonempty");
    for (double w : windows) {
        if (!(w > 0 && w <= duration)) throw ConfigError("window outside (0, duration]");
    }
    if (!(closest_distance > 0)) throw ConfigError("closest_distance must be positive");
    if (!(noise_power >= 0) || !(interferer_rcs >= 0) || !(target_rcs >= 0)) throw ConfigError("negative power or gain");
    if (!(duration > 0)) throw ConfigError("duration must be positive");
    caf.validate();
    cfar.validate();
    WaveformConfig wf;
    wf.sample_rate = sample_rate;
    wf.validate();
    exact_sample_count(caf.cit, sample_rate, "cit");
}

std::vector<int> DatasetSpec::labels() const {
    if (kind == DatasetKind::Detection) return {1, 0};
    return classes;
}

void to_json(json& j, const DatasetSpec& s) {
    j = json{{"kind", s.kind == DatasetKind::Detection ? "detection" : "counting"},
             {"samples_per_class", s.samples_per_class},
             {"windows", s.windows},
             {"classes", s.classes},
             {"split", s.split},
             {"folds", s.folds},
             {"closest_distance", s.closest_distance},
             {"master_seed", s.master_seed},
             {"sample_rate", s.sample_rate},
             {"duration", s.duration},
             {"noise_power", s.noise_power},
             {"interferer_rcs", s.interferer_rcs},
             {"target_rcs", s.target_rcs},
             {"realism_margin_db", s.realism_margin_db},
             {"store_iq", s.store_iq},
             {"clutter", s.clutter},
             {"caf", s.caf},
             {"cfar", s.cfar}};
}

namespace {

template <class T>
void get_opt(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(out);
}

}  // namespace

void from_json(const json& j, DatasetSpec& s) {
    if (auto it = j.find("kind"); it != j.end()) {
        const auto k = it->get<std::string>();
        if (k == "detection") {
            s.kind = DatasetKind::Detection;
        } else if (k == "counting") {
            s.kind = DatasetKind::Counting;
        } else {
            throw ConfigError("dataset kind must be \"detection\" or \"counting\"");
        }
    }
    get_opt(j, "samples_per_class", s.samples_per_class);
    get_opt(j, "windows", s.windows);
    get_opt(j, "classes", s.classes);
    get_opt(j, "split", s.split);
    get_opt(j, "folds", s.folds);
    get_opt(j, "closest_distance", s.closest_distance);
    get_opt(j, "master_seed", s.master_seed);
    get_opt(j, "sample_rate", s.sample_rate);
    get_opt(j, "duration", s.duration);
    get_opt(j, "noise_power", s.noise_power);
    get_opt(j, "interferer_rcs", s.interferer_rcs);
    get_opt(j, "target_rcs", s.target_rcs);
    get_opt(j, "realism_margin_db", s.realism_margin_db);
    get_opt(j, "store_iq", s.store_iq);
    get_opt(j, "clutter", s.clutter);
    get_opt(j, "caf", s.caf);
    get_opt(j, "cfar", s.cfar);
}

void to_json(json& j, const ManifestEntry& e) {
    j = json{{"id", e.id},
             {"label", e.label},
             {"seed", e.seed},
             {"scenario_hash", e.scenario_hash},
             {"rate", e.rate},
             {"realism_db", std::isfinite(e.realism_db) ? json(e.realism_db) : json(nullptr)},
             {"scenario_path", e.scenario_path},
             {"iq_paths", e.iq_paths},
             {"spectrogram_paths", e.spectrogram_paths},
             {"cfar_paths", e.cfar_paths},
             {"fold", e.fold},
             {"split", e.split}};
}

void from_json(const json& j, ManifestEntry& e) {
    j.at("id").get_to(e.id);
    j.at("label").get_to(e.label);
    get_opt(j, "seed", e.seed);
    get_opt(j, "scenario_hash", e.scenario_hash);
    get_opt(j, "rate", e.rate);
    e.realism_db = std::numeric_limits<double>::infinity();
    get_opt(j, "realism_db", e.realism_db);
    get_opt(j, "scenario_path", e.scenario_path);
    get_opt(j, "iq_paths", e.iq_paths);
    j.at("spectrogram_paths").get_to(e.spectrogram_paths);
    get_opt(j, "cfar_paths", e.cfar_paths);
    j.at("fold").get_to(e.fold);
    j.at("split").get_to(e.split);
}

void to_json(json& j, const DatasetManifest& m) {
    j = json{{"format_version", m.format_version}, {"spec", m.spec}, {"entries", m.entries}};
}

void from_json(const json& j, DatasetManifest& m) {
    j.at("format_version").get_to(m.format_version);
    if (m.format_version != kManifestFormatVersion) throw FormatError("unsupported manifest format_version");
    j.at("spec").get_to(m.spec);
    j.at("entries").get_to(m.entries);
}

DatasetSpec load_dataset_spec(const fs::path& path) {
    try {
        auto spec = json::parse(read_text(path)).get<DatasetSpec>();
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

DatasetManifest load_manifest(const fs::path& path) {
    try {
        return json::parse(read_text(path)).get<DatasetManifest>();
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::uint64_t entry_seed(const DatasetSpec& spec, int label, int index) {
    return derive_seed(spec.master_seed, std::uint64_t(std::int64_t(label)), std::uint64_t(index));
}

namespace {

// Scene layout: transmitter at the origin, target 2 m in front of it, the two
// surveillance receivers on either side of the target, 40 degrees off the
// target-transmitter axis, at closest_distance and closest_distance + 0.4 m.
constexpr double kTargetRange = 2.0;
constexpr double kReceiverSpacing = 0.4;
constexpr double kReceiverAngle = 40.0 * kPi / 180.0;
constexpr double kRoomHalfWidth = 2.0;
constexpr double kRoomDepth = 4.0;
constexpr double kKeepOut = 0.2;

bool in_room(const Vec3& p, const Vec3& target) {
    return p.x >= -kRoomHalfWidth && p.x <= kRoomHalfWidth && p.y >= 0.0 && p.y <= kRoomDepth && distance(p, target) >= kKeepOut;
}

Interferer random_walk(Rng& rng, const Vec3& target, double duration, double rcs) {
    Interferer it;
    it.rcs_gain = rcs;
    Vec3 p;
    do {
        p = {rng.uniform(-kRoomHalfWidth, kRoomHalfWidth), rng.uniform(0.0, kRoomDepth), 0.0};
    } while (!in_room(p, target));
    double t = 0.0;
    it.waypoints.push_back({t, p});
    while (t < duration) {
        bool moved = false;
        for (int tries = 0; tries < 1000 && !moved; ++tries) {
            const double heading = rng.uniform(0.0, 2.0 * kPi);
            const double speed = rng.uniform(0.5, 1.5);
            const double dt = rng.uniform(1.0, 3.0);
            const Vec3 q = p + Vec3{speed * dt * std::cos(heading), speed * dt * std::sin(heading), 0.0};
            // the straight leg must also stay clear of the target
            bool ok = in_room(q, target);
            for (int s = 1; ok && s < 16; ++s) ok = distance(p + (s / 16.0) * (q - p), target) >= kKeepOut;
            if (!ok) continue;
            t += dt;
            p = q;
            it.waypoints.push_back({t, p});
            moved = true;
        }
        if (!moved) {  // boxed in: stand still for a second
            t += 1.0;
            it.waypoints.push_back({t, p});
        }
    }
    return it;
}

}  // namespace

Scenario make_scenario(const DatasetSpec& spec, int label, std::uint64_t seed) {
    Rng rng(seed);
    Scenario s;
    s.waveform.sample_rate = spec.sample_rate;
    s.waveform.seed = derive_seed(seed, 1);
    s.duration = spec.duration;
    s.noise_power = spec.noise_power;
    s.tx_pos = {0.0, 0.0, 0.0};
    s.ref_rx_pos = {0.5, 0.0, 0.0};
    s.ref_delay = distance(s.tx_pos, s.ref_rx_pos) / kSpeedOfLight;
    s.ref_attenuation = {10.0, 0.0};

    const Vec3 target{0.0, kTargetRange, 0.0};
    const double d0 = spec.closest_distance, d1 = spec.closest_distance + kReceiverSpacing;
    s.sur_rx_pos[0] = target + Vec3{d0 * std::sin(kReceiverAngle), -d0 * std::cos(kReceiverAngle), 0.0};
    s.sur_rx_pos[1] = target + Vec3{-d1 * std::sin(kReceiverAngle), -d1 * std::cos(kReceiverAngle), 0.0};

    double rate = 0.0;
    bool has_target = true;
    if (spec.kind == DatasetKind::Detection) {
        has_target = label != 0;
        rate = rng.uniform(0.2, 0.6);
    } else {
        rate = label / 10.0 + rng.uniform(-0.01, 0.01);
    }
    const double amplitude = rng.uniform(3e-3, 8e-3);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    if (has_target) s.target = BreathingTarget{target, amplitude, rate, phase, spec.target_rcs};

    if (spec.interferer_rcs > 0) s.interferer = random_walk(rng, target, spec.duration, spec.interferer_rcs);

    for (auto& paths : s.clutter) {
        const auto n = rng.uniform_int(3, 8);
        for (std::int64_t k = 0; k < n; ++k) {
            const double power_db = rng.uniform(-10.0, 20.0);
            const double ph = rng.uniform(0.0, 2.0 * kPi);
            const double delay = rng.uniform(0.0, 4.0) / spec.sample_rate;
            paths.push_back({std::polar(std::pow(10.0, power_db / 20.0), ph), delay});
        }
    }
    return s;
}

namespace {

// Per surveillance channel: CAF energy of a single-scatterer copy of the
// scene (noise, clutter and the other mover removed) outside |f| <= 1 Hz.
// The CAF keeps the waveform's self-noise, through which a strong, nearly
// static echo leaks into every Doppler bin.
std::array<double, 2> off_dc_energy(const Scenario& scene, const CafConfig& caf) {
    const auto ch = synthesize_channels(scene);
    std::array<double, 2> out{0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
        const auto m = caf_map(ch.ref, ch.sur[std::size_t(c)], std::nullopt, caf);
        for (int r = 0; r < m.rows; ++r) {
            for (int k = 0; k < m.cols; ++k) {
                if (std::abs(m.doppler_axis[std::size_t(k)]) > 1.0) out[std::size_t(c)] += std::norm(m.at(r, k));
            }
        }
    }
    return out;
}

Scenario isolate(Scenario s, bool keep_target) {
    s.noise_power = 0.0;
    s.clutter = {};
    if (keep_target) {
        s.interferer.reset();
    } else {
        s.target.reset();
    }
    return s;
}

}  // namespace

double realism_ratio_db(const Scenario& scn, const CafConfig& caf) {
    if (!scn.target) return std::numeric_limits<double>::infinity();
    if (!scn.interferer || scn.interferer->waypoints.empty()) return -std::numeric_limits<double>::infinity();
    const auto tgt = off_dc_energy(isolate(scn, true), caf);
    const auto itf = off_dc_energy(isolate(scn, false), caf);
    double worst = std::numeric_limits<double>::infinity();
    for (int ch = 0; ch < 2; ++ch) {
        const double r = tgt[std::size_t(ch)] > 0 ? 10.0 * std::log10(itf[std::size_t(ch)] / tgt[std::size_t(ch)])
                                                  : std::numeric_limits<double>::infinity();
        worst = std::min(worst, r);
    }
    return worst;
}

double enforce_realism(Scenario& scn, const CafConfig& caf, double margin_db) {
    const double r = realism_ratio_db(scn, caf);
    if (!scn.interferer || !std::isfinite(r) || r >= margin_db) return r;
    // the interferer's CAF scales linearly with its gain, so the ratio moves
    // by exactly 20 log10 of the factor; the cushion absorbs rounding
    const double raise_db = margin_db - r + 0.1;
    scn.interferer->rcs_gain *= std::pow(10.0, raise_db / 20.0);
    return r + raise_db;
}

PipelineOutput run_pipeline(const ChannelSet& ch, const ClutterCancelConfig& clutter, const CafConfig& caf, const CfarConfig& cfar) {
    PipelineOutput out{caf_maps(ch.ref, ch.sur, clutter, caf), {}};
    for (int c = 0; c < 2; ++c) out.cfar[std::size_t(c)] = cfar_detect(out.maps[std::size_t(c)], cfar);
    return out;
}

void write_sidecar(const fs::path& artifact, std::uint64_t config_hash, const json& extra) {
    json j = extra.is_object() ? extra : json::object();
    j["artifact"] = artifact.filename().string();
    j["config_hash"] = hex64(config_hash);
    write_text(fs::path(artifact.string() + ".json"), j.dump(2) + "\n");
}

namespace {

struct Slot {
    int label;
    int index;
    int fold;
    bool train;
};

std::string entry_id(const DatasetSpec& spec, int label, int index) {
    char buf[32];
    if (spec.kind == DatasetKind::Detection) {
        std::snprintf(buf, sizeof buf, "%s-%04d", label ? "pos" : "neg", index);
    } else {
        std::snprintf(buf, sizeof buf, "c%d-%04d", label, index);
    }
    return buf;
}

// Fold tags run round-robin over the whole generation order, so each class
// and the dataset as a whole are spread evenly. The train/test split draws a
// seeded permutation per class; per-class train counts use cumulative
// rounding so the global train count is round(split * total).
std::vector<Slot> plan(const DatasetSpec& spec) {
    std::vector<Slot> slots;
    const auto labels = spec.labels();
    const int n = spec.samples_per_class;
    int position = 0;
    for (std::size_t li = 0; li < labels.size(); ++li) {
        const auto before = std::lround(spec.split * double(n) * double(li));
        const auto after = std::lround(spec.split * double(n) * double(li + 1));
        const auto n_train = static_cast<std::size_t>(after - before);

        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(spec.master_seed, 0x5b117ULL, std::uint64_t(std::int64_t(labels[li]))));
        for (std::size_t i = perm.size(); i > 1; --i) {
            std::swap(perm[i - 1], perm[std::size_t(rng.uniform_int(0, std::int64_t(i) - 1))]);
        }
        std::vector<bool> train(static_cast<std::size_t>(n), false);
        for (std::size_t i = 0; i < n_train; ++i) train[std::size_t(perm[i])] = true;

        for (int i = 0; i < n; ++i) slots.push_back({labels[li], i, position++ % spec.folds, train[std::size_t(i)]});
    }
    return slots;
}

ManifestEntry build_entry(const DatasetSpec& spec, const Slot& slot, const fs::path& out_dir, std::uint64_t config_hash) {
    ManifestEntry e;
    e.id = entry_id(spec, slot.label, slot.index);
    e.label = slot.label;
    e.seed = entry_seed(spec, slot.label, slot.index);
    e.fold = slot.fold;
    e.split = slot.train ? "train" : "test";

    Scenario scn = make_scenario(spec, slot.label, e.seed);
    e.realism_db = enforce_realism(scn, spec.caf, spec.realism_margin_db);
    e.rate = scn.target ? scn.target->rate : 0.0;
    const auto hash = scenario_hash(scn);
    e.scenario_hash = hex64(hash);

    const fs::path rel = fs::path("entries") / e.id;
    fs::create_directories(out_dir / rel);
    const json meta{{"entry", e.id}, {"label", e.label}, {"scenario_hash", e.scenario_hash}};

    e.scenario_path = (rel / "scenario.json").generic_string();
    save_scenario(out_dir / e.scenario_path, scn);
    write_sidecar(out_dir / e.scenario_path, config_hash, meta);

    const auto channels = synthesize_channels(scn);
    if (spec.store_iq) {
        const std::array<std::pair<const char*, const IQBuffer*>, 3> bufs{
            {{"ref.priq", &channels.ref}, {"sur1.priq", &channels.sur[0]}, {"sur2.priq", &channels.sur[1]}}};
        for (const auto& [name, buf] : bufs) {
            const auto p = (rel / name).generic_string();
            write_priq(out_dir / p, *buf);
            write_sidecar(out_dir / p, config_hash, meta);
            e.iq_paths.push_back(p);
        }
    }

    const auto out = run_pipeline(channels, spec.clutter, spec.caf, spec.cfar);
    for (int c = 0; c < 2; ++c) {
        const auto caf_path = (rel / ("caf" + std::to_string(c + 1) + ".psgm")).generic_string();
        write_psgm(out_dir / caf_path, to_psgm_complex(out.maps[std::size_t(c)]));
        write_sidecar(out_dir / caf_path, config_hash, meta);
        e.spectrogram_paths.push_back(caf_path);

        const auto cfar_path = (rel / ("cfar" + std::to_string(c + 1) + ".psgm")).generic_string();
        write_psgm(out_dir / cfar_path, to_psgm_detections(out.cfar[std::size_t(c)]));
        write_sidecar(out_dir / cfar_path, config_hash, meta);
        e.cfar_paths.push_back(cfar_path);
    }
    return e;
}

}  // namespace

DatasetManifest plan_manifest(const DatasetSpec& spec) {
    spec.validate();
    DatasetManifest m;
    m.spec = spec;
    for (const auto& slot : plan(spec)) {
        ManifestEntry e;
        e.id = entry_id(spec, slot.label, slot.index);
        e.label = slot.label;
        e.seed = entry_seed(spec, slot.label, slot.index);
        e.fold = slot.fold;
        e.split = slot.train ? "train" : "test";
        m.entries.push_back(std::move(e));
    }
    return m;
}

DatasetManifest generate(const DatasetSpec& spec, const fs::path& out_dir, int jobs, const ProgressFn& progress) {
    spec.validate();
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    const auto slots = plan(spec);
    const auto config_hash = json_hash(json(spec));

    const fs::path marker = out_dir / kPartialMarker;
    try {
        fs::create_directories(out_dir);
        write_text(marker, "generation in progress or failed\n");
    } catch (const std::exception& e) {
        throw IoError(std::string("cannot prepare output directory: ") + e.what());
    }

    DatasetManifest m;
    m.spec = spec;
    m.entries.resize(slots.size());
    std::atomic<std::size_t> next{0}, done{0};
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= slots.size() || failed.load()) return;
            try {
                m.entries[i] = build_entry(spec, slots[i], out_dir, config_hash);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!first_error) first_error = std::current_exception();
                failed = true;
                return;
            }
            const auto d = done.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(mu);
                progress(d, slots.size());
            }
        }
    };
    const int n_threads = std::min<int>(jobs, int(slots.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    if (first_error) {
        try {
            std::rethrow_exception(first_error);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw IoError(e.what());
        }
    }

    const fs::path manifest_path = out_dir / "manifest.json";
    write_text(manifest_path, json(m).dump(2) + "\n");
    write_sidecar(manifest_path, config_hash);
    fs::remove(marker);
    return m;
}

std::pair<std::vector<std::string>, std::vector<std::string>> kfold(const DatasetManifest& m, int fold) {
    if (fold < 0 || fold >= m.spec.folds) throw InputError("fold index out of range");
    std::pair<std::vector<std::string>, std::vector<std::string>> out;
    for (const auto& e : m.entries) (e.fold == fold ? out.second : out.first).push_back(e.id);
    return out;
}

std::array<SlowTimeTrack, 2> load_tracks(const fs::path& dataset_dir, const ManifestEntry& e, const DatasetSpec& spec,
                                         double band_hz) {
    if (e.spectrogram_paths.size() != 2) throw FormatError("entry " + e.id + " needs two spectrograms");
    std::array<SlowTimeTrack, 2> tracks;
    for (int c = 0; c < 2; ++c) {
        const auto psgm = read_psgm(dataset_dir / e.spectrogram_paths[std::size_t(c)]);
        if (psgm.cols != std::uint32_t(spec.caf.doppler_bins)) throw FormatError("spectrogram width does not match the spec");
        std::vector<double> times(psgm.rows);
        for (std::size_t r = 0; r < times.size(); ++r) times[r] = (double(r) + 0.5) * spec.caf.cit;
        const auto map = doppler_map_from_psgm(psgm, doppler_axis(spec.caf.doppler_bins, spec.caf.cit), std::move(times), c + 1);
        tracks[std::size_t(c)] = extract_track(map, band_hz);
    }
    return tracks;
}

}  // namespace breathradar
