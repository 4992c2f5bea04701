// breathradar: command-line front end.
//
//   synth        scenario JSON -> ref/sur1/sur2 PRIQ captures
//   pipeline     scenario -> clutter cancellation, CAF, CFAR, estimator
//   dataset      dataset spec -> entries + manifest.json
//   eval         manifest -> accuracy tables, logistic fit, confusion matrix
//   fit-logistic (time, accuracy) points -> logistic fit
//   calibrate    detection manifest -> estimator config with thresholds
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "breathradar/dataset.hpp"
#include "breathradar/estimator.hpp"
#include "breathradar/formats.hpp"
#include "breathradar/rng.hpp"
#include "breathradar/scenario_json.hpp"
#include "breathradar/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace breathradar;

namespace {

struct Options {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::optional<double> distance;
    std::optional<double> window;
    std::string estimator = BREATHRADAR_DEFAULT_ESTIMATOR;
    std::string split = "all";
    bool verbose = false;
};

fs::path require_file(const std::string& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("missing --") + what);
    if (!fs::is_regular_file(p)) throw ConfigError(std::string(what) + " file not found: " + p);
    return p;
}

std::optional<std::uint64_t> resolve_seed(const Options& o) {
    if (o.seed) return o.seed;
    if (const char* env = std::getenv("BREATHRADAR_SEED"); env && *env) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used, 0);
            if (env[used] != '\0') throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(std::string("BREATHRADAR_SEED is not an unsigned integer: ") + env);
        }
    }
    return std::nullopt;
}

json parse_json_file(const fs::path& p) {
    try {
        return json::parse(read_text(p));
    } catch (const json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

void write_json(const fs::path& p, const json& j, std::uint64_t hash) {
    write_text(p, j.dump(2) + "\n");
    write_sidecar(p, hash);
}

void write_csv(const fs::path& p, const std::string& text, std::uint64_t hash) {
    write_text(p, text);
    write_sidecar(p, hash);
}

EstimatorConfig load_estimator(const Options& o) { return load_estimator_config(require_file(o.estimator, "estimator")); }

// ---- synth ---------------------------------------------------------------

int cmd_synth(const Options& o) {
    Scenario scn = load_scenario(require_file(o.config, "config"));
    if (auto s = resolve_seed(o)) scn.waveform.seed = *s;
    scn.validate();
    const auto hash = scenario_hash(scn);
    const fs::path out(o.out);
    fs::create_directories(out);

    const auto ch = synthesize_channels(scn);
    const json meta{{"scenario_hash", hex64(hash)}, {"sample_rate", ch.ref.sample_rate}, {"samples", ch.ref.samples.size()}};
    save_scenario(out / "scenario.json", scn);
    write_sidecar(out / "scenario.json", hash);
    write_priq(out / "ref.priq", ch.ref);
    write_sidecar(out / "ref.priq", hash, meta);
    for (int c = 0; c < 2; ++c) {
        const auto p = out / ("sur" + std::to_string(c + 1) + ".priq");
        write_priq(p, ch.sur[std::size_t(c)]);
        write_sidecar(p, hash, meta);
    }
    if (o.verbose) std::cerr << "wrote 3 channels of " << ch.ref.samples.size() << " samples to " << out << "\n";
    return 0;
}

// ---- pipeline ------------------------------------------------------------

struct RunConfig {
    Scenario scenario;
    ClutterCancelConfig clutter;
    CafConfig caf;
    CfarConfig cfar;
    std::optional<EstimatorConfig> estimator;
    std::vector<double> windows;
};

// A run config either embeds/points at a scenario or is itself a scenario.
RunConfig load_run_config(const fs::path& path) {
    const json j = parse_json_file(path);
    RunConfig rc;
    try {
        if (auto it = j.find("scenario"); it != j.end()) {
            rc.scenario = it->get<Scenario>();
        } else if (auto sp = j.find("scenario_path"); sp != j.end()) {
            rc.scenario = load_scenario(require_file((path.parent_path() / sp->get<std::string>()).string(), "scenario"));
        } else {
            rc.scenario = j.get<Scenario>();
        }
        if (auto it = j.find("clutter"); it != j.end() && it->is_object()) rc.clutter = it->get<ClutterCancelConfig>();
        if (auto it = j.find("caf"); it != j.end()) rc.caf = it->get<CafConfig>();
        if (auto it = j.find("cfar"); it != j.end()) rc.cfar = it->get<CfarConfig>();
        if (auto it = j.find("estimator"); it != j.end()) {
            rc.estimator = it->is_string()
                               ? load_estimator_config(require_file((path.parent_path() / it->get<std::string>()).string(), "estimator"))
                               : it->get<EstimatorConfig>();
        }
        if (auto it = j.find("windows"); it != j.end()) rc.windows = it->get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return rc;
}

int cmd_pipeline(const Options& o) {
    RunConfig rc = load_run_config(require_file(o.config, "config"));
    if (auto s = resolve_seed(o)) rc.scenario.waveform.seed = *s;
    rc.scenario.validate();
    rc.caf.validate();
    rc.cfar.validate();
    const EstimatorConfig ec = rc.estimator ? *rc.estimator : load_estimator(o);

    std::vector<double> windows = rc.windows;
    if (o.window) windows = {*o.window};
    if (windows.empty()) {
        for (double w : kDetectionWindows) {
            if (w <= rc.scenario.duration + 1e-9) windows.push_back(w);
        }
    }
    for (double w : windows) {
        if (!(w > 0) || w > rc.scenario.duration + 1e-9) throw ConfigError("window longer than the scenario");
        ec.threshold_for(w);
    }

    const json effective{{"scenario", rc.scenario}, {"clutter", rc.clutter}, {"caf", rc.caf}, {"cfar", rc.cfar}, {"estimator", ec}};
    const auto hash = json_hash(effective);
    const auto shash = hex64(scenario_hash(rc.scenario));
    const fs::path out(o.out);
    fs::create_directories(out);

    const auto channels = synthesize_channels(rc.scenario);
    const auto res = run_pipeline(channels, rc.clutter, rc.caf, rc.cfar);
    const json axes{{"cit", rc.caf.cit}, {"doppler_bins", rc.caf.doppler_bins}, {"rows", res.maps[0].rows}, {"zero_bin", res.maps[0].zero_bin()},
                    {"scenario_hash", shash}};
    std::array<SlowTimeTrack, 2> tracks;
    for (int c = 0; c < 2; ++c) {
        const auto n = std::to_string(c + 1);
        write_psgm(out / ("caf" + n + ".psgm"), to_psgm_complex(res.maps[std::size_t(c)]));
        write_sidecar(out / ("caf" + n + ".psgm"), hash, axes);
        write_psgm(out / ("cfar" + n + ".psgm"), to_psgm_detections(res.cfar[std::size_t(c)]));
        write_sidecar(out / ("cfar" + n + ".psgm"), hash, axes);
        tracks[std::size_t(c)] = extract_track(res.maps[std::size_t(c)], ec.band_hz);
    }

    json records = json::array();
    for (double w : windows) {
        const auto pr = detect_presence(tracks, w, ec);
        json count = nullptr;
        try {
            count = count_respirations(tracks, w, ec);
        } catch (const NoRespirationDetected&) {
        }
        json truth{{"present", rc.scenario.target.has_value()}};
        truth["count"] = rc.scenario.target ? json(std::lround(rc.scenario.target->rate * w)) : json(0);
        records.push_back({{"scenario_hash", shash}, {"window_s", w}, {"present", pr.present}, {"score", pr.score}, {"count", count}, {"truth", truth}});
        if (o.verbose) std::cerr << "window " << w << " s: score " << pr.score << (pr.present ? " present" : " absent") << "\n";
    }
    write_json(out / "results.json", records, hash);
    write_json(out / "config.json", effective, hash);
    return 0;
}

// ---- dataset -------------------------------------------------------------

int cmd_dataset(const Options& o) {
    DatasetSpec spec = load_dataset_spec(require_file(o.config, "config"));
    if (auto s = resolve_seed(o)) spec.master_seed = *s;
    if (o.distance) spec.closest_distance = *o.distance;
    spec.validate();
    ProgressFn progress;
    if (o.verbose) {
        progress = [](std::size_t done, std::size_t total) {
            if (done == total || done % 20 == 0) std::cerr << "\r" << done << "/" << total << (done == total ? "\n" : "") << std::flush;
        };
    }
    const auto m = generate(spec, o.out, o.jobs, progress);
    if (o.verbose) std::cerr << m.entries.size() << " entries in " << (fs::path(o.out) / "manifest.json") << "\n";
    return 0;
}

// ---- eval ----------------------------------------------------------------

fs::path manifest_path(const std::string& p) {
    if (fs::is_directory(p)) return require_file((fs::path(p) / "manifest.json").string(), "manifest");
    return require_file(p, "config");
}

std::vector<const ManifestEntry*> select(const DatasetManifest& m, const std::string& split) {
    if (split != "all" && split != "train" && split != "test") throw ConfigError("--split must be all, train or test");
    std::vector<const ManifestEntry*> out;
    for (const auto& e : m.entries) {
        if (split == "all" || e.split == split) out.push_back(&e);
    }
    if (out.empty()) throw InputError("no entries selected");
    return out;
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

int eval_detection(const Options& o, const DatasetManifest& m, const fs::path& root, const EstimatorConfig& ec) {
    const auto entries = select(m, o.split);
    std::vector<double> windows = m.spec.windows;
    if (o.window) windows = {*o.window};
    for (double w : windows) ec.threshold_for(w);

    const json effective{{"spec", m.spec}, {"estimator", ec}, {"split", o.split}, {"windows", windows}};
    const auto hash = json_hash(effective);
    const fs::path out(o.out);
    fs::create_directories(out);

    std::vector<int> truth;
    std::vector<std::vector<int>> pred(windows.size());
    json records = json::array();
    for (const auto* e : entries) {
        const auto tracks = load_tracks(root, *e, m.spec, ec.band_hz);
        truth.push_back(e->label);
        for (std::size_t wi = 0; wi < windows.size(); ++wi) {
            const auto r = detect_presence(tracks, windows[wi], ec);
            pred[wi].push_back(r.present ? 1 : 0);
            records.push_back({{"id", e->id}, {"scenario_hash", e->scenario_hash}, {"window_s", windows[wi]}, {"present", r.present},
                               {"score", r.score}, {"truth", e->label}});
        }
    }

    json acc = json::array();
    std::string csv = "window_s,accuracy,n\n";
    std::vector<std::pair<double, double>> points;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const double a = accuracy(pred[wi], truth);
        acc.push_back({{"window_s", windows[wi]}, {"accuracy", a}, {"n", truth.size()}});
        csv += fmt(windows[wi]) + "," + fmt(a) + "," + std::to_string(truth.size()) + "\n";
        points.emplace_back(windows[wi], a);
        if (o.verbose) std::cerr << "window " << windows[wi] << " s: accuracy " << a << "\n";
    }
    json summary{{"kind", "detection"}, {"split", o.split}, {"accuracy", acc}};
    if (points.size() >= 3) {
        const auto fit = fit_logistic(points);
        summary["logistic"] = {{"l", fit.l}, {"k", fit.k}, {"t0", fit.t0}, {"rss", fit.rss}, {"degenerate", fit.degenerate}};
        summary["constant_rss"] = constant_fit_rss(points);
        std::string curve = "t,accuracy\n";
        const double tmax = std::max_element(points.begin(), points.end())->first;
        for (int i = 0; i <= 200; ++i) {
            const double t = tmax * i / 200.0;
            curve += fmt(t) + "," + fmt(fit(t)) + "\n";
        }
        write_csv(out / "logistic.csv", curve, hash);
    }
    write_json(out / "eval.json", summary, hash);
    write_csv(out / "accuracy.csv", csv, hash);
    write_json(out / "records.json", records, hash);
    return 0;
}

int eval_counting(const Options& o, const DatasetManifest& m, const fs::path& root, const EstimatorConfig& ec) {
    const auto entries = select(m, o.split);
    const double window = o.window.value_or(10.0);
    if (window > m.spec.duration + 1e-9) throw ConfigError("window longer than the recordings");
    auto classes = m.spec.classes;
    std::sort(classes.begin(), classes.end());
    const int lo = classes.front(), hi = classes.back();
    auto index_of = [&](int label) { return int(std::lower_bound(classes.begin(), classes.end(), label) - classes.begin()); };

    const json effective{{"spec", m.spec}, {"estimator", ec}, {"split", o.split}, {"window", window}};
    const auto hash = json_hash(effective);
    const fs::path out(o.out);
    fs::create_directories(out);

    const std::size_t k = classes.size();
    std::vector<std::vector<int>> confusion(k, std::vector<int>(k, 0));
    std::vector<int> undetected(k, 0);
    std::vector<int> pred, truth;
    json records = json::array();
    for (const auto* e : entries) {
        const auto tracks = load_tracks(root, *e, m.spec, ec.band_hz);
        json count = nullptr;
        int p = -1;
        try {
            p = count_respirations(tracks, window, ec);
            count = p;
        } catch (const NoRespirationDetected&) {
        }
        const int t = index_of(e->label);
        if (p < 0) {
            undetected[std::size_t(t)]++;
        } else {
            confusion[std::size_t(t)][std::size_t(index_of(std::clamp(p, lo, hi)))]++;
        }
        pred.push_back(p);
        truth.push_back(e->label);
        records.push_back({{"id", e->id}, {"scenario_hash", e->scenario_hash}, {"window_s", window}, {"count", count}, {"truth", e->label},
                           {"rate", e->rate}});
    }
    const double a = accuracy(pred, truth);
    int within_one = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) within_one += pred[i] >= 0 && std::abs(pred[i] - truth[i]) <= 1;

    std::string csv = "truth\\pred";
    for (int c : classes) csv += "," + std::to_string(c);
    csv += ",none\n";
    for (std::size_t i = 0; i < k; ++i) {
        csv += std::to_string(classes[i]);
        for (std::size_t j = 0; j < k; ++j) csv += "," + std::to_string(confusion[i][j]);
        csv += "," + std::to_string(undetected[i]) + "\n";
    }
    const json summary{{"kind", "counting"},
                       {"split", o.split},
                       {"window_s", window},
                       {"closest_distance", m.spec.closest_distance},
                       {"accuracy", a},
                       {"within_one", double(within_one) / double(pred.size())},
                       {"n", pred.size()},
                       {"classes", classes},
                       {"confusion", confusion},
                       {"undetected", undetected}};
    if (o.verbose) std::cerr << "counting accuracy " << a << " over " << pred.size() << " entries\n";
    write_json(out / "eval.json", summary, hash);
    write_csv(out / "confusion.csv", csv, hash);
    write_json(out / "records.json", records, hash);
    return 0;
}

int cmd_eval(const Options& o) {
    const auto mp = manifest_path(o.config);
    const auto m = load_manifest(mp);
    const auto ec = load_estimator(o);
    return m.spec.kind == DatasetKind::Detection ? eval_detection(o, m, mp.parent_path(), ec) : eval_counting(o, m, mp.parent_path(), ec);
}

// ---- calibrate -----------------------------------------------------------

// Threshold maximizing accuracy on labeled scores. Candidates sit at the
// geometric midpoints between consecutive distinct scores; ties go to the
// widest gap (log ratio; a gap above a zero score counts as widest).
double best_threshold(std::vector<std::pair<double, int>> scored) {
    std::sort(scored.begin(), scored.end());
    const std::size_t n = scored.size();
    int positives = 0;
    for (const auto& s : scored) positives += s.second;
    // threshold below everything: all present
    int correct = positives, best_correct = -1;
    double best = 0.0, best_gap = -1.0;
    auto consider = [&](double th, double gap) {
        if (correct > best_correct || (correct == best_correct && gap > best_gap)) {
            best_correct = correct;
            best = th;
            best_gap = gap;
        }
    };
    const double floor_score = std::max(scored.front().first, 1e-300);
    consider(floor_score / 2.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        correct += scored[i].second ? -1 : 1;  // scored[i] now falls below the threshold
        if (i + 1 < n && scored[i + 1].first == scored[i].first) continue;
        const double a = scored[i].first;
        if (i + 1 < n) {
            const double b = scored[i + 1].first;
            if (a > 0) {
                consider(std::sqrt(a * b), std::log(b / a));
            } else {
                consider(b / 2.0, std::numeric_limits<double>::infinity());  // a zero score has no log
            }
        } else {
            consider(a > 0 ? a * 2.0 : 1.0, 0.0);
        }
    }
    return best;
}

int cmd_calibrate(const Options& o) {
    const auto mp = manifest_path(o.config);
    const auto m = load_manifest(mp);
    if (m.spec.kind != DatasetKind::Detection) throw ConfigError("calibrate needs a detection manifest");
    EstimatorConfig ec = load_estimator_config(require_file(o.estimator, "estimator"));
    const auto entries = select(m, o.split);

    std::vector<std::vector<std::pair<double, int>>> scored(m.spec.windows.size());
    for (const auto* e : entries) {
        const auto tracks = load_tracks(mp.parent_path(), *e, m.spec, ec.band_hz);
        for (std::size_t wi = 0; wi < m.spec.windows.size(); ++wi) {
            scored[wi].emplace_back(presence_score(tracks, m.spec.windows[wi], ec), e->label);
        }
    }
    ec.presence_threshold.clear();
    for (std::size_t wi = 0; wi < m.spec.windows.size(); ++wi) {
        ec.presence_threshold[m.spec.windows[wi]] = best_threshold(scored[wi]);
        if (o.verbose) std::cerr << "window " << m.spec.windows[wi] << " s: threshold " << ec.presence_threshold[m.spec.windows[wi]] << "\n";
    }
    const fs::path out(o.out);
    fs::create_directories(out);
    const json cal{{"calibration_manifest_seed", m.spec.master_seed}, {"estimator", ec}};
    write_json(out / "estimator.json", json(ec), json_hash(cal));
    return 0;
}

// ---- fit-logistic --------------------------------------------------------

std::vector<std::pair<double, double>> read_points(const fs::path& p) {
    const auto text = read_text(p);
    std::vector<std::pair<double, double>> pts;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
        json j = parse_json_file(p);
        if (j.is_object()) {
            if (!j.contains("points")) throw ConfigError("expected {\"points\": [[t, a], ...]}");
            j = j["points"];
        }
        try {
            for (const auto& e : j) {
                if (e.is_object()) {
                    pts.emplace_back(e.at("t").get<double>(), e.at("accuracy").get<double>());
                } else {
                    pts.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
                }
            }
        } catch (const json::exception& e) {
            throw ConfigError(p.string() + ": " + e.what());
        }
        return pts;
    }
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double t, a;
        if (ls >> t >> a) pts.emplace_back(t, a);  // header lines do not parse
    }
    return pts;
}

int cmd_fit_logistic(const Options& o) {
    const auto pts = read_points(require_file(o.config, "config"));
    LogisticFit fit;
    try {
        fit = fit_logistic(pts);
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    json pj = json::array();
    for (const auto& [t, a] : pts) pj.push_back({t, a});
    const json res{{"l", fit.l}, {"k", fit.k}, {"t0", fit.t0}, {"rss", fit.rss}, {"degenerate", fit.degenerate}, {"constant_rss", constant_fit_rss(pts)}};
    const auto hash = json_hash(pj);
    const fs::path out(o.out);
    fs::create_directories(out);
    write_json(out / "fit.json", res, hash);
    std::string curve = "t,accuracy\n";
    double tmax = 0.0;
    for (const auto& p : pts) tmax = std::max(tmax, p.first);
    for (int i = 0; i <= 200; ++i) curve += fmt(tmax * i / 200.0) + "," + fmt(fit(tmax * i / 200.0)) + "\n";
    write_csv(out / "logistic.csv", curve, hash);
    std::cout << res.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Passive mmWave respiration sensing: simulation and processing pipeline"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool out = true) {
        sub->add_option("--config", o.config, "Input JSON (scenario, run config, dataset spec or manifest)");
        if (out) sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--seed", o.seed, "Seed override (also BREATHRADAR_SEED)");
        sub->add_flag("-v,--verbose", o.verbose, "Progress on stderr");
    };
    auto* synth = app.add_subcommand("synth", "Synthesize reference and surveillance captures");
    common(synth);
    auto* pipeline = app.add_subcommand("pipeline", "Synthesize and run clutter cancellation, CAF, CFAR and the estimator");
    common(pipeline);
    pipeline->add_option("--window", o.window, "Detection window, s");
    pipeline->add_option("--estimator", o.estimator, "Estimator config JSON");
    auto* dataset = app.add_subcommand("dataset", "Generate a labeled dataset");
    common(dataset);
    dataset->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    dataset->add_option("--distance", o.distance, "Closest receiver distance override, m")->check(CLI::PositiveNumber);
    auto* eval = app.add_subcommand("eval", "Evaluate the estimator over a dataset manifest");
    common(eval);
    eval->add_option("--window", o.window, "Window override, s");
    eval->add_option("--estimator", o.estimator, "Estimator config JSON");
    eval->add_option("--split", o.split, "all | train | test");
    auto* fit = app.add_subcommand("fit-logistic", "Fit a logistic accuracy-versus-time curve");
    common(fit);
    auto* cal = app.add_subcommand("calibrate", "Calibrate presence thresholds on a detection manifest");
    common(cal);
    cal->add_option("--estimator", o.estimator, "Base estimator config JSON");
    cal->add_option("--split", o.split, "all | train | test");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) return cmd_synth(o);
        if (*pipeline) return cmd_pipeline(o);
        if (*dataset) return cmd_dataset(o);
        if (*eval) return cmd_eval(o);
        if (*fit) return cmd_fit_logistic(o);
        if (*cal) return cmd_calibrate(o);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
