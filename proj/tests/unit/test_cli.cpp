#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "breathradar/dataset.hpp"
#include "breathradar/formats.hpp"
#include "breathradar/scenario_json.hpp"

using namespace breathradar;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path p = [] {
        auto d = fs::temp_directory_path() / ("br_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" CLI_PATH "' " + args + " >" + (workdir() / "stdout.txt").string() + " 2>" +
                            (workdir() / "stderr.txt").string();
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path put_json(const std::string& name, const json& j) {
    const auto p = workdir() / name;
    std::ofstream(p) << j.dump(2);
    return p;
}

json get_json(const fs::path& p) { return json::parse(read_text(p)); }

Scenario breathing_scene(double duration, bool target) {
    Scenario s;
    s.waveform.sample_rate = 125e3;
    s.duration = duration;
    s.tx_pos = {0, 0, 0};
    s.ref_rx_pos = {0.5, 0, 0};
    s.sur_rx_pos = {Vec3{0.19, 1.77, 0}, Vec3{-0.45, 1.46, 0}};
    if (target) s.target = BreathingTarget{{0, 2, 0}, 5e-3, 0.3};
    s.ref_attenuation = 10.0;
    s.noise_power = 1.0;
    return s;
}

// Thresholds for every window a small test dataset uses.
fs::path test_estimator() {
    EstimatorConfig ec;
    ec.presence_threshold = {{1.0, 5.0}, {2.0, 5.0}, {2.5, 5.0}, {5.0, 5.0}, {7.0, 5.0}, {10.0, 5.0}};
    return put_json("estimator.json", json(ec));
}

}  // namespace

TEST_CASE("usage and configuration errors exit with 2") {
    CHECK(run("--help") == 0);
    CHECK(run("") == 2);
    CHECK(run("nonsense") == 2);
    CHECK(run("synth --config /nonexistent/scenario.json --out " + (workdir() / "x").string()) == 2);
    CHECK(run("pipeline --config /nonexistent.json") == 2);
    CHECK(run("dataset --config /nonexistent.json") == 2);
    CHECK(run("eval --config /nonexistent/manifest.json") == 2);
    CHECK(run("fit-logistic --config /nonexistent.csv") == 2);
    const auto bad = workdir() / "bad.json";
    std::ofstream(bad) << "{ not json";
    CHECK(run("synth --config " + bad.string()) == 2);
    auto s = json(breathing_scene(1.0, true));
    s["duration"] = -1.0;
    CHECK(run("synth --config " + put_json("neg.json", s).string()) == 2);
    CHECK(run("synth --config " + put_json("ok.json", json(breathing_scene(0.1, true))).string() + " --seed 5", "BREATHRADAR_SEED=abc") == 0);
    CHECK(run("synth --config " + put_json("ok.json", json(breathing_scene(0.1, true))).string(), "BREATHRADAR_SEED=abc") == 2);
}

TEST_CASE("synth writes three PRIQ captures of header + 8 bytes per sample") {
    const auto out = workdir() / "synth";
    auto s = breathing_scene(0.01, true);
    s.waveform.sample_rate = 10e6;  // 10 ms at 10 MHz: 1e5 samples
    REQUIRE(run("synth --config " + put_json("s10m.json", json(s)).string() + " --out " + out.string()) == 0);
    for (const char* n : {"ref.priq", "sur1.priq", "sur2.priq"}) {
        CHECK(fs::file_size(out / n) == kPriqHeaderBytes + 8ull * 100000ull);
        CHECK(fs::exists(out / (std::string(n) + ".json")));
        CHECK(read_priq(out / n).sample_rate == 10e6);
    }
    const auto again = load_scenario(out / "scenario.json");
    CHECK(json(again) == json(s));
}

TEST_CASE("BREATHRADAR_SEED and --seed select the same waveform") {
    const auto cfg = put_json("seed.json", json(breathing_scene(0.05, true))).string();
    const auto a = workdir() / "seed_a", b = workdir() / "seed_b", c = workdir() / "seed_c";
    REQUIRE(run("synth --config " + cfg + " --seed 99 --out " + a.string()) == 0);
    REQUIRE(run("synth --config " + cfg + " --out " + b.string(), "BREATHRADAR_SEED=99") == 0);
    REQUIRE(run("synth --config " + cfg + " --out " + c.string()) == 0);
    CHECK(read_priq(a / "ref.priq").samples == read_priq(b / "ref.priq").samples);
    CHECK(read_priq(a / "ref.priq").samples != read_priq(c / "ref.priq").samples);
}

TEST_CASE("pipeline: breathing-only scene is present, empty scene is absent") {
    const auto est = std::string(ESTIMATOR_CONFIG);
    REQUIRE(fs::exists(est));
    const auto on = workdir() / "pipe_on", off = workdir() / "pipe_off";
    REQUIRE(run("pipeline --config " + put_json("on.json", json(breathing_scene(10.0, true))).string() + " --estimator " + est + " --out " + on.string()) == 0);
    REQUIRE(run("pipeline --config " + put_json("off.json", json(breathing_scene(10.0, false))).string() + " --estimator " + est + " --out " + off.string()) == 0);
    const auto ron = get_json(on / "results.json"), roff = get_json(off / "results.json");
    REQUIRE(ron.size() == 4);
    for (const auto& r : ron) {
        if (r["window_s"].get<double>() >= 5.0) CHECK(r["present"].get<bool>());
    }
    CHECK(ron.back()["window_s"] == 10.0);
    CHECK(ron.back()["count"] == 3);
    CHECK(ron.back()["truth"]["count"] == 3);
    for (const auto& r : roff) CHECK_FALSE(r["present"].get<bool>());

    // the saved spectrogram is the in-process map cast to float32
    const auto out = run_pipeline(synthesize_channels(breathing_scene(10.0, true)), ClutterCancelConfig{}, CafConfig{}, CfarConfig{});
    const auto psgm = read_psgm(on / "caf1.psgm");
    REQUIRE(psgm.rows == std::uint32_t(out.maps[0].rows));
    REQUIRE(psgm.cols == std::uint32_t(out.maps[0].cols));
    const auto back = psgm.complex_values();
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
        scale = std::max(scale, std::abs(out.maps[0].values[i]));
        worst = std::max(worst, std::abs(back[i] - out.maps[0].values[i]));
    }
    CHECK(worst <= 1e-6 * scale);
    const auto det = read_psgm(on / "cfar1.psgm");
    std::size_t differ = 0;
    for (std::size_t i = 0; i < det.data.size(); ++i) differ += det.data[i] != float(out.cfar[0].detections[i]);
    CHECK(differ <= det.data.size() / 10000);
    const auto side = get_json(on / "caf1.psgm.json");
    CHECK(side["doppler_bins"] == 1024);
    CHECK(side.contains("config_hash"));
}

TEST_CASE("pipeline refuses a window without a calibrated threshold") {
    EstimatorConfig ec;
    ec.presence_threshold = {{10.0, 1.0}};
    const auto est = put_json("only10.json", json(ec));
    CHECK(run("pipeline --config " + put_json("short.json", json(breathing_scene(1.0, true))).string() + " --window 0.5 --estimator " + est.string() +
              " --out " + (workdir() / "p").string()) == 2);
}

TEST_CASE("fit-logistic from CSV matches the library fit") {
    const auto csv = workdir() / "points.csv";
    std::ofstream(csv) << "t,accuracy\n2.5,0.61\n5,0.83\n7,0.93\n10,0.97\n";
    const auto out = workdir() / "fit";
    REQUIRE(run("fit-logistic --config " + csv.string() + " --out " + out.string()) == 0);
    const auto f = get_json(out / "fit.json");
    const std::vector<std::pair<double, double>> pts{{2.5, 0.61}, {5, 0.83}, {7, 0.93}, {10, 0.97}};
    const auto want = fit_logistic(pts);
    CHECK(f["l"].get<double>() == doctest::Approx(want.l));
    CHECK(f["k"].get<double>() == doctest::Approx(want.k));
    CHECK(f["t0"].get<double>() == doctest::Approx(want.t0));
    CHECK(f["rss"].get<double>() <= f["constant_rss"].get<double>());
    CHECK(fs::exists(out / "logistic.csv"));

    std::ofstream(workdir() / "two.csv") << "1,0.5\n2,0.6\n";
    CHECK(run("fit-logistic --config " + (workdir() / "two.csv").string() + " --out " + out.string()) == 2);
}

TEST_CASE("dataset, eval and calibrate over small manifests") {
    const auto est = test_estimator();

    DatasetSpec det;
    det.samples_per_class = 2;
    det.duration = 2.0;
    det.windows = {1.0, 2.0};
    det.folds = 2;
    det.store_iq = false;
    const auto dd = workdir() / "det";
    REQUIRE(run("dataset --config " + put_json("det.json", json(det)).string() + " --jobs 2 --out " + dd.string()) == 0);
    const auto m = load_manifest(dd / "manifest.json");
    CHECK(m.entries.size() == 4);
    CHECK(m.entries[0].iq_paths.empty());

    const auto ev = workdir() / "det_eval";
    REQUIRE(run("eval --config " + dd.string() + " --estimator " + est.string() + " --out " + ev.string()) == 0);
    const auto e = get_json(ev / "eval.json");
    CHECK(e["kind"] == "detection");
    CHECK(e["accuracy"].size() == 2);
    CHECK(get_json(ev / "records.json").size() == 8);
    CHECK(fs::exists(ev / "accuracy.csv"));

    const auto cal = workdir() / "cal";
    REQUIRE(run("calibrate --config " + (dd / "manifest.json").string() + " --estimator " + est.string() + " --out " + cal.string()) == 0);
    const auto ec = load_estimator_config(cal / "estimator.json");
    CHECK(ec.presence_threshold.size() == 2);
    CHECK(ec.presence_threshold.count(1.0) == 1);

    DatasetSpec cnt;
    cnt.kind = DatasetKind::Counting;
    cnt.samples_per_class = 1;
    cnt.duration = 2.0;
    cnt.windows = {2.0};
    cnt.store_iq = false;
    const auto cd = workdir() / "cnt";
    REQUIRE(run("dataset --config " + put_json("cnt.json", json(cnt)).string() + " --distance 0.6 --out " + cd.string()) == 0);
    CHECK(load_manifest(cd / "manifest.json").spec.closest_distance == 0.6);
    const auto cv = workdir() / "cnt_eval";
    REQUIRE(run("eval --config " + cd.string() + " --window 2 --estimator " + est.string() + " --out " + cv.string()) == 0);
    const auto c = get_json(cv / "eval.json");
    CHECK(c["kind"] == "counting");
    REQUIRE(c["confusion"].size() == 5);
    int total = 0;
    for (const auto& row : c["confusion"]) {
        CHECK(row.size() == 5);
        for (int v : row) total += v;
    }
    for (int v : c["undetected"]) total += v;
    CHECK(total == 5);
    CHECK(run("calibrate --config " + cd.string() + " --estimator " + est.string() + " --out " + cal.string()) == 2);

    // a manifest pointing at missing artifacts is a runtime failure
    fs::remove(cd / load_manifest(cd / "manifest.json").entries[0].spectrogram_paths[0]);
    CHECK(run("eval --config " + cd.string() + " --window 2 --estimator " + est.string() + " --out " + cv.string()) == 1);
}

TEST_CASE("cleanup") { fs::remove_all(workdir()); }
