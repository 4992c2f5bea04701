#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <unistd.h>

#include "breathradar/dataset.hpp"
#include "breathradar/formats.hpp"

using namespace breathradar;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("br_dataset_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

DatasetSpec small_spec(DatasetKind kind) {
    DatasetSpec s;
    s.kind = kind;
    s.samples_per_class = 3;
    s.duration = 2.0;
    s.windows = {1.0, 2.0};
    s.classes = {2, 4};
    s.folds = 3;
    s.master_seed = 77;
    return s;
}

std::string bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

double off_dc_energy(const DopplerMap& m) {
    double e = 0;
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            if (std::abs(m.doppler_axis[std::size_t(c)]) > 1.0) e += std::norm(m.at(r, c));
        }
    }
    return e;
}

}  // namespace

TEST_CASE("default layouts: 200 per class, 80/20 split, 5 folds") {
    DatasetSpec det;
    const auto d = plan_manifest(det);
    CHECK(d.entries.size() == 400);
    std::map<int, int> per_label;
    std::map<int, int> per_fold;
    int train = 0;
    for (const auto& e : d.entries) {
        ++per_label[e.label];
        ++per_fold[e.fold];
        train += e.split == "train";
    }
    CHECK(per_label == std::map<int, int>{{0, 200}, {1, 200}});
    CHECK(train == 320);
    for (const auto& [f, n] : per_fold) CHECK(n == 80);
    CHECK(per_fold.size() == 5);

    DatasetSpec cnt;
    cnt.kind = DatasetKind::Counting;
    const auto c = plan_manifest(cnt);
    CHECK(c.entries.size() == 1000);
    std::map<int, int> per_class, train_per_class;
    for (const auto& e : c.entries) {
        ++per_class[e.label];
        train_per_class[e.label] += e.split == "train";
    }
    CHECK(per_class == std::map<int, int>{{2, 200}, {3, 200}, {4, 200}, {5, 200}, {6, 200}});
    for (const auto& [k, n] : train_per_class) CHECK(n == 160);
}

TEST_CASE("entry ids and seeds are unique, folds partition the data") {
    DatasetSpec cnt;
    cnt.kind = DatasetKind::Counting;
    const auto m = plan_manifest(cnt);
    std::set<std::string> ids;
    std::set<std::uint64_t> seeds;
    for (const auto& e : m.entries) {
        ids.insert(e.id);
        seeds.insert(e.seed);
    }
    CHECK(ids.size() == m.entries.size());
    CHECK(seeds.size() == m.entries.size());

    std::multiset<std::string> tested;
    for (int f = 0; f < m.spec.folds; ++f) {
        const auto [tr, te] = kfold(m, f);
        CHECK(tr.size() + te.size() == m.entries.size());
        CHECK(te.size() == 200);
        std::set<std::string> a(tr.begin(), tr.end());
        for (const auto& id : te) CHECK(a.count(id) == 0);
        tested.insert(te.begin(), te.end());
    }
    CHECK(tested.size() == m.entries.size());
    CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == m.entries.size());
    CHECK_THROWS_AS(kfold(m, 5), InputError);
    CHECK_THROWS_AS(kfold(m, -1), InputError);
}

TEST_CASE("split depends on the master seed only") {
    DatasetSpec a;
    auto b = a;
    b.closest_distance = 1.2;
    const auto ma = plan_manifest(a), mb = plan_manifest(b);
    for (std::size_t i = 0; i < ma.entries.size(); ++i) CHECK(ma.entries[i].split == mb.entries[i].split);
    b.master_seed = 2;
    const auto mc = plan_manifest(b);
    int differ = 0;
    for (std::size_t i = 0; i < ma.entries.size(); ++i) differ += ma.entries[i].split != mc.entries[i].split;
    CHECK(differ > 0);
}

TEST_CASE("randomized scenarios respect the layout") {
    DatasetSpec cnt;
    cnt.kind = DatasetKind::Counting;
    cnt.closest_distance = 0.6;
    for (int cls : cnt.classes) {
        for (int i = 0; i < 10; ++i) {
            const auto s = make_scenario(cnt, cls, entry_seed(cnt, cls, i));
            REQUIRE(s.target);
            CHECK(std::abs(s.target->rate - cls / 10.0) <= 0.01);
            CHECK(s.target->amplitude >= 3e-3);
            CHECK(s.target->amplitude <= 8e-3);
            CHECK(distance(s.tx_pos, s.target->position) == doctest::Approx(2.0));
            const double d1 = distance(s.sur_rx_pos[0], s.target->position);
            const double d2 = distance(s.sur_rx_pos[1], s.target->position);
            CHECK(std::min(d1, d2) == doctest::Approx(0.6));
            CHECK(std::max(d1, d2) == doctest::Approx(1.0));
            for (const auto& ch : s.clutter) {
                CHECK(ch.size() >= 3);
                CHECK(ch.size() <= 8);
            }
            REQUIRE(s.interferer);
            for (double t = 0; t <= s.duration; t += 0.05) {
                const auto p = s.interferer->position_at(t);
                CHECK(distance(p, s.target->position) >= 0.2 - 1e-9);
                CHECK(std::abs(p.x) <= 2.0 + 1e-9);
            }
        }
    }
    DatasetSpec det;
    for (int i = 0; i < 10; ++i) {
        const auto pos = make_scenario(det, 1, entry_seed(det, 1, i));
        REQUIRE(pos.target);
        CHECK(pos.target->rate >= 0.2);
        CHECK(pos.target->rate <= 0.6);
        CHECK_FALSE(make_scenario(det, 0, entry_seed(det, 0, i)).target);
    }
    CHECK(make_scenario(det, 1, 5).target->rate == make_scenario(det, 1, 5).target->rate);
}

TEST_CASE("realism guard: interferer out-powers the target off zero Doppler") {
    auto spec = small_spec(DatasetKind::Detection);
    for (int i = 0; i < 3; ++i) {
        auto s = make_scenario(spec, 1, entry_seed(spec, 1, i));
        const double db = enforce_realism(s, spec.caf, 10.0);
        CHECK(db >= 10.0);
        // measure on the CAF of noiseless, clutter-free single-scatterer scenes
        s.noise_power = 0;
        s.clutter = {};
        auto only_target = s, only_walker = s;
        only_target.interferer.reset();
        only_walker.target.reset();
        for (int ch = 0; ch < 2; ++ch) {
            const auto a = synthesize_channels(only_target), b = synthesize_channels(only_walker);
            const double et = off_dc_energy(caf_map(a.ref, a.sur[std::size_t(ch)], std::nullopt, spec.caf));
            const double ew = off_dc_energy(caf_map(b.ref, b.sur[std::size_t(ch)], std::nullopt, spec.caf));
            CHECK(10 * std::log10(ew / et) >= 10.0);
        }
    }
}

TEST_CASE("generation writes every artifact and a reloadable manifest") {
    const auto dir = tmpdir("gen");
    const auto spec = small_spec(DatasetKind::Counting);
    const auto m = generate(spec, dir, 1);
    CHECK(m.entries.size() == 6);
    CHECK_FALSE(fs::exists(dir / kPartialMarker));
    CHECK(fs::exists(dir / "manifest.json.json"));
    const auto back = load_manifest(dir / "manifest.json");
    REQUIRE(back.entries.size() == m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        const auto& e = back.entries[i];
        CHECK(e.id == m.entries[i].id);
        CHECK(e.seed == m.entries[i].seed);
        CHECK(e.realism_db >= 10.0);
        CHECK(e.iq_paths.size() == 3);
        for (const auto& p : e.iq_paths) {
            CHECK(fs::file_size(dir / p) == kPriqHeaderBytes + 8 * 250000);
            CHECK(fs::exists(dir / (p + ".json")));
        }
        REQUIRE(e.spectrogram_paths.size() == 2);
        const auto psgm = read_psgm(dir / e.spectrogram_paths[0]);
        CHECK(psgm.kind == PsgmKind::Complex);
        CHECK(psgm.rows == 20);
        CHECK(psgm.cols == 1024);
        CHECK(e.cfar_paths.size() == 2);
        CHECK(fs::exists(dir / e.scenario_path));
        const auto tracks = load_tracks(dir, e, back.spec, 20.0);
        CHECK(tracks[0].samples.size() == 20);
    }
    fs::remove_all(dir);
}

TEST_CASE("regeneration is byte-identical and independent of thread count") {
    const auto a = tmpdir("a"), b = tmpdir("b");
    auto spec = small_spec(DatasetKind::Detection);
    spec.samples_per_class = 2;
    spec.store_iq = false;
    generate(spec, a, 1);
    generate(spec, b, 3);
    std::size_t files = 0;
    for (const auto& f : fs::recursive_directory_iterator(a)) {
        if (!f.is_regular_file()) continue;
        const auto rel = fs::relative(f.path(), a);
        REQUIRE(fs::exists(b / rel));
        CHECK(bytes_of(f.path()) == bytes_of(b / rel));
        ++files;
    }
    CHECK(files > 10);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("failed generation leaves the PARTIAL marker and no manifest") {
    const auto dir = tmpdir("partial");
    auto spec = small_spec(DatasetKind::Detection);
    spec.samples_per_class = 1;
    const auto plan = plan_manifest(spec);
    fs::create_directories(dir / "entries");
    std::ofstream(dir / "entries" / plan.entries.back().id) << "blocker";
    CHECK_THROWS(generate(spec, dir, 1));
    CHECK(fs::exists(dir / kPartialMarker));
    CHECK_FALSE(fs::exists(dir / "manifest.json"));
    fs::remove_all(dir);
}

TEST_CASE("spec validation and JSON round trip") {
    DatasetSpec s;
    s.split = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.windows = {12.0};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.kind = DatasetKind::Counting;
    s.classes = {2, 2};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.sample_rate = 123e3;  // CIT is not a whole number of samples
    CHECK_THROWS_AS(s.validate(), ConfigError);

    s = small_spec(DatasetKind::Counting);
    const nlohmann::json j = s;
    const auto back = j.get<DatasetSpec>();
    CHECK(nlohmann::json(back) == j);
    CHECK_THROWS_AS(nlohmann::json({{"kind", "other"}}).get<DatasetSpec>(), ConfigError);
}
