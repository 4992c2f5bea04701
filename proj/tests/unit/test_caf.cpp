#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "breathradar/caf.hpp"
#include "breathradar/rng.hpp"
#include "breathradar/synth.hpp"

using namespace breathradar;

namespace {

std::vector<cplx> noise(std::size_t n, std::uint64_t seed) {
    Rng r(seed);
    std::vector<cplx> v(n);
    for (auto& x : v) x = r.complex_normal(1.0);
    return v;
}

}  // namespace

TEST_CASE("doppler axis") {
    const auto ax = doppler_axis(1024, 0.1);
    CHECK(ax.size() == 1024);
    CHECK(ax[0] == doctest::Approx(-5120.0));
    CHECK(ax[512] == 0.0);
    CHECK(ax[1023] == doctest::Approx(5110.0));
    CHECK(doppler_axis(4, 0.5) == std::vector<double>{-4.0, -2.0, 0.0, 2.0});
}

TEST_CASE("CAF row equals the direct sum at every bin") {
    const double fs = 20e3;
    CafConfig cfg;
    cfg.cit = 0.1;
    cfg.doppler_bins = 64;
    cfg.delay_search = 3;
    const std::size_t n = 2000;
    const auto ref = noise(n, 1);
    auto y = noise(n, 2);
    for (std::size_t i = 2; i < n; ++i) y[i] += 3.0 * ref[i - 2] * std::polar(1.0, 2 * kPi * 30.0 * double(i) / fs);
    const auto row = caf_single_cit(y, ref, fs, cfg);
    REQUIRE(row.row.size() == 64);

    const auto ax = doppler_axis(cfg.doppler_bins, cfg.cit);
    double scale = 0.0;
    std::vector<cplx> want(64);
    for (int k = 0; k < 64; ++k) {
        double best = -1.0;
        for (int tau = 0; tau <= cfg.delay_search; ++tau) {
            cplx acc{};
            for (std::size_t i = 0; i < n; ++i) {
                const cplx r = i >= std::size_t(tau) ? ref[i - std::size_t(tau)] : cplx{};
                acc += y[i] * std::conj(r) * std::polar(1.0, -2 * kPi * ax[std::size_t(k)] * double(i) / fs);
            }
            if (std::abs(acc) > best) {
                best = std::abs(acc);
                want[std::size_t(k)] = acc;
            }
        }
        scale = std::max(scale, best);
    }
    for (int k = 0; k < 64; ++k) CHECK(std::abs(row.row[std::size_t(k)] - want[std::size_t(k)]) <= 1e-9 * scale);
    const int peak = int(std::max_element(row.row.begin(), row.row.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); }) - row.row.begin());
    CHECK(ax[std::size_t(peak)] == doctest::Approx(30.0));
    CHECK(row.peak_delay == 2);
}

TEST_CASE("CAF input errors") {
    CafConfig cfg;
    const auto a = noise(12500, 1);
    CHECK_THROWS_AS(caf_single_cit(a, std::span<const cplx>(a).first(100), 125e3, cfg), InputError);
    CHECK_THROWS_AS(caf_single_cit(a, a, 100e3, cfg), InputError);
    cfg.doppler_bins = 20000;
    CHECK_THROWS_AS(caf_single_cit(a, a, 125e3, cfg), ConfigError);
    cfg = {};
    cfg.cit = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    IQBuffer short_buf{125e3, noise(100, 3)};
    CHECK_THROWS_AS(cit_count(short_buf, CafConfig{}), InputError);
}

TEST_CASE("map shape, trailing partial CIT dropped, time axis at CIT centres") {
    IQBuffer ref{125e3, noise(12500 * 3 + 777, 4)}, sur{125e3, noise(12500 * 3 + 777, 5)};
    const CafConfig cfg;
    CHECK(cit_count(ref, cfg) == 3);
    const auto m = caf_map(ref, sur, ClutterCancelConfig{}, cfg, 2);
    CHECK(m.rows == 3);
    CHECK(m.cols == 1024);
    CHECK(m.channel_id == 2);
    REQUIRE(m.time_axis.size() == 3);
    CHECK(m.time_axis[0] == doctest::Approx(0.05));
    CHECK(m.time_axis[1] == doctest::Approx(0.15));
    CHECK(m.time_axis[2] == doctest::Approx(0.25));
    const auto both = caf_maps(ref, {sur, sur}, ClutterCancelConfig{}, cfg);
    CHECK(both[0].values == m.values);
    CHECK(both[1].channel_id == 2);
}

TEST_CASE("CFO common to both channels leaves |map| unchanged") {
    Scenario s;
    s.waveform.sample_rate = 125e3;
    s.duration = 0.3;
    s.tx_pos = {0, 0, 0};
    s.ref_rx_pos = {0.5, 0, 0};
    s.sur_rx_pos = {Vec3{0.3, 1.8, 0}, Vec3{-0.5, 1.6, 0}};
    s.target = BreathingTarget{{0, 2, 0}};
    Interferer it;
    it.waypoints = {{0.0, {1, 1, 0}}, {1.0, {0, 2.5, 0}}};
    s.interferer = it;
    s.clutter[0] = {{{3.0, 1.0}, 1.3 / 125e3}};
    s.noise_power = 0.5;
    const auto a = synthesize_channels(s);
    s.cfo = 10e3;
    const auto b = synthesize_channels(s);
    const CafConfig cfg;
    for (const auto& cc : {std::optional<ClutterCancelConfig>{}, std::optional<ClutterCancelConfig>{ClutterCancelConfig{}}}) {
        const auto ma = caf_map(a.ref, a.sur[0], cc, cfg), mb = caf_map(b.ref, b.sur[0], cc, cfg);
        double scale = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < ma.values.size(); ++i) {
            scale = std::max(scale, std::abs(ma.values[i]));
            worst = std::max(worst, std::abs(std::abs(ma.values[i]) - std::abs(mb.values[i])));
        }
        CHECK(worst <= 1e-9 * scale);
    }
}
