#include "breathradar/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "breathradar/fft.hpp"

namespace breathradar {

double EstimatorConfig::threshold_for(double window) const {
    for (const auto& [w, th] : presence_threshold) {
        if (std::abs(w - window) < 1e-9) return th;
    }
    throw ConfigError("no presence threshold for window " + std::to_string(window) + " s");
}

SlowTimeTrack extract_track(const DopplerMap& map, double band_hz) {
    if (map.rows < 1 || map.cols < 2 || map.doppler_axis.size() != std::size_t(map.cols) ||
        map.values.size() != std::size_t(map.rows) * std::size_t(map.cols)) {
        throw InputError("extract_track: malformed DopplerMap");
    }
    const double spacing = map.doppler_axis[1] - map.doppler_axis[0];
    if (!(band_hz >= spacing * (1.0 - 1e-9))) throw ConfigError("extract_track: band narrower than one Doppler bin");

    std::vector<int> bins;
    for (int c = 0; c < map.cols; ++c) {
        const double f = map.doppler_axis[std::size_t(c)];
        if (f != 0.0 && std::abs(f) <= band_hz * (1.0 + 1e-12)) bins.push_back(c);
    }
    if (bins.empty()) throw ConfigError("extract_track: empty band");

    SlowTimeTrack track;
    track.rate = spacing;  // bin spacing is 1/cit, the CIT rate
    track.samples.resize(std::size_t(map.rows));
    track.band_power.resize(std::size_t(map.rows));
    track.floor_power.resize(std::size_t(map.rows));
    track.band_bins = int(bins.size());
    std::vector<double> cells(std::size_t(map.cols));
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) cells[std::size_t(c)] = std::norm(map.at(r, c));
        auto mid = cells.begin() + std::ptrdiff_t(cells.size() / 2);
        std::nth_element(cells.begin(), mid, cells.end());
        track.floor_power[std::size_t(r)] = *mid;
        double num = 0.0, den = 0.0;
        for (int c : bins) {
            const double p = std::norm(map.at(r, c));
            num += p * map.doppler_axis[std::size_t(c)];
            den += p;
        }
        track.samples[std::size_t(r)] = den > 0 ? num / den : 0.0;
        track.band_power[std::size_t(r)] = den;
    }
    return track;
}

double SlowTimeSpectrum::median_in(double lo, double hi) const {
    std::vector<double> v;
    for (std::size_t i = 0; i < freq.size(); ++i) {
        if (freq[i] >= lo && freq[i] <= hi) v.push_back(power[i]);
    }
    if (v.empty()) return 0.0;
    auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

int SlowTimeSpectrum::argmax_in(double lo, double hi) const {
    int best = -1;
    for (std::size_t i = 0; i < freq.size(); ++i) {
        if (freq[i] < lo || freq[i] > hi) continue;
        if (best < 0 || power[i] > power[std::size_t(best)]) best = int(i);
    }
    return best;
}

SlowTimeSpectrum slow_time_spectrum(std::span<const double> x, double rate, bool hann) {
    const std::size_t n = x.size();
    if (n < 2) throw InputError("slow-time spectrum needs at least two samples");
    if (!(rate > 0)) throw InputError("slow-time rate must be positive");

    // least-squares line through (i, x[i])
    const double nn = double(n);
    const double mean_i = (nn - 1.0) / 2.0;
    double mean_x = 0.0;
    for (double v : x) mean_x += v;
    mean_x /= nn;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double di = double(i) - mean_i;
        sxy += di * (x[i] - mean_x);
        sxx += di * di;
    }
    const double slope = sxx > 0 ? sxy / sxx : 0.0;

    std::size_t nfft = 4096;
    while (nfft < 8 * n) nfft *= 2;
    std::vector<cplx> buf(nfft, cplx{}), spec(nfft);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = hann ? 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(n - 1)) : 1.0;
        buf[i] = w * (x[i] - mean_x - slope * (double(i) - mean_i));
    }
    fft::forward(buf, spec);

    SlowTimeSpectrum s;
    s.freq.resize(nfft / 2 + 1);
    s.power.resize(nfft / 2 + 1);
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
        s.freq[k] = double(k) * rate / double(nfft);
        s.power[k] = std::norm(spec[k]);
    }
    return s;
}

std::span<const double> tail(const SlowTimeTrack& t, double window) {
    if (!(window > 0)) throw InputError("window must be positive");
    const double want = window * t.rate;
    const auto n = static_cast<std::size_t>(std::llround(want));
    if (std::abs(want - double(n)) > 1e-6 * std::max(1.0, want)) throw InputError("window is not a whole number of CITs");
    if (n > t.samples.size()) throw InputError("track shorter than window");
    return std::span<const double>(t.samples).subspan(t.samples.size() - n);
}

std::vector<double> gated_tail(const SlowTimeTrack& t, double window, double gate, double floor_gate, double max_hz) {
    const auto raw = tail(t, window);
    std::vector<double> x(raw.begin(), raw.end());
    if (max_hz > 0) {
        for (auto& v : x) {
            if (std::abs(v) > max_hz) v = 0.0;
        }
    }
    if (t.band_power.size() != t.samples.size()) return x;
    const auto p = std::span<const double>(t.band_power).subspan(t.band_power.size() - x.size());
    if (floor_gate > 0 && t.floor_power.size() == t.samples.size() && t.band_bins > 0) {
        const auto fl = std::span<const double>(t.floor_power).subspan(t.floor_power.size() - x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (p[i] < floor_gate * fl[i] * t.band_bins) x[i] = 0.0;
        }
    }
    std::vector<double> out = x;
    if (!(gate > 0)) return out;

    std::vector<double> sorted(p.begin(), p.end());
    auto mid = sorted.begin() + std::ptrdiff_t(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    const double limit = gate * *mid;
    if (!(limit > 0)) return out;

    std::vector<std::size_t> good;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= limit) good.push_back(i);
    }
    if (good.empty() || good.size() == p.size()) return out;
    std::size_t g = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        while (g + 1 < good.size() && good[g + 1] <= i) ++g;
        if (p[i] <= limit) continue;
        if (i < good.front()) {
            out[i] = x[good.front()];
        } else if (g + 1 >= good.size()) {
            out[i] = x[good.back()];
        } else {
            const std::size_t a = good[g], b = good[g + 1];
            out[i] = x[a] + (x[b] - x[a]) * double(i - a) / double(b - a);
        }
    }
    return out;
}

double active_fraction(const SlowTimeTrack& t, double window, double floor_gate, double max_hz) {
    const auto n = tail(t, window).size();
    const bool powers = t.band_power.size() == t.samples.size() && t.floor_power.size() == t.samples.size() && t.band_bins > 0;
    if (!(floor_gate > 0 && powers) && !(max_hz > 0)) return 1.0;
    std::size_t active = 0;
    for (std::size_t i = t.samples.size() - n; i < t.samples.size(); ++i) {
        const bool loud = !(floor_gate > 0 && powers) || t.band_power[i] >= floor_gate * t.floor_power[i] * t.band_bins;
        const bool slow = !(max_hz > 0) || std::abs(t.samples[i]) <= max_hz;
        active += loud && slow ? 1 : 0;
    }
    return double(active) / double(n);
}

namespace {

double channel_score(const SlowTimeTrack& t, double window, const EstimatorConfig& cfg) {
    if (active_fraction(t, window, cfg.floor_gate, cfg.active_max_hz) < cfg.min_active) return 0.0;
    const auto x = gated_tail(t, window, cfg.gate, cfg.floor_gate, cfg.clip_hz);
    const auto spec = slow_time_spectrum(x, t.rate, true);
    const int k = spec.argmax_in(cfg.breath_lo, cfg.breath_hi);
    const double med = spec.median_in(cfg.floor_lo, cfg.floor_hi);
    if (k < 0 || !(med > 0)) return 0.0;
    return spec.power[std::size_t(k)] / med;
}

}  // namespace

double presence_score(const std::array<SlowTimeTrack, 2>& tracks, double window, const EstimatorConfig& cfg) {
    return std::max(channel_score(tracks[0], window, cfg), channel_score(tracks[1], window, cfg));
}

PresenceResult detect_presence(const std::array<SlowTimeTrack, 2>& tracks, double window, const EstimatorConfig& cfg) {
    const double th = cfg.threshold_for(window);
    const double score = presence_score(tracks, window, cfg);
    return {score > th, score};
}

std::vector<double> sinusoid_amplitude(std::span<const double> x, double rate, std::span<const double> freqs) {
    const std::size_t n = x.size();
    if (n < 4) throw InputError("sinusoid fit needs at least four samples");
    if (!(rate > 0)) throw InputError("slow-time rate must be positive");

    // Orthonormal basis of {1, t}, used to strip the trend from x and from
    // the trial sinusoids.
    const double mid = (double(n) - 1.0) / 2.0;
    std::vector<double> u0(n, 1.0 / std::sqrt(double(n))), u1(n);
    double norm1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        u1[i] = double(i) - mid;
        norm1 += u1[i] * u1[i];
    }
    for (auto& v : u1) v /= std::sqrt(norm1);
    auto detrend = [&](std::vector<double>& v) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            a += u0[i] * v[i];
            b += u1[i] * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) v[i] -= a * u0[i] + b * u1[i];
    };

    std::vector<double> xd(x.begin(), x.end());
    detrend(xd);
    std::vector<double> out;
    out.reserve(freqs.size());
    std::vector<double> c(n), s(n);
    for (double f : freqs) {
        const double w = 2.0 * kPi * f / rate;
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = std::cos(w * double(i));
            s[i] = std::sin(w * double(i));
        }
        detrend(c);
        detrend(s);
        double cc = 0, ss = 0, cs = 0, cx = 0, sx = 0;
        for (std::size_t i = 0; i < n; ++i) {
            cc += c[i] * c[i];
            ss += s[i] * s[i];
            cs += c[i] * s[i];
            cx += c[i] * xd[i];
            sx += s[i] * xd[i];
        }
        const double det = cc * ss - cs * cs;
        double explained = 0.0;
        if (det > 1e-12 * (cc * ss) && det > 0) {
            const double a = (ss * cx - cs * sx) / det;
            const double b = (cc * sx - cs * cx) / det;
            explained = std::max(0.0, a * cx + b * sx);
        } else if (cc + ss > 0) {
            explained = (cx * cx + sx * sx) / (cc + ss);
        }
        out.push_back(std::sqrt(explained));
    }
    return out;
}

double estimate_breathing_rate(const std::array<SlowTimeTrack, 2>& tracks, double window, const EstimatorConfig& cfg) {
    if (!(cfg.count_grid > 0) || !(cfg.count_lo > 0) || !(cfg.count_hi > cfg.count_lo)) {
        throw ConfigError("counting band/grid invalid");
    }
    const double lo = std::min(cfg.count_lo, cfg.floor_lo), hi = std::max(cfg.count_hi, cfg.floor_hi);
    std::vector<double> grid;
    for (double f = lo; f <= hi + 1e-12; f += cfg.count_grid) grid.push_back(f);

    const std::array<std::vector<double>, 2> x{gated_tail(tracks[0], window, cfg.gate),
                                             gated_tail(tracks[1], window, cfg.gate)};
    std::array<double, 2> med{0.0, 0.0};
    std::vector<double> avg(grid.size(), 0.0);
    for (int c = 0; c < 2; ++c) {
        const auto amp = sinusoid_amplitude(x[std::size_t(c)], tracks[std::size_t(c)].rate, grid);
        med[std::size_t(c)] = SlowTimeSpectrum{grid, amp}.median_in(cfg.floor_lo, cfg.floor_hi);
        if (!(med[std::size_t(c)] > 0)) continue;
        for (std::size_t i = 0; i < grid.size(); ++i) avg[i] += amp[i] / med[std::size_t(c)];
    }
    if (!(med[0] > 0) && !(med[1] > 0)) throw NoRespirationDetected("no respiration detected: flat slow-time signal");

    // Same normalization at an arbitrary frequency, for the refinement.
    auto eval = [&](double f) {
        double v = 0.0;
        for (int c = 0; c < 2; ++c) {
            if (!(med[std::size_t(c)] > 0)) continue;
            const double one[1] = {f};
            v += sinusoid_amplitude(x[std::size_t(c)], tracks[std::size_t(c)].rate, one)[0] / med[std::size_t(c)];
        }
        return v;
    };

    const SlowTimeSpectrum s{grid, avg};
    const int k = s.argmax_in(cfg.count_lo, cfg.count_hi);
    if (k < 0) throw NoRespirationDetected("no respiration detected: search band empty");
    const double floor = s.median_in(cfg.floor_lo, cfg.floor_hi);
    if (!(avg[std::size_t(k)] > cfg.count_floor * floor)) {
        throw NoRespirationDetected("no respiration detected: no spectral line above the noise floor");
    }

    const double df = cfg.count_grid;
    double f0 = grid[std::size_t(k)];
    if (k > 0 && std::size_t(k) + 1 < avg.size()) {
        const double a = avg[std::size_t(k) - 1], b = avg[std::size_t(k)], c = avg[std::size_t(k) + 1];
        const double den = a - 2.0 * b + c;
        if (den < 0) f0 += std::clamp(0.5 * (a - c) / den, -0.5, 0.5) * df;
    }
    // golden-section search on [f0 - df, f0 + df]
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::max(f0 - df, cfg.count_lo), b = std::min(f0 + df, cfg.count_hi);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = eval(c), fd = eval(d);
    for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d);
        }
    }
    const double best = 0.5 * (a + b);
    return eval(best) >= eval(f0) ? best : f0;
}

int count_respirations(const std::array<SlowTimeTrack, 2>& tracks, double window, const EstimatorConfig& cfg) {
    const double f = estimate_breathing_rate(tracks, window, cfg);
    return int(std::max(0L, std::lround(f * window)));
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
    if (pred.size() != truth.size()) throw InputError("accuracy: prediction/truth length mismatch");
    if (pred.empty()) throw InputError("accuracy: no labels");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
    return double(hits) / double(pred.size());
}

double LogisticFit::operator()(double t) const { return l / (1.0 + std::exp(-k * (t - t0))); }

double constant_fit_rss(std::span<const std::pair<double, double>> points) {
    if (points.empty()) return 0.0;
    double mean = 0.0;
    for (const auto& p : points) mean += p.second;
    mean /= double(points.size());
    double rss = 0.0;
    for (const auto& p : points) rss += (p.second - mean) * (p.second - mean);
    return rss;
}

namespace {

constexpr double kMinL = 1e-12;

struct Profiled {
    double l, rss;
};

// For fixed (k, t0) the model is linear in l; solve for it in closed form
// and clamp to (0, 1].
Profiled profile(std::span<const std::pair<double, double>> pts, double k, double t0) {
    double sg = 0.0, sag = 0.0;
    for (const auto& [t, a] : pts) {
        const double g = 1.0 / (1.0 + std::exp(-k * (t - t0)));
        sg += g * g;
        sag += a * g;
    }
    const double l = std::clamp(sg > 0 ? sag / sg : 1.0, kMinL, 1.0);
    double rss = 0.0;
    for (const auto& [t, a] : pts) {
        const double r = a - l / (1.0 + std::exp(-k * (t - t0)));
        rss += r * r;
    }
    return {l, rss};
}

struct Bounds {
    double lo[2], hi[2];
};

// Nelder-Mead over (log k, t0) with coordinates clamped to the box.
std::array<double, 2> nelder_mead(std::span<const std::pair<double, double>> pts, std::array<double, 2> start,
                                  const Bounds& b) {
    auto clampv = [&](std::array<double, 2> v) {
        for (int i = 0; i < 2; ++i) v[std::size_t(i)] = std::clamp(v[std::size_t(i)], b.lo[i], b.hi[i]);
        return v;
    };
    auto f = [&](const std::array<double, 2>& v) { return profile(pts, std::exp(v[0]), v[1]).rss; };

    std::array<std::array<double, 2>, 3> s{start, start, start};
    s[1][0] += 0.25 * (b.hi[0] - b.lo[0]) / 10.0;
    s[2][1] += 0.25 * (b.hi[1] - b.lo[1]) / 10.0;
    for (auto& v : s) v = clampv(v);
    std::array<double, 3> fv{f(s[0]), f(s[1]), f(s[2])};

    for (int iter = 0; iter < 2000; ++iter) {
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int c) { return fv[std::size_t(a)] < fv[std::size_t(c)]; });
        const auto best = s[std::size_t(idx[0])], mid = s[std::size_t(idx[1])], worst = s[std::size_t(idx[2])];
        const double fb = fv[std::size_t(idx[0])], fm = fv[std::size_t(idx[1])], fw = fv[std::size_t(idx[2])];
        const double size = std::max(std::abs(worst[0] - best[0]) + std::abs(mid[0] - best[0]),
                                     std::abs(worst[1] - best[1]) + std::abs(mid[1] - best[1]));
        if (size < 1e-12 || std::abs(fw - fb) < 1e-18) break;

        const std::array<double, 2> c{0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
        auto along = [&](double t) { return clampv({c[0] + t * (worst[0] - c[0]), c[1] + t * (worst[1] - c[1])}); };
        const auto xr = along(-1.0);
        const double fr = f(xr);
        auto replace = [&](const std::array<double, 2>& v, double fvv) {
            s[std::size_t(idx[2])] = v;
            fv[std::size_t(idx[2])] = fvv;
        };
        if (fr < fb) {
            const auto xe = along(-2.0);
            const double fe = f(xe);
            fe < fr ? replace(xe, fe) : replace(xr, fr);
        } else if (fr < fm) {
            replace(xr, fr);
        } else {
            const auto xc = fr < fw ? along(-0.5) : along(0.5);
            const double fc = f(xc);
            if (fc < std::min(fr, fw)) {
                replace(xc, fc);
            } else {
                for (int i : {idx[1], idx[2]}) {
                    auto& v = s[std::size_t(i)];
                    v = clampv({best[0] + 0.5 * (v[0] - best[0]), best[1] + 0.5 * (v[1] - best[1])});
                    fv[std::size_t(i)] = f(v);
                }
            }
        }
    }
    const auto it = std::min_element(fv.begin(), fv.end());
    return s[std::size_t(it - fv.begin())];
}

}  // namespace

LogisticFit fit_logistic(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw InputError("fit_logistic needs at least three points");
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (const auto& [t, a] : points) {
        if (!std::isfinite(t) || !std::isfinite(a)) throw InputError("fit_logistic: non-finite point");
        tmin = std::min(tmin, t);
        tmax = std::max(tmax, t);
    }
    {
        std::vector<double> ts;
        for (const auto& p : points) ts.push_back(p.first);
        std::sort(ts.begin(), ts.end());
        if (std::adjacent_find(ts.begin(), ts.end()) != ts.end()) throw InputError("fit_logistic: times must be distinct");
    }
    const double span = tmax - tmin;

    // Constant candidate: k at its floor and t0 pushed left until the
    // sigmoid is saturated over the data, leaving l as the level.
    double mean = 0.0;
    bool all_equal = true;
    for (const auto& p : points) {
        mean += p.second;
        all_equal = all_equal && p.second == points.front().second;
    }
    mean /= double(points.size());
    LogisticFit flat;
    flat.k = kLogisticMinK;
    flat.t0 = tmin - 40.0 / kLogisticMinK;
    flat.l = std::clamp(mean, kMinL, 1.0);
    flat.rss = 0.0;
    for (const auto& [t, a] : points) flat.rss += (a - flat(t)) * (a - flat(t));
    if (all_equal) {
        flat.degenerate = true;
        return flat;
    }

    const Bounds b{{std::log(kLogisticMinK), tmin - 2.0 * span}, {std::log(kLogisticMaxK), tmax + 2.0 * span}};
    struct Cand {
        double rss;
        std::array<double, 2> x;
    };
    std::vector<Cand> grid;
    constexpr int kGrid = 24;
    for (int i = 0; i <= kGrid; ++i) {
        for (int j = 0; j <= kGrid; ++j) {
            const std::array<double, 2> x{b.lo[0] + (b.hi[0] - b.lo[0]) * i / kGrid, b.lo[1] + (b.hi[1] - b.lo[1]) * j / kGrid};
            grid.push_back({profile(points, std::exp(x[0]), x[1]).rss, x});
        }
    }
    std::sort(grid.begin(), grid.end(), [](const Cand& a, const Cand& c) { return a.rss < c.rss; });

    LogisticFit best = flat;
    for (std::size_t s = 0; s < std::min<std::size_t>(6, grid.size()); ++s) {
        auto x = nelder_mead(points, grid[s].x, b);
        x = nelder_mead(points, x, b);  // restart shrinks a collapsed simplex
        const auto pr = profile(points, std::exp(x[0]), x[1]);
        if (pr.rss < best.rss) best = {pr.l, std::exp(x[0]), x[1], pr.rss, false};
    }
    return best;
}

}  // namespace breathradar
