#include "breathradar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "breathradar/fft.hpp"
#include "breathradar/rng.hpp"

namespace breathradar {
namespace {

constexpr std::uint64_t kTrainingStream = 0x747261696e;  // "train"
constexpr std::uint64_t kPayloadStream = 0x7061796c64;   // "payld"
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;     // "noise"
constexpr std::size_t kKnotSpacing = 16;

// Linear interpolation of s at fractional index x; zero outside the buffer.
inline cplx interp(const std::vector<cplx>& s, double x) {
    const double fl = std::floor(x);
    const auto i = static_cast<std::int64_t>(fl);
    const double f = x - fl;
    const auto n = static_cast<std::int64_t>(s.size());
    cplx a = (i >= 0 && i < n) ? s[std::size_t(i)] : cplx{};
    if (f == 0.0) return a;
    cplx b = (i + 1 >= 0 && i + 1 < n) ? s[std::size_t(i + 1)] : cplx{};
    return a * (1.0 - f) + b * f;
}

// e^{-j 2 pi cycles}, reduced modulo one cycle first to keep precision for
// large arguments.
inline cplx phasor_neg(double cycles) {
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0, -2.0 * kPi * frac);
}

Vec3 unit(const Vec3& v) {
    const double n = v.norm();
    if (n <= 0.0) throw GeometryError("zero-length direction");
    return (1.0 / n) * v;
}

struct FrameBuilder {
    const WaveformConfig& cfg;
    const std::vector<cplx>& training;
    Rng payload_rng;
    std::vector<cplx> bins, sym, payload;

    FrameBuilder(const WaveformConfig& c, const std::vector<cplx>& tr)
        : cfg(c), training(tr), payload_rng(derive_seed(c.seed, kPayloadStream)),
          bins(std::size_t(c.subcarrier_count)), sym(std::size_t(c.subcarrier_count)) {}

    void append(std::vector<cplx>& out) {
        const std::size_t np = cfg.payload_samples();
        const std::size_t start = out.size();
        out.insert(out.end(), training.begin(), training.end());

        payload.clear();
        while (payload.size() < np) {
            for (auto& b : bins) b = payload_rng.qpsk();
            fft::inverse(bins, sym);
            payload.insert(payload.end(), sym.begin(), sym.end());
        }
        payload.resize(np);
        const double p = mean_power(payload);
        const double g = p > 0 ? 1.0 / std::sqrt(p) : 0.0;
        for (const auto& v : payload) out.push_back(v * g);

        out.insert(out.end(), cfg.gap_samples(), cplx{});

        const std::size_t active = training.size() + np;
        const std::size_t total = out.size() - start;
        if (total != active) {
            const double scale = std::sqrt(double(total) / double(active));
            for (std::size_t i = start; i < out.size(); ++i) out[i] *= scale;
        }
    }
};

}  // namespace

std::size_t WaveformConfig::training_samples() const { return exact_sample_count(training_len, sample_rate, "training_len"); }
std::size_t WaveformConfig::payload_samples() const { return exact_sample_count(payload_len, sample_rate, "payload_len"); }
std::size_t WaveformConfig::gap_samples() const { return exact_sample_count(frame_gap, sample_rate, "frame_gap"); }

void WaveformConfig::validate() const {
    if (!(sample_rate > 0) || !std::isfinite(sample_rate)) throw ConfigError("sample_rate must be positive");
    if (!(carrier_freq > 0) || !std::isfinite(carrier_freq)) throw ConfigError("carrier_freq must be positive");
    if (!(training_len > 0) || !(payload_len > 0)) throw ConfigError("training_len and payload_len must be positive");
    if (frame_gap < 0) throw ConfigError("frame_gap must be non-negative");
    if (subcarrier_count < 1) throw ConfigError("subcarrier_count must be >= 1");
    if (training_samples() < 1 || payload_samples() < 1) throw ConfigError("training/payload shorter than one sample");
    (void)gap_samples();
}

Vec3 Interferer::position_at(double t) const {
    if (waypoints.empty()) throw ConfigError("interferer has no waypoints");
    if (t <= waypoints.front().time) return waypoints.front().position;
    if (t >= waypoints.back().time) return waypoints.back().position;
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.time; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double f = (t - a.time) / (b.time - a.time);
    return a.position + f * (b.position - a.position);
}

Vec3 Interferer::velocity_at(double t) const {
    if (waypoints.size() < 2 || t < waypoints.front().time || t >= waypoints.back().time) return {};
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.time; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    return (1.0 / (b.time - a.time)) * (b.position - a.position);
}

std::size_t Scenario::sample_count() const {
    return static_cast<std::size_t>(std::floor(duration * waveform.sample_rate + 1e-9));
}

void Scenario::validate() const {
    waveform.validate();
    if (!(duration > 0) || sample_count() < 1) throw ConfigError("duration must cover at least one sample");
    if (!(noise_power >= 0)) throw ConfigError("noise_power must be non-negative");
    if (ref_delay < 0) throw ConfigError("ref_delay must be non-negative");
    if (distance(ref_rx_pos, tx_pos) <= 0) throw GeometryError("reference receiver colocated with transmitter");
    for (const auto& rx : sur_rx_pos) {
        if (distance(rx, tx_pos) <= 0) throw GeometryError("surveillance receiver colocated with transmitter");
    }
    if (target) {
        const auto& tg = *target;
        if (!(tg.amplitude >= 0)) throw ConfigError("target amplitude must be non-negative");
        if (!(tg.rate > 0) || !(tg.rate < waveform.sample_rate / 2)) throw ConfigError("target rate out of range");
        if (!(tg.rcs_gain >= 0)) throw ConfigError("target rcs_gain must be non-negative");
        const double reach = tg.amplitude + 1e-6;
        if (distance(tg.position, tx_pos) <= reach) throw GeometryError("target colocated with transmitter");
        for (const auto& rx : sur_rx_pos) {
            if (distance(tg.position, rx) <= reach) throw GeometryError("target colocated with surveillance receiver");
        }
    }
    if (interferer) {
        const auto& wp = interferer->waypoints;
        if (wp.empty()) throw ConfigError("interferer needs at least one waypoint");
        if (!(interferer->rcs_gain >= 0)) throw ConfigError("interferer rcs_gain must be non-negative");
        for (std::size_t i = 1; i < wp.size(); ++i) {
            const double dt = wp[i].time - wp[i - 1].time;
            if (!(dt > 0)) throw ConfigError("interferer waypoint times must be strictly increasing");
            if (distance(wp[i].position, wp[i - 1].position) / dt > 3.0 + 1e-9) {
                throw ConfigError("interferer speed exceeds 3 m/s");
            }
        }
    }
    for (const auto& paths : clutter) {
        for (const auto& p : paths) {
            if (!(p.delay >= 0) || !(p.delay < duration)) throw ConfigError("clutter delay out of range");
        }
    }
}

double echo_amplitude(double rcs_gain, const Vec3& tx, const Vec3& p, const Vec3& rx) {
    const double r1 = std::max(distance(tx, p), kNearFieldClamp);
    const double r2 = std::max(distance(p, rx), kNearFieldClamp);
    return rcs_gain / (r1 * r2);
}

Vec3 chest_position(const BreathingTarget& target, const Vec3& tx, double t) {
    const Vec3 axis = unit(tx - target.position);
    const double d = target.amplitude * std::sin(2.0 * kPi * target.rate * t + target.phase);
    return target.position + d * axis;
}

namespace {
double path_rate(const Vec3& tx, const Vec3& p, const Vec3& rx, const Vec3& v) {
    return unit(p - tx).dot(v) + unit(p - rx).dot(v);
}
}  // namespace

double chest_path_rate(const BreathingTarget& target, const Vec3& tx, const Vec3& rx, double t) {
    const Vec3 axis = unit(tx - target.position);
    const double w = 2.0 * kPi * target.rate;
    const Vec3 v = (target.amplitude * w * std::cos(w * t + target.phase)) * axis;
    return path_rate(tx, chest_position(target, tx, t), rx, v);
}

double interferer_path_rate(const Interferer& interferer, const Vec3& tx, const Vec3& rx, double t) {
    return path_rate(tx, interferer.position_at(t), rx, interferer.velocity_at(t));
}

IQBuffer generate_waveform(const WaveformConfig& cfg) {
    cfg.validate();
    return generate_waveform(cfg, cfg.frame_samples());
}

IQBuffer generate_waveform(const WaveformConfig& cfg, std::size_t sample_count) {
    cfg.validate();
    std::vector<cplx> training(cfg.training_samples());
    {
        Rng rng(derive_seed(cfg.seed, kTrainingStream));
        for (auto& c : training) c = rng.qpsk();
    }
    IQBuffer out;
    out.sample_rate = cfg.sample_rate;
    out.samples.reserve(sample_count + cfg.frame_samples());
    FrameBuilder frames(cfg, training);
    while (out.samples.size() < sample_count) frames.append(out.samples);
    out.samples.resize(sample_count);
    return out;
}

ChannelSet synthesize_channels(const Scenario& scn) {
    scn.validate();
    const auto& wf = scn.waveform;
    const double fs = wf.sample_rate;
    const double lambda = wf.wavelength();
    const std::size_t n_samples = scn.sample_count();
    const std::vector<cplx> s = generate_waveform(wf, n_samples + 1).samples;

    auto apply_noise_and_cfo = [&](std::vector<cplx>& y, std::uint64_t channel) {
        if (scn.noise_power > 0) {
            Rng rng(derive_seed(wf.seed, kNoiseStream, channel));
            for (auto& v : y) v += rng.complex_normal(scn.noise_power);
        }
        // The oscillator offset rotates the whole received signal, noise
        // included; circular noise is statistically unchanged by it.
        if (scn.cfo != 0.0) {
            for (std::size_t n = 0; n < y.size(); ++n) y[n] *= phasor_neg(scn.cfo * double(n) / fs);
        }
    };

    ChannelSet out;
    out.ref.sample_rate = fs;
    out.ref.samples.resize(n_samples);
    {
        const double shift = scn.ref_delay * fs;
        for (std::size_t n = 0; n < n_samples; ++n) {
            out.ref.samples[n] = scn.ref_attenuation * interp(s, double(n) - shift);
        }
        apply_noise_and_cfo(out.ref.samples, 0);
    }

    for (std::size_t ch = 0; ch < 2; ++ch) {
        const Vec3& rx = scn.sur_rx_pos[ch];
        auto& y = out.sur[ch].samples;
        out.sur[ch].sample_rate = fs;
        y.assign(n_samples, cplx{});

        // Geometry is evaluated on knots every kKnotSpacing samples and
        // interpolated linearly in between; the carrier phasor advances by a
        // constant rotation per sample within a knot interval.
        auto add_scatterer = [&](auto&& position_at, double rcs_gain) {
            auto knot = [&](std::size_t n) {
                const double t = double(n) / fs;
                const Vec3 p = position_at(t);
                return std::pair{bistatic_length(scn.tx_pos, p, rx), echo_amplitude(rcs_gain, scn.tx_pos, p, rx)};
            };
            auto [len0, amp0] = knot(0);
            for (std::size_t k0 = 0; k0 < n_samples; k0 += kKnotSpacing) {
                const std::size_t k1 = std::min(k0 + kKnotSpacing, n_samples);
                const auto [len1, amp1] = knot(k1);
                const double span = double(k1 - k0);
                const double dlen = (len1 - len0) / span;
                const double damp = (amp1 - amp0) / span;
                const cplx rot = phasor_neg(dlen / lambda);
                cplx carrier = phasor_neg(len0 / lambda);
                for (std::size_t i = 0; i < k1 - k0; ++i) {
                    const std::size_t n = k0 + i;
                    const double len = len0 + dlen * double(i);
                    y[n] += (amp0 + damp * double(i)) * carrier * interp(s, double(n) - len / kSpeedOfLight * fs);
                    carrier *= rot;
                }
                len0 = len1;
                amp0 = amp1;
            }
        };

        if (scn.target) {
            const auto& tg = *scn.target;
            add_scatterer([&](double t) { return chest_position(tg, scn.tx_pos, t); }, tg.rcs_gain);
        }
        if (scn.interferer) {
            const auto& it = *scn.interferer;
            add_scatterer([&](double t) { return it.position_at(t); }, it.rcs_gain);
        }
        for (const auto& path : scn.clutter[ch]) {
            const double shift = path.delay * fs;
            for (std::size_t n = 0; n < n_samples; ++n) y[n] += path.attenuation * interp(s, double(n) - shift);
        }
        apply_noise_and_cfo(y, ch + 1);
    }
    return out;
}

}  // namespace breathradar
