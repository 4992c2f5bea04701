#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "breathradar/common.hpp"

namespace breathradar {

/// Transmit waveform: a constant-amplitude QPSK training sequence followed by
/// an OFDM payload, optionally followed by a silent gap. Frames repeat.
struct WaveformConfig {
    double carrier_freq = 60.48e9;  // Hz
    double sample_rate = 10e6;      // Hz, complex baseband
    double training_len = 16e-6;    // s
    double payload_len = 200e-6;    // s
    double frame_gap = 0.0;         // s
    int subcarrier_count = 64;
    std::uint64_t seed = 1;

    double wavelength() const { return kSpeedOfLight / carrier_freq; }
    std::size_t training_samples() const;
    std::size_t payload_samples() const;
    std::size_t gap_samples() const;
    std::size_t frame_samples() const { return training_samples() + payload_samples() + gap_samples(); }

    void validate() const;
};

struct BreathingTarget {
    Vec3 position;             // chest rest position, m
    double amplitude = 5e-3;   // peak chest displacement, m
    double rate = 0.3;         // breaths per second
    double phase = 0.0;        // rad
    double rcs_gain = 1.0;     // linear amplitude coefficient
};

struct Waypoint {
    double time = 0.0;
    Vec3 position;
};

/// A walking person, modelled as a point scatterer moving piecewise
/// linearly between waypoints. Before the first and after the last waypoint
/// it stands still.
struct Interferer {
    std::vector<Waypoint> waypoints;
    double rcs_gain = 1.0;

    Vec3 position_at(double t) const;
    Vec3 velocity_at(double t) const;
};

struct ClutterPath {
    cplx attenuation{1.0, 0.0};
    double delay = 0.0;  // s
};

struct Scenario {
    WaveformConfig waveform;
    Vec3 tx_pos;
    Vec3 ref_rx_pos;
    std::array<Vec3, 2> sur_rx_pos;
    std::optional<BreathingTarget> target;
    std::optional<Interferer> interferer;
    std::array<std::vector<ClutterPath>, 2> clutter;
    cplx ref_attenuation{1.0, 0.0};
    double ref_delay = 0.0;    // s
    double cfo = 0.0;          // Hz
    double noise_power = 0.0;  // per-channel sigma^2
    double duration = 1.0;     // s

    std::size_t sample_count() const;
    void validate() const;
};

/// Path echoes closer than this to a transmitter or receiver use this
/// distance in the 1/(R_tx R_rx) amplitude law; the far-field law diverges
/// at contact.
inline constexpr double kNearFieldClamp = 0.3;  // m

/// Echo amplitude of a point scatterer of the given gain at position p.
double echo_amplitude(double rcs_gain, const Vec3& tx, const Vec3& p, const Vec3& rx);

/// |tx - p| + |p - rx|
inline double bistatic_length(const Vec3& tx, const Vec3& p, const Vec3& rx) { return distance(tx, p) + distance(p, rx); }

/// Chest position at time t: rest position displaced sinusoidally along the
/// unit vector pointing from the chest towards the transmitter.
Vec3 chest_position(const BreathingTarget& target, const Vec3& tx, double t);

/// d/dt of the bistatic length for the chest at time t (analytic).
double chest_path_rate(const BreathingTarget& target, const Vec3& tx, const Vec3& rx, double t);

/// d/dt of the bistatic length for the interferer at time t (analytic).
double interferer_path_rate(const Interferer& interferer, const Vec3& tx, const Vec3& rx, double t);

/// One frame of the transmit waveform.
IQBuffer generate_waveform(const WaveformConfig& cfg);
/// Concatenated frames truncated to sample_count samples. Each frame has
/// unit mean power; the training sequence repeats and the payload data is
/// fresh per frame. Deterministic in cfg.seed.
IQBuffer generate_waveform(const WaveformConfig& cfg, std::size_t sample_count);

struct ChannelSet {
    IQBuffer ref;
    std::array<IQBuffer, 2> sur;
};

ChannelSet synthesize_channels(const Scenario& scn);

}  // namespace breathradar
