#pragma once

#include <array>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "breathradar/caf.hpp"

namespace breathradar {

/// Slow-time breathing signal extracted from a DopplerMap: one value per CIT.
/// Each value is the power-weighted mean Doppler (Hz) of the bins with
/// 0 < |f| <= band, i.e. the sign-carrying micro-Doppler centroid of the
/// low-velocity returns. band_power keeps the denominator and floor_power
/// the median cell power of the row, a noise reference.
struct SlowTimeTrack {
    std::vector<double> samples;
    std::vector<double> band_power;
    std::vector<double> floor_power;
    int band_bins = 0;  // cells summed into band_power
    double rate = 0.0;  // samples per second (1/cit)

    double duration() const { return rate > 0 ? double(samples.size()) / rate : 0.0; }
};

struct EstimatorConfig {
    double band_hz = 20.0;             // low-Doppler band fed to the track
    double breath_lo = 0.1;            // presence peak search, Hz
    double breath_hi = 1.0;
    double floor_lo = 0.1;             // median reference band, Hz
    double floor_hi = 5.0;
    double count_lo = 0.15;            // rate search for counting, Hz
    double count_hi = 0.7;
    double count_floor = 3.0;          // counting needs peak > count_floor * median
    double count_grid = 0.005;         // Hz
    double gate = 5.0;                 // burst gate, multiple of median band power
    double floor_gate = 30.0;          // CITs whose mean band cell power is below floor_gate * row median read as 0
    double min_active = 0.3;           // a channel scores 0 unless this fraction of CITs is active
    double active_max_hz = 12.0;       // an active CIT also has |centroid| <= this (0: no limit)
    double clip_hz = 0.0;              // presence track reads 0 where |centroid| > this (0: off)
    // Presence threshold per window length (s). Calibrated on held-out data
    // and loaded from config; detect_presence throws while it is missing.
    std::map<double, double> presence_threshold;

    double threshold_for(double window) const;
};

/// Detection windows, seconds.
inline constexpr std::array<double, 4> kDetectionWindows{2.5, 5.0, 7.0, 10.0};

SlowTimeTrack extract_track(const DopplerMap& map, double band_hz);

/// Power spectrum of a real slow-time series after linear detrending and an
/// optional Hann taper, zero-padded to a fine grid.
struct SlowTimeSpectrum {
    std::vector<double> freq;
    std::vector<double> power;

    double median_in(double lo, double hi) const;
    /// Index of the largest bin with lo <= f <= hi; -1 if none.
    int argmax_in(double lo, double hi) const;
};

SlowTimeSpectrum slow_time_spectrum(std::span<const double> x, double rate, bool hann = true);

/// Last `window` seconds of a track.
std::span<const double> tail(const SlowTimeTrack& t, double window);

/// Last `window` seconds, cleaned in two steps when the track carries its
/// powers. CITs with no low-Doppler energy above the row's noise reference
/// (mean band cell power < floor_gate * floor_power) are set to 0: their
/// centroid is noise or sidelobe leakage from a fast mover. Then a CIT whose
/// band power exceeds gate times the window median (a walker crossing low
/// Doppler) is replaced by linear interpolation between clean neighbours.
/// A non-positive factor disables its step.
/// A positive max_hz first zeroes samples whose |centroid| exceeds it.
std::vector<double> gated_tail(const SlowTimeTrack& t, double window, double gate, double floor_gate = 0.0, double max_hz = 0.0);

/// Fraction of the window's CITs whose band clears the floor gate and, when
/// max_hz > 0, whose |centroid| <= max_hz. 1 when both tests are off.
double active_fraction(const SlowTimeTrack& t, double window, double floor_gate, double max_hz = 0.0);

struct PresenceResult {
    bool present = false;
    double score = 0.0;
};

/// score = max over channels of peak(0.1-1 Hz) / median(0.1-5 Hz) of the
/// gated tail's spectrum. A channel without a persistent low-Doppler return
/// (active_fraction < min_active) scores 0: a ratio of a mostly-zero track
/// only measures the shape of a few isolated bumps.
double presence_score(const std::array<SlowTimeTrack, 2>& tracks, double window, const EstimatorConfig& cfg = {});
PresenceResult detect_presence(const std::array<SlowTimeTrack, 2>& tracks, double window,
                               const EstimatorConfig& cfg = {});

/// Thrown by count_respirations when no breathing line clears the floor.
class NoRespirationDetected : public Error {
public:
    using Error::Error;
};

/// Amplitude of the least-squares fit of a + b t + c cos(2 pi f t) + d sin(2 pi f t)
/// restricted to the sinusoid, i.e. sqrt of the power the sinusoid explains
/// beyond a linear trend. Exact for a noiseless sinusoid at any f, where the
/// FFT peak is pulled by its own negative-frequency image when the window
/// holds only a couple of cycles.
std::vector<double> sinusoid_amplitude(std::span<const double> x, double rate, std::span<const double> freqs);

/// Breathing frequency in Hz: peak of the channel average of the
/// median-normalized sinusoid amplitude spectra, scanned on a grid in
/// count_lo..count_hi, refined by parabolic interpolation and a golden-section
/// search.
double estimate_breathing_rate(const std::array<SlowTimeTrack, 2>& tracks, double window, const EstimatorConfig& cfg = {});
/// round(rate * window)
int count_respirations(const std::array<SlowTimeTrack, 2>& tracks, double window = 10.0,
                       const EstimatorConfig& cfg = {});

/// Fraction of exact matches.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// a(t) = l / (1 + exp(-k (t - t0)))
struct LogisticFit {
    double l = 1.0;
    double k = 1.0;
    double t0 = 0.0;
    double rss = 0.0;
    // Set when every accuracy is equal: the curve is the constant l, with k
    // pinned at its lower bound and t0 moved far enough left to saturate.
    bool degenerate = false;

    double operator()(double t) const;
};

inline constexpr double kLogisticMinK = 1e-3;
inline constexpr double kLogisticMaxK = 100.0;

LogisticFit fit_logistic(std::span<const std::pair<double, double>> points);

/// Residual sum of squares of the best constant fit (the mean).
double constant_fit_rss(std::span<const std::pair<double, double>> points);

}  // namespace breathradar
