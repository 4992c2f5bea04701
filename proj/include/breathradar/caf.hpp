#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "breathradar/clutter.hpp"
#include "breathradar/common.hpp"

namespace breathradar {

struct CafConfig {
    double cit = 0.1;         // s
    int doppler_bins = 1024;  // B
    int delay_search = 4;     // tau searched over 0..delay_search samples

    void validate() const;
};

/// Time-Doppler matrix: one row per CIT, one column per Doppler bin.
/// Column B/2 is 0 Hz; bin spacing is 1/cit.
struct DopplerMap {
    int rows = 0;
    int cols = 0;
    std::vector<cplx> values;  // row-major
    std::vector<double> doppler_axis;
    std::vector<double> time_axis;  // CIT centre times
    int channel_id = 1;

    cplx& at(int r, int c) { return values[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
    const cplx& at(int r, int c) const { return values[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
    std::span<const cplx> row(int r) const { return {values.data() + std::size_t(r) * std::size_t(cols), std::size_t(cols)}; }
    int zero_bin() const { return cols / 2; }
};

struct CafRow {
    std::vector<cplx> row;  // B bins, FFT-shifted
    int peak_delay = 0;     // argmax tau at the strongest bin
};

/// Doppler frequencies of the B bins: (k - B/2)/cit for k = 0..B-1.
std::vector<double> doppler_axis(int bins, double cit);

/// Cross ambiguity of one CIT:
///   R(f) = max_tau | sum_n y[n] conj(ref[n - tau]) e^{-j 2 pi f n / fs} |
/// evaluated on the bin grid f = k/cit, |k| <= B/2. For each tau the
/// product sequence is transformed with one length-N FFT, which evaluates the
/// sum exactly at every bin (f_k n / fs = k n / N). The returned row keeps the
/// complex value from the maximizing tau in each bin.
CafRow caf_single_cit(std::span<const cplx> y_star, std::span<const cplx> ref, double sample_rate, const CafConfig& cfg);

/// Number of whole CITs in a buffer; throws if there is not even one.
std::size_t cit_count(const IQBuffer& buf, const CafConfig& cfg);

/// Clutter cancellation followed by the CAF, per CIT, for one surveillance
/// channel. A disengaged ccfg skips cancellation. Trailing partial CITs are
/// dropped.
DopplerMap caf_map(const IQBuffer& ref, const IQBuffer& sur, const std::optional<ClutterCancelConfig>& ccfg,
                   const CafConfig& cfg, int channel_id = 1);

/// Both surveillance channels; the per-CIT reference factorization is shared.
std::array<DopplerMap, 2> caf_maps(const IQBuffer& ref, const std::array<IQBuffer, 2>& sur,
                                   const std::optional<ClutterCancelConfig>& ccfg, const CafConfig& cfg);

/// |value|^2 per cell.
std::vector<double> power(const DopplerMap& map);

}  // namespace breathradar
