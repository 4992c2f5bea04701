#include "breathradar/caf.hpp"

#include <cmath>
#include <string>

#include "breathradar/fft.hpp"

namespace breathradar {

void CafConfig::validate() const {
    if (!(cit > 0)) throw ConfigError("cit must be positive");
    if (doppler_bins < 2) throw ConfigError("doppler_bins must be >= 2");
    if (delay_search < 0) throw ConfigError("delay_search must be >= 0");
}

std::vector<double> doppler_axis(int bins, double cit) {
    std::vector<double> axis(static_cast<std::size_t>(bins));
    for (int k = 0; k < bins; ++k) axis[std::size_t(k)] = double(k - bins / 2) / cit;
    return axis;
}

CafRow caf_single_cit(std::span<const cplx> y_star, std::span<const cplx> ref, double sample_rate, const CafConfig& cfg) {
    cfg.validate();
    if (y_star.size() != ref.size()) throw InputError("CAF inputs differ in length");
    const std::size_t n = y_star.size();
    const std::size_t expected = exact_sample_count(cfg.cit, sample_rate, "cit");
    if (n != expected) throw InputError("CAF block length " + std::to_string(n) + " != cit * sample_rate");
    const auto b = std::size_t(cfg.doppler_bins);
    if (n < b) throw ConfigError("CIT has fewer samples than Doppler bins");

    CafRow out;
    out.row.assign(b, cplx{});
    std::vector<double> best(b, -1.0);
    std::vector<int> best_tau(b, 0);
    std::vector<cplx> z(n), spec(n);
    const std::size_t half = b / 2;

    for (int tau = 0; tau <= cfg.delay_search; ++tau) {
        const auto t = std::size_t(tau);
        for (std::size_t i = 0; i < n; ++i) z[i] = i >= t ? y_star[i] * std::conj(ref[i - t]) : cplx{};
        fft::forward(z, spec);
        for (std::size_t k = 0; k < b; ++k) {
            // shifted bin k holds Doppler index k - B/2, i.e. FFT bin (k - B/2) mod N
            const std::size_t src = (k + n - half) % n;
            const cplx v = spec[src];
            const double m = std::norm(v);
            if (m > best[k]) {
                best[k] = m;
                best_tau[k] = tau;
                out.row[k] = v;
            }
        }
    }
    std::size_t peak = 0;
    for (std::size_t k = 1; k < b; ++k) {
        if (best[k] > best[peak]) peak = k;
    }
    out.peak_delay = best_tau[peak];
    return out;
}

std::size_t cit_count(const IQBuffer& buf, const CafConfig& cfg) {
    cfg.validate();
    const std::size_t n = exact_sample_count(cfg.cit, buf.sample_rate, "cit");
    const std::size_t count = buf.size() / n;
    if (count == 0) throw InputError("buffer shorter than one CIT");
    return count;
}

namespace {

DopplerMap empty_map(std::size_t rows, const CafConfig& cfg, int channel_id) {
    DopplerMap m;
    m.rows = int(rows);
    m.cols = cfg.doppler_bins;
    m.values.assign(rows * std::size_t(cfg.doppler_bins), cplx{});
    m.doppler_axis = doppler_axis(cfg.doppler_bins, cfg.cit);
    m.time_axis.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) m.time_axis[r] = (double(r) + 0.5) * cfg.cit;
    m.channel_id = channel_id;
    return m;
}

void check_pair(const IQBuffer& ref, const IQBuffer& sur) {
    if (ref.sample_rate != sur.sample_rate) throw InputError("reference and surveillance sample rates differ");
    if (ref.size() != sur.size()) throw InputError("reference and surveillance lengths differ");
}

}  // namespace

std::array<DopplerMap, 2> caf_maps(const IQBuffer& ref, const std::array<IQBuffer, 2>& sur,
                                   const std::optional<ClutterCancelConfig>& ccfg, const CafConfig& cfg) {
    check_pair(ref, sur[0]);
    check_pair(ref, sur[1]);
    const std::size_t rows = cit_count(ref, cfg);
    const std::size_t n = exact_sample_count(cfg.cit, ref.sample_rate, "cit");
    std::array<DopplerMap, 2> maps{empty_map(rows, cfg, 1), empty_map(rows, cfg, 2)};

    for (std::size_t r = 0; r < rows; ++r) {
        std::span<const cplx> ref_blk(ref.samples.data() + r * n, n);
        std::optional<ClutterCanceller> canceller;
        if (ccfg) canceller.emplace(ref_blk, *ccfg);
        for (std::size_t ch = 0; ch < 2; ++ch) {
            std::span<const cplx> sur_blk(sur[ch].samples.data() + r * n, n);
            const CafRow row = canceller ? caf_single_cit(canceller->apply(sur_blk), ref_blk, ref.sample_rate, cfg)
                                         : caf_single_cit(sur_blk, ref_blk, ref.sample_rate, cfg);
            std::copy(row.row.begin(), row.row.end(), maps[ch].values.begin() + std::ptrdiff_t(r * std::size_t(cfg.doppler_bins)));
        }
    }
    return maps;
}

DopplerMap caf_map(const IQBuffer& ref, const IQBuffer& sur, const std::optional<ClutterCancelConfig>& ccfg,
                   const CafConfig& cfg, int channel_id) {
    check_pair(ref, sur);
    const std::size_t rows = cit_count(ref, cfg);
    const std::size_t n = exact_sample_count(cfg.cit, ref.sample_rate, "cit");
    DopplerMap map = empty_map(rows, cfg, channel_id);
    for (std::size_t r = 0; r < rows; ++r) {
        std::span<const cplx> ref_blk(ref.samples.data() + r * n, n);
        std::span<const cplx> sur_blk(sur.samples.data() + r * n, n);
        const CafRow row = ccfg ? caf_single_cit(cancel_clutter({ref_blk, sur_blk, ref.sample_rate}, *ccfg), ref_blk,
                                                 ref.sample_rate, cfg)
                                : caf_single_cit(sur_blk, ref_blk, ref.sample_rate, cfg);
        std::copy(row.row.begin(), row.row.end(), map.values.begin() + std::ptrdiff_t(r * std::size_t(cfg.doppler_bins)));
    }
    return map;
}

std::vector<double> power(const DopplerMap& map) {
    std::vector<double> p(map.values.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(map.values[i]);
    return p;
}

}  // namespace breathradar
