#include "breathradar/cfar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace breathradar {

void CfarConfig::validate() const {
    if (train[0] < 1 || train[1] < 1) throw ConfigError("CFAR needs at least one training cell per axis");
    if (guard[0] < 0 || guard[1] < 0) throw ConfigError("CFAR guard half-widths must be non-negative");
    if (!(pfa > 0) || !(pfa < 1)) throw ConfigError("CFAR pfa must lie in (0, 1)");
}

int CfarConfig::interior_training_cells() const {
    return window_rows() * window_cols() - (2 * guard[0] + 1) * (2 * guard[1] + 1);
}

std::size_t CfarMap::count() const { return std::size_t(std::count(detections.begin(), detections.end(), std::uint8_t{1})); }

double threshold_factor(int n_train, double pfa) {
    if (n_train < 1) throw DomainError("threshold_factor: n_train must be >= 1");
    if (!(pfa > 0) || !(pfa <= 1)) throw DomainError("threshold_factor: pfa must lie in (0, 1]");
    const double n = double(n_train);
    // pfa^{-1/N} - 1 = expm1(-log(pfa)/N), accurate for large N
    return n * std::expm1(-std::log(pfa) / n);
}

CfarMap cfar_detect(const RealMap& power, const CfarConfig& cfg) {
    cfg.validate();
    if (power.values.size() != std::size_t(power.rows) * std::size_t(power.cols)) throw InputError("map size mismatch");
    if (power.rows < cfg.window_rows() || power.cols < cfg.window_cols()) {
        throw ConfigError("CFAR window larger than map");
    }
    const int wr = cfg.train[0] + cfg.guard[0];
    const int wc = cfg.train[1] + cfg.guard[1];
    const int gr = cfg.guard[0];
    const int gc = cfg.guard[1];

    std::vector<double> alpha(std::size_t(cfg.interior_training_cells()) + 1, 0.0);
    for (std::size_t k = 1; k < alpha.size(); ++k) alpha[k] = threshold_factor(int(k), cfg.pfa);

    CfarMap out;
    out.rows = power.rows;
    out.cols = power.cols;
    out.detections.assign(power.values.size(), 0);
    out.threshold_map.assign(power.values.size(), 0.0);

    for (int r = 0; r < power.rows; ++r) {
        const int r0 = std::max(0, r - wr), r1 = std::min(power.rows - 1, r + wr);
        const int g0 = std::max(0, r - gr), g1 = std::min(power.rows - 1, r + gr);
        for (int c = 0; c < power.cols; ++c) {
            const int c0 = std::max(0, c - wc), c1 = std::min(power.cols - 1, c + wc);
            const int h0 = std::max(0, c - gc), h1 = std::min(power.cols - 1, c + gc);
            double sum = 0.0;
            int count = 0;
            for (int i = r0; i <= r1; ++i) {
                const bool in_guard_rows = i >= g0 && i <= g1;
                const double* row = power.values.data() + std::size_t(i) * std::size_t(power.cols);
                for (int j = c0; j <= c1; ++j) {
                    if (in_guard_rows && j >= h0 && j <= h1) continue;
                    sum += row[j];
                    ++count;
                }
            }
            const std::size_t idx = std::size_t(r) * std::size_t(power.cols) + std::size_t(c);
            const double beta = alpha[std::size_t(count)] * (sum / double(count));
            out.threshold_map[idx] = beta;
            out.detections[idx] = power.values[idx] > beta ? 1 : 0;
        }
    }
    return out;
}

CfarMap cfar_detect(const DopplerMap& map, const CfarConfig& cfg) {
    return cfar_detect(RealMap{map.rows, map.cols, power(map)}, cfg);
}

}  // namespace breathradar
