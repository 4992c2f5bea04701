#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "breathradar/caf.hpp"

namespace breathradar {

/// 2D cell-averaging CFAR window. Half-widths are per axis (rows = slow
/// time, cols = Doppler). The full window extends guard + train cells on each
/// side of the cell under test; the guard box and the CUT are excluded from
/// the noise average.
struct CfarConfig {
    std::array<int, 2> train{4, 4};
    std::array<int, 2> guard{1, 1};
    double pfa = 1e-3;

    void validate() const;
    int window_rows() const { return 2 * (train[0] + guard[0]) + 1; }
    int window_cols() const { return 2 * (train[1] + guard[1]) + 1; }
    /// Training cells for an unclipped window.
    int interior_training_cells() const;
};

/// Real-valued matrix, row-major.
struct RealMap {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[std::size_t(r) * std::size_t(cols) + std::size_t(c)]; }
};

struct CfarMap {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> detections;  // 0/1
    std::vector<double> threshold_map;     // alpha(N_eff) * P_n per cell

    bool detected(int r, int c) const { return detections[std::size_t(r) * std::size_t(cols) + std::size_t(c)] != 0; }
    std::size_t count() const;
};

/// alpha = N (pfa^{-1/N} - 1)
double threshold_factor(int n_train, double pfa);

/// Detection iff power > alpha(N_eff, pfa) * mean(training cells). At the map
/// borders the window is clipped and N_eff counts only the cells inside.
CfarMap cfar_detect(const RealMap& power, const CfarConfig& cfg);
/// Runs on |map|^2.
CfarMap cfar_detect(const DopplerMap& map, const CfarConfig& cfg);

}  // namespace breathradar
