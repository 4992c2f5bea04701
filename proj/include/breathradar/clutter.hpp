#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "breathradar/common.hpp"

namespace breathradar {

struct ClutterCancelConfig {
    int taps = 32;  // P, number of reference delays 0..P-1
    // Tikhonov term, relative: eps = regularization * trace(V^H V) / P.
    // Zero disables regularization.
    double regularization = 1e-9;
};

/// One coherent integration interval of reference and surveillance samples.
struct CitBlock {
    std::span<const cplx> ref;
    std::span<const cplx> sur;
    double sample_rate = 0.0;
};

/// N x P matrix whose column p is ref delayed by p samples, zero-filled.
Eigen::MatrixXcd build_delay_matrix(std::span<const cplx> ref, int taps);

/// Least-squares canceller for one CIT. The Gram matrix of the delayed
/// reference is formed and factored once; apply() projects any number of
/// surveillance blocks against it.
class ClutterCanceller {
public:
    ClutterCanceller(std::span<const cplx> ref, const ClutterCancelConfig& cfg);

    /// Weights K solving (V^H V + eps I) K = V^H sur.
    Eigen::VectorXcd weights(std::span<const cplx> sur) const;
    /// sur - V K
    std::vector<cplx> apply(std::span<const cplx> sur) const;

    int taps() const { return taps_; }
    double epsilon() const { return eps_; }

private:
    Eigen::VectorXcd correlate(std::span<const cplx> sur) const;

    std::vector<cplx> ref_;
    int taps_;
    double eps_ = 0.0;
    Eigen::LDLT<Eigen::MatrixXcd> solver_;
};

std::vector<cplx> cancel_clutter(const CitBlock& block, const ClutterCancelConfig& cfg);

}  // namespace breathradar
