#include "breathradar/clutter.hpp"

#include <algorithm>
#include <string>

namespace breathradar {

Eigen::MatrixXcd build_delay_matrix(std::span<const cplx> ref, int taps) {
    if (taps < 1) throw ConfigError("delay matrix needs at least one tap");
    const auto n = Eigen::Index(ref.size());
    if (taps > n) throw ConfigError("more taps (" + std::to_string(taps) + ") than samples (" + std::to_string(n) + ")");
    Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(n, taps);
    for (Eigen::Index p = 0; p < taps; ++p) {
        for (Eigen::Index i = p; i < n; ++i) v(i, p) = ref[std::size_t(i - p)];
    }
    return v;
}

ClutterCanceller::ClutterCanceller(std::span<const cplx> ref, const ClutterCancelConfig& cfg)
    : ref_(ref.begin(), ref.end()), taps_(cfg.taps) {
    const auto n = std::size_t(ref.size());
    if (taps_ < 1) throw ConfigError("clutter canceller needs at least one tap");
    if (std::size_t(taps_) * 4 > n) {
        throw ConfigError("clutter taps must not exceed a quarter of the CIT length");
    }
    if (!(cfg.regularization >= 0)) throw ConfigError("regularization must be non-negative");

    // G(p,q) = sum_{i >= max(p,q)} conj(r[i-p]) r[i-q]. With d = q - p >= 0 this
    // is the lag-d autocorrelation truncated to i - q <= N-1-q, so each lag is
    // computed once over the full record and the p leading terms that the
    // zero-fill drops are subtracted.
    const int P = taps_;
    std::vector<cplx> lag(std::size_t(P), cplx{});
    for (int d = 0; d < P; ++d) {
        cplx acc{};
        for (std::size_t m = 0; m + std::size_t(d) < n; ++m) acc += std::conj(ref_[m + std::size_t(d)]) * ref_[m];
        lag[std::size_t(d)] = acc;
    }
    Eigen::MatrixXcd g(P, P);
    for (int p = 0; p < P; ++p) {
        for (int q = p; q < P; ++q) {
            const int d = q - p;
            // sum over m = 0..N-1-q of conj(r[m+d]) r[m]; remove m = N-q..N-1-d
            cplx val = lag[std::size_t(d)];
            for (std::size_t m = n - std::size_t(q); m + std::size_t(d) < n; ++m) {
                val -= std::conj(ref_[m + std::size_t(d)]) * ref_[m];
            }
            g(p, q) = val;
            g(q, p) = std::conj(val);
        }
    }
    const double trace = g.diagonal().real().sum();
    eps_ = cfg.regularization * trace / double(P);
    if (eps_ > 0) g.diagonal().array() += eps_;

    solver_.compute(g);
    const auto d = solver_.vectorD().cwiseAbs();
    const double dmax = d.maxCoeff();
    if (solver_.info() != Eigen::Success || !(dmax > 0) || d.minCoeff() <= 1e-13 * dmax) {
        throw SolverError("delayed-reference matrix is rank deficient (degenerate reference signal)");
    }
}

Eigen::VectorXcd ClutterCanceller::correlate(std::span<const cplx> sur) const {
    if (sur.size() != ref_.size()) throw InputError("surveillance block length differs from reference block");
    const std::size_t n = ref_.size();
    Eigen::VectorXcd h(taps_);
    for (int p = 0; p < taps_; ++p) {
        cplx acc{};
        for (std::size_t i = std::size_t(p); i < n; ++i) acc += std::conj(ref_[i - std::size_t(p)]) * sur[i];
        h(p) = acc;
    }
    return h;
}

Eigen::VectorXcd ClutterCanceller::weights(std::span<const cplx> sur) const { return solver_.solve(correlate(sur)); }

std::vector<cplx> ClutterCanceller::apply(std::span<const cplx> sur) const {
    const Eigen::VectorXcd k = weights(sur);
    std::vector<cplx> out(sur.begin(), sur.end());
    const std::size_t n = ref_.size();
    for (int p = 0; p < taps_; ++p) {
        const cplx w = k(p);
        for (std::size_t i = std::size_t(p); i < n; ++i) out[i] -= w * ref_[i - std::size_t(p)];
    }
    return out;
}

std::vector<cplx> cancel_clutter(const CitBlock& block, const ClutterCancelConfig& cfg) {
    if (block.ref.size() != block.sur.size()) throw InputError("CIT block reference/surveillance length mismatch");
    if (block.ref.empty()) throw InputError("empty CIT block");
    return ClutterCanceller(block.ref, cfg).apply(block.sur);
}

}  // namespace breathradar
