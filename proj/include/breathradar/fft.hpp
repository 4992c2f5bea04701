#pragma once

#include <span>

#include "breathradar/common.hpp"

namespace breathradar::fft {

// Thin wrappers over FFTW (double precision). Plans are built with
// FFTW_ESTIMATE so the selected algorithm, and therefore every output bit,
// does not depend on timing measurements. Plans are cached per size; the
// cache is guarded because the FFTW planner is not re-entrant.

/// out[k] = sum_n in[n] e^{-j 2 pi k n / N}
void forward(std::span<const cplx> in, std::span<cplx> out);
/// out[n] = sum_k in[k] e^{+j 2 pi k n / N}  (unnormalized)
void inverse(std::span<const cplx> in, std::span<cplx> out);

std::vector<cplx> forward(std::span<const cplx> in);

}  // namespace breathradar::fft
