#include "breathradar/fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <utility>

namespace breathradar::fft {
namespace {

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan plan_for(std::size_t n, int sign) {
    static std::map<std::pair<std::size_t, int>, Plan> cache;
    std::lock_guard lock(planner_mutex());
    auto& slot = cache[{n, sign}];
    if (!slot) {
        std::vector<cplx> a(n), b(n);
        slot.reset(fftw_plan_dft_1d(int(n), reinterpret_cast<fftw_complex*>(a.data()),
                                    reinterpret_cast<fftw_complex*>(b.data()), sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED));
        if (!slot) throw Error("fftw: could not build plan");
    }
    return slot.get();
}

void run(std::span<const cplx> in, std::span<cplx> out, int sign) {
    if (in.size() != out.size()) throw InputError("fft: input and output sizes differ");
    if (in.empty()) return;
    fftw_plan p = plan_for(in.size(), sign);
    // fftw_execute_dft is thread-safe and does not modify the input for
    // out-of-place complex transforms.
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace

void forward(std::span<const cplx> in, std::span<cplx> out) {
    if (in.data() == out.data()) {
        std::vector<cplx> tmp(in.begin(), in.end());
        run(tmp, out, FFTW_FORWARD);
        return;
    }
    run(in, out, FFTW_FORWARD);
}

void inverse(std::span<const cplx> in, std::span<cplx> out) {
    if (in.data() == out.data()) {
        std::vector<cplx> tmp(in.begin(), in.end());
        run(tmp, out, FFTW_BACKWARD);
        return;
    }
    run(in, out, FFTW_BACKWARD);
}

std::vector<cplx> forward(std::span<const cplx> in) {
    std::vector<cplx> out(in.size());
    forward(in, out);
    return out;
}

}  // namespace breathradar::fft
