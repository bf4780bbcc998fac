// Thin FFTW wrapper: unnormalized forward c2c transforms with a mutex-guarded
// plan cache. Inverse transforms divide by N.
#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "msls/image.hpp"

namespace msls {

using Spectrum = std::vector<std::complex<double>>;  // row-major, width*height

namespace detail {

class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int w, int h, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_tuple(w, h, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        // Plan with a scratch buffer; FFTW_ESTIMATE plans are array-agnostic.
        std::vector<fftw_complex> scratch(static_cast<size_t>(w) * h);
        fftw_plan p = fftw_plan_dft_2d(h, w, scratch.data(), scratch.data(), sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, p);
        return p;
    }

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

inline Spectrum fft2(const ImageBuffer& img) {
    const int w = img.width(), h = img.height();
    Spectrum out(img.size());
    for (size_t i = 0; i < img.size(); ++i) out[i] = img.data()[i];
    fftw_plan p = detail::PlanCache::instance().get(w, h, FFTW_FORWARD);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(out.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

inline ImageBuffer ifft2_real(Spectrum spec, int w, int h) {
    fftw_plan p = detail::PlanCache::instance().get(w, h, FFTW_BACKWARD);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(spec.data()),
                     reinterpret_cast<fftw_complex*>(spec.data()));
    ImageBuffer out(w, h);
    const double scale = 1.0 / (static_cast<double>(w) * h);
    for (size_t i = 0; i < spec.size(); ++i) out.data()[i] = spec[i].real() * scale;
    return out;
}

// Kernel embedded in a w x h field with its center wrapped to the origin, so
// that pointwise spectral products realize centered circular convolution.
inline ImageBuffer pad_kernel_origin(const BlurKernel& k, int w, int h) {
    if (k.size() > w || k.size() > h) throw Error("kernel exceeds image support");
    ImageBuffer out(w, h, 0.0);
    const int c = k.center();
    for (int v = 0; v < k.size(); ++v) {
        for (int u = 0; u < k.size(); ++u) {
            int x = ((u - c) % w + w) % w;
            int y = ((v - c) % h + h) % h;
            out.at(x, y) += k.at(u, v);
        }
    }
    return out;
}

inline Spectrum kernel_spectrum(const BlurKernel& k, int w, int h) {
    return fft2(pad_kernel_origin(k, w, h));
}

}  // namespace msls
