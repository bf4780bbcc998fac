// Convolution, derivative operators, edge tapering and synthetic blur.
#pragma once

#include <cmath>
#include <random>

#include "msls/fft.hpp"
#include "msls/image.hpp"

namespace msls {

enum class Boundary { Replicate, PeriodicAfterTaper };

inline ImageBuffer convolve_periodic(const ImageBuffer& img, const BlurKernel& k) {
    if (k.size() > img.width() || k.size() > img.height())
        throw Error("kernel exceeds image support");
    ImageBuffer out(img.width(), img.height());
    const int c = k.center();
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (int v = 0; v < k.size(); ++v)
                for (int u = 0; u < k.size(); ++u)
                    acc += k.at(u, v) * img.at_periodic(x - (u - c), y - (v - c));
            out.at(x, y) = acc;
        }
    }
    return out;
}

inline ImageBuffer convolve_replicate(const ImageBuffer& img, const BlurKernel& k) {
    if (k.size() > img.width() || k.size() > img.height())
        throw Error("kernel exceeds image support");
    ImageBuffer out(img.width(), img.height());
    const int c = k.center();
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (int v = 0; v < k.size(); ++v)
                for (int u = 0; u < k.size(); ++u)
                    acc += k.at(u, v) * img.at_clamped(x - (u - c), y - (v - c));
            out.at(x, y) = acc;
        }
    }
    return out;
}

// Circular convolution through the frequency domain.
inline ImageBuffer fft_convolve(const ImageBuffer& img, const BlurKernel& k) {
    Spectrum fi = fft2(img);
    Spectrum fk = kernel_spectrum(k, img.width(), img.height());
    for (size_t i = 0; i < fi.size(); ++i) fi[i] *= fk[i];
    return ifft2_real(std::move(fi), img.width(), img.height());
}

// Blends the image toward its own blurred copy inside a border of one kernel
// half-width, suppressing wraparound ringing in subsequent FFT operations.
inline ImageBuffer edge_taper(const ImageBuffer& img, const BlurKernel& k) {
    if (k.size() <= 1) return img;
    const int w = img.width(), h = img.height();
    const int margin = std::min({k.size(), w / 2, h / 2});
    if (margin < 1) return img;
    auto ramp = [margin](int i, int n) {
        double a = 1.0, b = 1.0;
        if (i < margin) a = 0.5 - 0.5 * std::cos(M_PI * (i + 0.5) / margin);
        if (n - 1 - i < margin) b = 0.5 - 0.5 * std::cos(M_PI * (n - 0.5 - i) / margin);
        return a * b;
    };
    ImageBuffer blurred = fft_convolve(img, k);
    ImageBuffer out(w, h);
    for (int y = 0; y < h; ++y) {
        double wy = ramp(y, h);
        for (int x = 0; x < w; ++x) {
            double a = ramp(x, w) * wy;
            out.at(x, y) = a * img.at(x, y) + (1.0 - a) * blurred.at(x, y);
        }
    }
    return out;
}

inline ImageBuffer convolve2d(const ImageBuffer& img, const BlurKernel& k,
                              Boundary boundary = Boundary::Replicate) {
    if (boundary == Boundary::Replicate) return convolve_replicate(img, k);
    return convolve_periodic(edge_taper(img, k), k);
}

// Forward differences [-1, 1].
inline ImageBuffer diff_x(const ImageBuffer& img, Boundary boundary = Boundary::Replicate) {
    ImageBuffer out(img.width(), img.height());
    const bool periodic = boundary == Boundary::PeriodicAfterTaper;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double next = periodic ? img.at_periodic(x + 1, y) : img.at_clamped(x + 1, y);
            out.at(x, y) = next - img.at(x, y);
        }
    return out;
}

inline ImageBuffer diff_y(const ImageBuffer& img, Boundary boundary = Boundary::Replicate) {
    ImageBuffer out(img.width(), img.height());
    const bool periodic = boundary == Boundary::PeriodicAfterTaper;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double next = periodic ? img.at_periodic(x, y + 1) : img.at_clamped(x, y + 1);
            out.at(x, y) = next - img.at(x, y);
        }
    return out;
}

// Order-2 members are exact compositions of the order-1 operators.
inline GradientField gradient(const ImageBuffer& img, int order,
                              Boundary boundary = Boundary::Replicate) {
    if (img.empty()) throw Error("gradient of empty image");
    if (order != 1 && order != 2) throw Error("gradient order must be 1 or 2");
    GradientField g;
    g.order = order;
    ImageBuffer dx = diff_x(img, boundary);
    ImageBuffer dy = diff_y(img, boundary);
    g.members.push_back(dx);
    g.members.push_back(dy);
    if (order == 2) {
        g.members.push_back(diff_x(dx, boundary));  // dxx
        g.members.push_back(diff_y(dy, boundary));  // dyy
        g.members.push_back(diff_y(dx, boundary));  // dxy
    }
    return g;
}

// Deterministic Gaussian sampler (Box-Muller over a fixed-width engine), so
// identical seeds give identical noise on every platform.
class GaussianSampler {
public:
    explicit GaussianSampler(uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform01();
        } while (u1 <= 1e-300);
        u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    double uniform01() {
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline ImageBuffer synth_blur(const ImageBuffer& x, const SyntheticBlurSpec& spec,
                              Boundary boundary = Boundary::Replicate) {
    if (spec.noise_sigma < 0.0) throw Error("noise sigma must be nonnegative");
    ImageBuffer b = convolve2d(x, spec.kernel, boundary);
    if (spec.noise_sigma > 0.0) {
        GaussianSampler rng(spec.seed);
        for (double& v : b.pixels()) v += spec.noise_sigma * rng();
    }
    return b;
}

}  // namespace msls
