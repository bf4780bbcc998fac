// TV-regularized non-blind deconvolution:
//   min_x 1/2 ||k (x) x - b||^2 + mu ||grad x||_1
// solved by ADMM with frequency-domain x-updates and shrinkage z-updates.
// Anisotropic TV (|dx| + |dy|) keeps the prox separable.
#pragma once

#include <cmath>
#include <vector>

#include "msls/conv.hpp"
#include "msls/fft.hpp"
#include "msls/image.hpp"
#include "msls/kernelest.hpp"

namespace msls {

struct AdmmTrace {
    std::vector<double> objective;        // augmented Lagrangian per iteration
    std::vector<double> primal_residual;  // ||grad x - z||_2 per iteration
    int iterations = 0;
};

namespace detail {

inline ImageBuffer grad_x_periodic(const ImageBuffer& img) {
    return diff_x(img, Boundary::PeriodicAfterTaper);
}
inline ImageBuffer grad_y_periodic(const ImageBuffer& img) {
    return diff_y(img, Boundary::PeriodicAfterTaper);
}

}  // namespace detail

inline ImageBuffer tv_deblur(const ImageBuffer& b, const BlurKernel& k, double mu,
                             const AdmmConfig& cfg = {}, AdmmTrace* trace = nullptr,
                             bool clamp_output = true) {
    if (!k.is_normalized(1e-6)) throw Error("kernel must be normalized");
    if (mu <= 0.0) throw Error("mu must be positive");
    if (cfg.rho <= 0.0) throw Error("ADMM penalty must be positive");
    const int w = b.width(), h = b.height();

    ImageBuffer bt = edge_taper(b, k);
    Spectrum fb = fft2(bt);
    Spectrum fk = kernel_spectrum(k, w, h);

    // Periodic forward-difference stencils as spectra.
    // Forward-difference stencils; with the centered-convolution convention a
    // tap at index 0 reads img(x+1).
    BlurKernel dx(3), dy(3);
    dx.at(0, 1) = 1.0; dx.at(1, 1) = -1.0;  // x+1 minus x
    dy.at(1, 0) = 1.0; dy.at(1, 1) = -1.0;
    Spectrum fdx = kernel_spectrum(dx, w, h);
    Spectrum fdy = kernel_spectrum(dy, w, h);

    const double rho = cfg.rho;
    std::vector<double> denom(fb.size());
    Spectrum kb(fb.size());
    for (size_t i = 0; i < fb.size(); ++i) {
        denom[i] = std::norm(fk[i]) + rho * (std::norm(fdx[i]) + std::norm(fdy[i]));
        kb[i] = std::conj(fk[i]) * fb[i];
    }

    ImageBuffer x = bt;
    ImageBuffer zx(w, h, 0.0), zy(w, h, 0.0), ux(w, h, 0.0), uy(w, h, 0.0);

    for (int it = 0; it < cfg.iterations; ++it) {
        // x-update: quadratic solve in the frequency domain.
        ImageBuffer rx = zx - ux, ry = zy - uy;
        Spectrum frx = fft2(rx), fry = fft2(ry);
        Spectrum num(fb.size());
        for (size_t i = 0; i < fb.size(); ++i)
            num[i] = (kb[i] + rho * (std::conj(fdx[i]) * frx[i] + std::conj(fdy[i]) * fry[i])) /
                     denom[i];
        x = ifft2_real(std::move(num), w, h);
        if (!x.all_finite()) throw Error("ADMM diverged");

        ImageBuffer gx = detail::grad_x_periodic(x);
        ImageBuffer gy = detail::grad_y_periodic(x);

        // z-update: shrinkage; u-update: dual ascent.
        double primal2 = 0.0;
        for (size_t i = 0; i < x.size(); ++i) {
            zx.data()[i] = soft_threshold(gx.data()[i] + ux.data()[i], mu / rho);
            zy.data()[i] = soft_threshold(gy.data()[i] + uy.data()[i], mu / rho);
            double px = gx.data()[i] - zx.data()[i];
            double py = gy.data()[i] - zy.data()[i];
            ux.data()[i] += px;
            uy.data()[i] += py;
            primal2 += px * px + py * py;
        }
        double primal = std::sqrt(primal2);

        if (trace) {
            ImageBuffer kx = fft_convolve(x, k);
            double data = 0.0, tv = 0.0, aug = 0.0;
            for (size_t i = 0; i < x.size(); ++i) {
                double r = kx.data()[i] - bt.data()[i];
                data += 0.5 * r * r;
                tv += std::abs(zx.data()[i]) + std::abs(zy.data()[i]);
                double px = gx.data()[i] - zx.data()[i] + ux.data()[i];
                double py = gy.data()[i] - zy.data()[i] + uy.data()[i];
                double cx = ux.data()[i], cy = uy.data()[i];
                aug += 0.5 * rho * (px * px + py * py) - 0.5 * rho * (cx * cx + cy * cy);
            }
            trace->objective.push_back(data + mu * tv + aug);
            trace->primal_residual.push_back(primal);
            trace->iterations = it + 1;
        }
        if (primal < cfg.primal_tol * std::sqrt(static_cast<double>(x.size()))) {
            if (trace) trace->iterations = it + 1;
            break;
        }
    }
    if (clamp_output) x.clamp01();
    return x;
}

}  // namespace msls
