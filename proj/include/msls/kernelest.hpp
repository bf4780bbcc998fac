// Gradient-domain kernel estimation with sparse error compensation:
// alternates a closed-form frequency-domain kernel solve with element-wise
// soft-thresholding of the compensation field.
#pragma once

#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "msls/conv.hpp"
#include "msls/fft.hpp"
#include "msls/image.hpp"

namespace msls {

// Gradient-domain auxiliary layers, one per derivative direction.
struct CompensationField {
    std::vector<ImageBuffer> members;

    static CompensationField zeros_like(const GradientField& g) {
        CompensationField v;
        for (const auto& m : g.members) v.members.emplace_back(m.width(), m.height(), 0.0);
        return v;
    }
};

// prox of lambda*|.|: sgn(z) * max(0, |z| - lambda)
inline double soft_threshold(double z, double lambda) {
    if (lambda < 0.0) throw Error("threshold must be nonnegative");
    double m = std::abs(z) - lambda;
    return m <= 0.0 ? 0.0 : (z < 0.0 ? -m : m);
}

// Raw frequency-domain solve, returned as an image-sized field with the
// kernel wrapped around the origin:
//   k = F^-1( sum_d conj(F(gx_d)) (F(gb_d) - F(v_d)) / (sum_d |F(gx_d)|^2 + 2 lambda) )
inline ImageBuffer solve_kernel_field(const GradientField& grad_xhat, const GradientField& grad_b,
                                      const CompensationField& v, double lambda) {
    if (grad_xhat.count() == 0 || grad_xhat.count() != grad_b.count() ||
        grad_xhat.count() != v.members.size())
        throw Error("gradient/compensation member mismatch");
    const int w = grad_xhat.members[0].width();
    const int h = grad_xhat.members[0].height();

    Spectrum num(static_cast<size_t>(w) * h, {0.0, 0.0});
    std::vector<double> den(static_cast<size_t>(w) * h, 2.0 * lambda);
    double grad_energy = 0.0;
    for (size_t d = 0; d < grad_xhat.count(); ++d) {
        Spectrum fx = fft2(grad_xhat.members[d]);
        Spectrum fb = fft2(grad_b.members[d]);
        Spectrum fv = fft2(v.members[d]);
        for (size_t i = 0; i < num.size(); ++i) {
            num[i] += std::conj(fx[i]) * (fb[i] - fv[i]);
            den[i] += std::norm(fx[i]);
        }
        for (double g : grad_xhat.members[d].pixels()) grad_energy += g * g;
    }
    if (grad_energy <= 1e-20) throw Error("degenerate data term");
    for (size_t i = 0; i < num.size(); ++i) num[i] /= den[i];
    ImageBuffer field = ifft2_real(std::move(num), w, h);
    if (!field.all_finite()) throw Error("kernel solve diverged");
    return field;
}

// Crop an origin-wrapped field to an odd support centered on the origin.
inline std::vector<double> crop_kernel_field(const ImageBuffer& field, int kernel_size) {
    const int c = kernel_size / 2;
    std::vector<double> raw(static_cast<size_t>(kernel_size) * kernel_size);
    for (int v = -c; v <= c; ++v)
        for (int u = -c; u <= c; ++u)
            raw[static_cast<size_t>(v + c) * kernel_size + (u + c)] = field.at_periodic(u, v);
    return raw;
}

// Standard kernel hygiene: clamp negatives, floor small entries, keep the
// dominant connected components, re-center by center of mass, normalize.
inline BlurKernel postprocess_kernel(std::vector<double> raw, int kernel_size,
                                     double floor_fraction = 0.05,
                                     double component_fraction = 0.10) {
    const int n = kernel_size;
    if (static_cast<int>(raw.size()) != n * n) throw Error("raw kernel size mismatch");
    double mx = 0.0;
    for (double& w : raw) {
        if (!std::isfinite(w)) throw Error("kernel solve diverged");
        if (w < 0.0) w = 0.0;
        mx = std::max(mx, w);
    }
    if (mx <= 0.0) throw Error("empty kernel estimate");
    for (double& w : raw)
        if (w < floor_fraction * mx) w = 0.0;

    // 8-connected component labelling.
    std::vector<int> label(raw.size(), -1);
    std::vector<double> mass;
    for (int i = 0; i < n * n; ++i) {
        if (raw[i] <= 0.0 || label[i] >= 0) continue;
        int id = static_cast<int>(mass.size());
        mass.push_back(0.0);
        std::queue<int> q;
        q.push(i);
        label[i] = id;
        while (!q.empty()) {
            int p = q.front();
            q.pop();
            mass[id] += raw[p];
            int px = p % n, py = p / n;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    int qx = px + dx, qy = py + dy;
                    if (qx < 0 || qy < 0 || qx >= n || qy >= n) continue;
                    int qi = qy * n + qx;
                    if (raw[qi] > 0.0 && label[qi] < 0) {
                        label[qi] = id;
                        q.push(qi);
                    }
                }
        }
    }
    double largest = 0.0;
    for (double m : mass) largest = std::max(largest, m);
    for (size_t i = 0; i < raw.size(); ++i)
        if (label[i] >= 0 && mass[label[i]] < component_fraction * largest) raw[i] = 0.0;

    // Re-center by center of mass (integer shift).
    double total = 0.0, cx = 0.0, cy = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double w = raw[static_cast<size_t>(y) * n + x];
            total += w;
            cx += w * x;
            cy += w * y;
        }
    if (total <= 0.0) throw Error("empty kernel estimate");
    int sx = static_cast<int>(std::lround(n / 2 - cx / total));
    int sy = static_cast<int>(std::lround(n / 2 - cy / total));
    BlurKernel k(n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            int tx = x + sx, ty = y + sy;
            if (tx < 0 || ty < 0 || tx >= n || ty >= n) continue;
            k.at(tx, ty) = raw[static_cast<size_t>(y) * n + x];
        }
    k.normalize();
    return k;
}

inline BlurKernel solve_kernel_fft(const GradientField& grad_xhat, const GradientField& grad_b,
                                   const CompensationField& v, double lambda, int kernel_size,
                                   double floor_fraction = 0.05, double component_fraction = 0.10) {
    ImageBuffer field = solve_kernel_field(grad_xhat, grad_b, v, lambda);
    return postprocess_kernel(crop_kernel_field(field, kernel_size), kernel_size, floor_fraction,
                              component_fraction);
}

struct KernelEstimate {
    BlurKernel kernel;
    CompensationField v;
    std::vector<double> objective;  // one value per (k, v) alternation
};

namespace detail {

// Apply a raw (unnormalized) kernel stencil by circular convolution.
inline ImageBuffer apply_raw_kernel(const std::vector<double>& raw, int n,
                                    const Spectrum& img_spec, int w, int h) {
    BlurKernel tmp(n);
    tmp.weights() = raw;
    ImageBuffer padded = pad_kernel_origin(tmp, w, h);
    Spectrum fk = fft2(padded);
    for (size_t i = 0; i < fk.size(); ++i) fk[i] *= img_spec[i];
    return ifft2_real(std::move(fk), w, h);
}

inline BlurKernel taper_kernel(int size) {
    BlurKernel g(size);
    double sigma = std::max(0.5, size / 4.0);
    int c = g.center();
    for (int v = 0; v < size; ++v)
        for (int u = 0; u < size; ++u)
            g.at(u, v) = std::exp(-0.5 * ((u - c) * (u - c) + (v - c) * (v - c)) / (sigma * sigma));
    g.normalize();
    return g;
}

}  // namespace detail

struct KernelEstimateConfig {
    double lambda_kernel = 5.0;    // l2 weight on k
    double lambda_sparse = 0.05;   // l1 weight on v
    int alternations = 4;
    double floor_fraction = 0.05;
    double component_fraction = 0.10;
    bool taper = true;
};

// Alternating minimization of
//   1/2 sum_d ||k (x) grad_d xhat + v_d - grad_d b||^2
//     + lambda_k ||k||^2 + lambda_s ||v||_1
// over (k, v). Returns the post-processed kernel and the final field.
inline KernelEstimate estimate_kernel(const ImageBuffer& xhat, const ImageBuffer& b,
                                      const KernelEstimateConfig& cfg, int order,
                                      int kernel_size) {
    if (!xhat.same_dims(b)) throw Error("image dimensions mismatch");
    if (kernel_size == 1) {
        KernelEstimate e;
        e.kernel = BlurKernel::delta(1);
        GradientField g = gradient(b, order, Boundary::PeriodicAfterTaper);
        e.v = CompensationField::zeros_like(g);
        return e;
    }
    ImageBuffer xt = xhat, bt = b;
    if (cfg.taper) {
        BlurKernel tk = detail::taper_kernel(kernel_size);
        xt = edge_taper(xhat, tk);
        bt = edge_taper(b, tk);
    }
    GradientField gx = gradient(xt, order, Boundary::PeriodicAfterTaper);
    GradientField gb = gradient(bt, order, Boundary::PeriodicAfterTaper);
    CompensationField v = CompensationField::zeros_like(gx);

    const int w = b.width(), h = b.height();
    std::vector<Spectrum> gx_spec;
    for (const auto& m : gx.members) gx_spec.push_back(fft2(m));

    // The closed-form solve is optimal for the uncropped field only, so the
    // crop can raise the objective; a monotone safeguard keeps the previous
    // kernel whenever the new one does not improve it at the current v.
    auto objective_at = [&](const std::vector<ImageBuffer>& conv, const std::vector<double>& k_raw) {
        double obj = 0.0, knorm2 = 0.0, vnorm1 = 0.0;
        for (double kw : k_raw) knorm2 += kw * kw;
        for (size_t d = 0; d < gx.count(); ++d)
            for (size_t i = 0; i < conv[d].size(); ++i) {
                double r = conv[d].data()[i] + v.members[d].data()[i] - gb.members[d].data()[i];
                obj += 0.5 * r * r;
                vnorm1 += std::abs(v.members[d].data()[i]);
            }
        return obj + cfg.lambda_kernel * knorm2 + cfg.lambda_sparse * vnorm1;
    };

    KernelEstimate est;
    std::vector<double> raw;
    std::vector<ImageBuffer> conv;
    double last_obj = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.alternations; ++it) {
        ImageBuffer field = solve_kernel_field(gx, gb, v, cfg.lambda_kernel);
        std::vector<double> raw_new = crop_kernel_field(field, kernel_size);
        std::vector<ImageBuffer> conv_new;
        for (size_t d = 0; d < gx.count(); ++d)
            conv_new.push_back(detail::apply_raw_kernel(raw_new, kernel_size, gx_spec[d], w, h));
        if (it == 0 || objective_at(conv_new, raw_new) <= last_obj) {
            raw = std::move(raw_new);
            conv = std::move(conv_new);
        }

        // v-update: prox on the residual of the accepted kernel.
        for (size_t d = 0; d < gx.count(); ++d)
            for (size_t i = 0; i < conv[d].size(); ++i)
                v.members[d].data()[i] =
                    soft_threshold(gb.members[d].data()[i] - conv[d].data()[i], cfg.lambda_sparse);
        last_obj = objective_at(conv, raw);
        est.objective.push_back(last_obj);
    }
    est.kernel =
        postprocess_kernel(raw, kernel_size, cfg.floor_fraction, cfg.component_fraction);
    est.v = std::move(v);
    return est;
}

}  // namespace msls
