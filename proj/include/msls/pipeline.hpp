// Blind deblurring orchestration: preliminary coarse-to-fine restoration
// followed by a refinement pass in the finest scale.
#pragma once

#include <chrono>
#include <vector>

#include "msls/guided.hpp"
#include "msls/image.hpp"
#include "msls/kernelest.hpp"
#include "msls/nonblind.hpp"
#include "msls/patchmatch.hpp"
#include "msls/pyramid.hpp"

namespace msls {

struct TraceEntry {
    int level = 0;       // schedule level, or -1 for refinement iterations
    int iteration = 0;
    int kernel_size = 1;
    double objective = 0.0;      // final kernel-estimation objective
    double kernel_entropy = 0.0;
    BlurKernel kernel;
};

struct DeblurResult {
    BlurKernel kernel;
    ImageBuffer latent;
    std::vector<TraceEntry> trace;
    double preliminary_seconds = 0.0;
    double refine_seconds = 0.0;
};

inline double kernel_entropy(const BlurKernel& k) {
    double e = 0.0;
    for (double w : k.weights())
        if (w > 0.0) e -= w * std::log(w);
    return e;
}

namespace detail {

inline PatchMatchConfig patch_cfg(const DeblurConfig& cfg) {
    return {cfg.patch_size, cfg.patch_stride, cfg.search_window};
}

inline KernelEstimateConfig kernel_cfg(const DeblurConfig& cfg, bool refine) {
    KernelEstimateConfig kc;
    kc.lambda_kernel = refine ? cfg.lambda3 : cfg.lambda1;
    kc.lambda_sparse = refine ? cfg.lambda4 : cfg.lambda2;
    kc.alternations = cfg.inner_alternations;
    kc.floor_fraction = cfg.kernel_floor_fraction;
    kc.component_fraction = cfg.kernel_component_fraction;
    return kc;
}

}  // namespace detail

// Algorithm: walk the pyramid from the coarsest level up. At every level the
// latent image starts as the blurry level image and the kernel as a delta;
// each alternation reconstructs a sharp estimate from the prior, re-estimates
// the kernel, and runs a non-blind TV solve. The restored level becomes the
// next finer level's prior.
inline DeblurResult preliminary_restore(const ImageBuffer& b, const DeblurConfig& cfg) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();
    ScaleSchedule sched = build_schedule(b.width(), b.height(), cfg.kernel_size, cfg.beta);

    // Chain the pyramid finest -> coarser with per-step factor beta.
    std::vector<ImageBuffer> pyr(sched.n_levels());
    pyr.back() = b;
    for (int l = sched.n_levels() - 2; l >= 0; --l) {
        ImageBuffer down = lowpass_downsample(pyr[l + 1], cfg.beta);
        if (down.width() != sched.levels[l].width || down.height() != sched.levels[l].height)
            down = resize_to(down, sched.levels[l].width, sched.levels[l].height);
        pyr[l] = down;
    }

    DeblurResult res;
    ImageBuffer x_pr = lowpass_downsample(pyr[0], cfg.beta);
    for (int l = 0; l < sched.n_levels(); ++l) {
        const ImageBuffer& b_l = pyr[l];
        const int ks = sched.levels[l].kernel_size;
        ImageBuffer x_l = b_l;
        BlurKernel k = BlurKernel::delta(ks);
        double last_obj = 0.0;
        for (int it = 0; it < cfg.max_iteration; ++it) {
            ImageBuffer xhat = reconstruct_sharp(x_l, x_pr, detail::patch_cfg(cfg));
            KernelEstimate est = estimate_kernel(xhat, b_l, detail::kernel_cfg(cfg, false),
                                                 /*order=*/1, ks);
            k = est.kernel;
            last_obj = est.objective.empty() ? 0.0 : est.objective.back();
            x_l = tv_deblur(b_l, k, cfg.mu, cfg.admm);
        }
        res.trace.push_back({l, cfg.max_iteration, ks, last_obj, kernel_entropy(k), k});
        res.kernel = k;
        res.latent = x_l;
        x_pr = x_l;
    }
    res.preliminary_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

struct RefineConfig {
    int guided_radius = 4;
    double guided_eps = 1e-4;  // 0.01^2 in intensity units squared
};

// Finest-scale refinement: the prior is rebuilt every iteration by guided
// filtering and beta-down-sampling the current latent image, and the kernel
// solve uses first- plus second-order derivatives.
inline DeblurResult refine_restore(const ImageBuffer& b, const ImageBuffer& x_tilde,
                                   const DeblurConfig& cfg, const RefineConfig& rcfg = {}) {
    cfg.validate();
    if (!b.same_dims(x_tilde)) throw Error("image dimensions mismatch");
    auto t0 = std::chrono::steady_clock::now();
    DeblurResult res;
    res.kernel = BlurKernel::delta(cfg.kernel_size);
    res.latent = x_tilde;
    ImageBuffer x_l = x_tilde;
    for (int it = 0; it < cfg.max_iteration; ++it) {
        ImageBuffer filtered = guided_filter(x_l, x_l, rcfg.guided_radius, rcfg.guided_eps);
        ImageBuffer x_pr = lowpass_downsample(filtered, cfg.beta);
        ImageBuffer xhat = reconstruct_sharp(x_l, x_pr, detail::patch_cfg(cfg));
        KernelEstimate est = estimate_kernel(xhat, b, detail::kernel_cfg(cfg, true),
                                             /*order=*/2, cfg.kernel_size);
        x_l = tv_deblur(b, est.kernel, cfg.mu, cfg.admm);
        res.kernel = est.kernel;
        res.latent = x_l;
        res.trace.push_back({-1, it + 1, cfg.kernel_size,
                             est.objective.empty() ? 0.0 : est.objective.back(),
                             kernel_entropy(est.kernel), est.kernel});
    }
    res.refine_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace detail {

// Mean squared residual between the re-blurred latent and the edge-tapered
// observation: how well a (kernel, latent) pair explains what was captured.
inline double reblur_fidelity(const ImageBuffer& b, const BlurKernel& k,
                              const ImageBuffer& latent) {
    ImageBuffer bt = edge_taper(b, k);
    ImageBuffer pred = fft_convolve(latent, k);
    double s = 0.0;
    for (size_t i = 0; i < b.size(); ++i) {
        double r = pred.data()[i] - bt.data()[i];
        s += r * r;
    }
    return s / static_cast<double>(b.size());
}

}  // namespace detail

// Full blind pipeline on a luminance image. Refinement can drift on large
// kernels when the preliminary latent under-represents fine texture, so the
// final kernel is whichever of the preliminary and refined estimates re-blurs
// the observation more faithfully.
inline DeblurResult blind_deblur(const ImageBuffer& b, const DeblurConfig& cfg,
                                 const RefineConfig& rcfg = {}) {
    DeblurResult pre = preliminary_restore(b, cfg);
    DeblurResult ref = refine_restore(b, pre.latent, cfg, rcfg);
    if (cfg.max_iteration == 0) return pre;
    ref.trace.insert(ref.trace.begin(), pre.trace.begin(), pre.trace.end());
    ref.preliminary_seconds = pre.preliminary_seconds;
    if (detail::reblur_fidelity(b, pre.kernel, pre.latent) <
        detail::reblur_fidelity(b, ref.kernel, ref.latent))
        ref.kernel = pre.kernel;
    ref.latent = tv_deblur(b, ref.kernel, cfg.mu, cfg.admm);
    return ref;
}

}  // namespace msls
