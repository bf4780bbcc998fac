// Spatially varying blur as a weighted sum of projective transforms.
// Kernel weights are solved with matrix-free conjugate gradients and the
// image with a CG-inner ADMM, since the frequency-domain shortcuts no longer
// apply.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "msls/conv.hpp"
#include "msls/image.hpp"
#include "msls/kernelest.hpp"
#include "msls/pipeline.hpp"

namespace msls {

enum class WarpBorder { Replicate, Periodic };

// 3x3 homogeneous sampling map: output pixel p reads the source at H*p.
struct Pose {
    double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

    bool is_identity(double tol = 1e-12) const {
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                if (std::abs(m[r][c] - (r == c ? 1.0 : 0.0)) > tol) return false;
        return true;
    }
};

inline Pose translation_pose(double dx, double dy) {
    Pose p;
    p.m[0][2] = -dx;
    p.m[1][2] = -dy;
    return p;
}

// In-plane rotation about the image center combined with a translation.
inline Pose rotation_translation_pose(double theta_rad, double dx, double dy, double cx,
                                      double cy) {
    Pose p;
    double c = std::cos(theta_rad), s = std::sin(theta_rad);
    // sample = R(-theta) about center, then shifted: p -> R(p - c) + c - d
    p.m[0][0] = c;  p.m[0][1] = s;  p.m[0][2] = cx - c * cx - s * cy - dx;
    p.m[1][0] = -s; p.m[1][1] = c;  p.m[1][2] = cy + s * cx - c * cy - dy;
    return p;
}

struct PoseBasis {
    std::vector<Pose> poses;
    int identity_index = -1;

    size_t size() const { return poses.size(); }
};

struct PoseWeights {
    std::vector<double> k;

    void clamp_normalize() {
        double s = 0.0;
        for (double& w : k) {
            if (w < 0.0) w = 0.0;
            s += w;
        }
        if (s <= 0.0) throw Error("empty kernel estimate");
        for (double& w : k) w /= s;
    }
};

// Translation-only basis mirroring an n x n kernel in raster order; weights
// taken from a flattened kernel make apply_pose_blur equal convolve2d.
inline PoseBasis translation_basis(int n) {
    if (n <= 0 || n % 2 == 0) throw Error("basis size must be odd");
    PoseBasis b;
    const int c = n / 2;
    for (int v = 0; v < n; ++v)
        for (int u = 0; u < n; ++u) {
            b.poses.push_back(translation_pose(u - c, v - c));
            if (u == c && v == c) b.identity_index = static_cast<int>(b.poses.size()) - 1;
        }
    return b;
}

struct PoseGridConfig {
    double rot_extent_deg = 2.0;
    int rot_steps = 5;        // odd, so the grid contains 0
    double trans_extent = 2.0;  // pixels, per axis
    int trans_steps = 5;      // odd
};

inline PoseBasis make_pose_grid(const PoseGridConfig& cfg, int width, int height) {
    if (cfg.rot_steps < 1 || cfg.trans_steps < 1 || cfg.rot_steps % 2 == 0 ||
        cfg.trans_steps % 2 == 0)
        throw Error("pose grid steps must be odd and positive");
    PoseBasis b;
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    for (int r = 0; r < cfg.rot_steps; ++r) {
        double theta = cfg.rot_steps == 1
                           ? 0.0
                           : (-cfg.rot_extent_deg +
                              2.0 * cfg.rot_extent_deg * r / (cfg.rot_steps - 1)) *
                                 M_PI / 180.0;
        for (int ty = 0; ty < cfg.trans_steps; ++ty) {
            for (int tx = 0; tx < cfg.trans_steps; ++tx) {
                double dx = cfg.trans_steps == 1
                                ? 0.0
                                : -cfg.trans_extent +
                                      2.0 * cfg.trans_extent * tx / (cfg.trans_steps - 1);
                double dy = cfg.trans_steps == 1
                                ? 0.0
                                : -cfg.trans_extent +
                                      2.0 * cfg.trans_extent * ty / (cfg.trans_steps - 1);
                Pose p = rotation_translation_pose(theta, dx, dy, cx, cy);
                b.poses.push_back(p);
                if (p.is_identity(1e-9)) b.identity_index = static_cast<int>(b.poses.size()) - 1;
            }
        }
    }
    if (b.identity_index < 0) {
        b.poses.push_back(Pose{});
        b.identity_index = static_cast<int>(b.poses.size()) - 1;
    }
    return b;
}

namespace detail {

struct Tap {
    int idx;
    double w;
};

// Bilinear sample coefficients for one output pixel; at most 4 taps. The
// same taps drive the forward warp and its exact adjoint.
inline int sample_taps(const Pose& p, int x, int y, int w, int h, WarpBorder border, Tap out[4]) {
    double sx = p.m[0][0] * x + p.m[0][1] * y + p.m[0][2];
    double sy = p.m[1][0] * x + p.m[1][1] * y + p.m[1][2];
    double sw = p.m[2][0] * x + p.m[2][1] * y + p.m[2][2];
    sx /= sw;
    sy /= sw;
    if (border == WarpBorder::Replicate) {
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    }
    int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    double fx = sx - x0, fy = sy - y0;
    auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
    auto clampi = [](int i, int n) { return std::clamp(i, 0, n - 1); };
    int xs[2], ys[2];
    if (border == WarpBorder::Periodic) {
        xs[0] = wrap(x0, w); xs[1] = wrap(x0 + 1, w);
        ys[0] = wrap(y0, h); ys[1] = wrap(y0 + 1, h);
    } else {
        xs[0] = clampi(x0, w); xs[1] = clampi(x0 + 1, w);
        ys[0] = clampi(y0, h); ys[1] = clampi(y0 + 1, h);
    }
    double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    int n = 0;
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            double wt = ws[j * 2 + i];
            if (wt == 0.0) continue;
            out[n++] = {ys[j] * w + xs[i], wt};
        }
    return n;
}

}  // namespace detail

inline ImageBuffer warp(const ImageBuffer& img, const Pose& p,
                        WarpBorder border = WarpBorder::Replicate) {
    ImageBuffer out(img.width(), img.height());
    detail::Tap taps[4];
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            int n = detail::sample_taps(p, x, y, img.width(), img.height(), border, taps);
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += taps[i].w * img.data()[taps[i].idx];
            out.at(x, y) = acc;
        }
    return out;
}

// Exact transpose of warp: scatter each output value back through its taps.
inline ImageBuffer warp_adjoint(const ImageBuffer& img, const Pose& p,
                                WarpBorder border = WarpBorder::Replicate) {
    ImageBuffer out(img.width(), img.height(), 0.0);
    detail::Tap taps[4];
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            int n = detail::sample_taps(p, x, y, img.width(), img.height(), border, taps);
            double v = img.at(x, y);
            for (int i = 0; i < n; ++i) out.data()[taps[i].idx] += taps[i].w * v;
        }
    return out;
}

inline ImageBuffer apply_pose_blur(const ImageBuffer& x, const PoseWeights& w,
                                   const PoseBasis& basis,
                                   WarpBorder border = WarpBorder::Replicate) {
    if (w.k.size() != basis.size()) throw Error("weight/basis size mismatch");
    ImageBuffer out(x.width(), x.height(), 0.0);
    for (size_t i = 0; i < basis.size(); ++i) {
        if (w.k[i] == 0.0) continue;
        ImageBuffer wi = warp(x, basis.poses[i], border);
        for (size_t n = 0; n < out.size(); ++n) out.data()[n] += w.k[i] * wi.data()[n];
    }
    return out;
}

inline ImageBuffer apply_pose_blur_adjoint(const ImageBuffer& r, const PoseWeights& w,
                                           const PoseBasis& basis,
                                           WarpBorder border = WarpBorder::Replicate) {
    ImageBuffer out(r.width(), r.height(), 0.0);
    for (size_t i = 0; i < basis.size(); ++i) {
        if (w.k[i] == 0.0) continue;
        ImageBuffer wi = warp_adjoint(r, basis.poses[i], border);
        for (size_t n = 0; n < out.size(); ++n) out.data()[n] += w.k[i] * wi.data()[n];
    }
    return out;
}

struct CgResult {
    int iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_history;
};

// Plain CG for an SPD operator given as a callable.
inline CgResult conjugate_gradient(
    const std::function<std::vector<double>(const std::vector<double>&)>& apply,
    const std::vector<double>& rhs, std::vector<double>& x, double rel_tol, int max_iter) {
    const size_t n = rhs.size();
    if (x.size() != n) x.assign(n, 0.0);
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };
    std::vector<double> r = rhs;
    std::vector<double> ax = apply(x);
    for (size_t i = 0; i < n; ++i) r[i] -= ax[i];
    std::vector<double> p = r;
    double rr = dot(r, r);
    double b_norm = std::sqrt(dot(rhs, rhs));
    if (b_norm == 0.0) b_norm = 1.0;
    CgResult res;
    res.residual = std::sqrt(rr) / b_norm;
    res.residual_history.push_back(res.residual);
    for (int it = 0; it < max_iter && res.residual > rel_tol; ++it) {
        std::vector<double> ap = apply(p);
        double pap = dot(p, ap);
        if (pap <= 0.0) break;
        double alpha = rr / pap;
        for (size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        double rr_new = dot(r, r);
        for (size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
        rr = rr_new;
        res.iterations = it + 1;
        res.residual = std::sqrt(rr) / b_norm;
        res.residual_history.push_back(res.residual);
    }
    return res;
}

struct NuKernelEstimate {
    PoseWeights weights;
    CompensationField v;
};

struct NuEstimateConfig {
    double lambda_kernel = 5.0;
    double lambda_sparse = 0.05;
    int alternations = 4;
    double cg_tol = 1e-5;
    int cg_max_iter = 50;
    bool taper = true;
    WarpBorder border = WarpBorder::Replicate;
};

// Non-uniform analogue of estimate_kernel: CG on the weight normal equations
//   (B^T B + 2 lambda I) k = B^T (grad b - v)
// with B applied matrix-free through pose warps of the gradient images,
// alternated with soft-thresholding of v.
inline NuKernelEstimate estimate_nu_kernel(const ImageBuffer& xhat, const ImageBuffer& b,
                                           const PoseBasis& basis, const NuEstimateConfig& cfg,
                                           int order = 1) {
    if (!xhat.same_dims(b)) throw Error("image dimensions mismatch");
    ImageBuffer xt = xhat, bt = b;
    if (cfg.taper) {
        BlurKernel tk = detail::taper_kernel(std::min({15, xhat.width() | 1, xhat.height() | 1}));
        xt = edge_taper(xhat, tk);
        bt = edge_taper(b, tk);
    }
    Boundary gb_boundary =
        cfg.border == WarpBorder::Periodic ? Boundary::PeriodicAfterTaper : Boundary::Replicate;
    GradientField gx = gradient(xt, order, gb_boundary);
    GradientField gb = gradient(bt, order, gb_boundary);
    CompensationField v = CompensationField::zeros_like(gx);

    const size_t np = basis.size();
    const size_t d = gx.count();
    const size_t npx = xhat.size();

    // Precompute warped gradients: columns of B.
    std::vector<std::vector<ImageBuffer>> cols(np);
    for (size_t i = 0; i < np; ++i)
        for (size_t dd = 0; dd < d; ++dd)
            cols[i].push_back(warp(gx.members[dd], basis.poses[i], cfg.border));

    auto apply_B = [&](const std::vector<double>& w) {
        std::vector<ImageBuffer> out;
        for (size_t dd = 0; dd < d; ++dd) out.emplace_back(b.width(), b.height(), 0.0);
        for (size_t i = 0; i < np; ++i) {
            if (w[i] == 0.0) continue;
            for (size_t dd = 0; dd < d; ++dd)
                for (size_t n = 0; n < npx; ++n)
                    out[dd].data()[n] += w[i] * cols[i][dd].data()[n];
        }
        return out;
    };
    auto apply_Bt = [&](const std::vector<ImageBuffer>& r) {
        std::vector<double> out(np, 0.0);
        for (size_t i = 0; i < np; ++i)
            for (size_t dd = 0; dd < d; ++dd)
                for (size_t n = 0; n < npx; ++n)
                    out[i] += cols[i][dd].data()[n] * r[dd].data()[n];
        return out;
    };
    auto apply_normal = [&](const std::vector<double>& w) {
        std::vector<double> out = apply_Bt(apply_B(w));
        for (size_t i = 0; i < np; ++i) out[i] += 2.0 * cfg.lambda_kernel * w[i];
        return out;
    };

    std::vector<double> weights(np, 0.0);
    if (basis.identity_index >= 0) weights[basis.identity_index] = 1.0;
    for (int it = 0; it < cfg.alternations; ++it) {
        std::vector<ImageBuffer> rhs_field;
        for (size_t dd = 0; dd < d; ++dd) rhs_field.push_back(gb.members[dd] - v.members[dd]);
        std::vector<double> rhs = apply_Bt(rhs_field);
        CgResult cg = conjugate_gradient(apply_normal, rhs, weights, cfg.cg_tol, cfg.cg_max_iter);
        if (!std::isfinite(cg.residual)) throw Error("non-uniform solve did not converge");

        std::vector<ImageBuffer> bw = apply_B(weights);
        for (size_t dd = 0; dd < d; ++dd)
            for (size_t n = 0; n < npx; ++n) {
                double z = gb.members[dd].data()[n] - bw[dd].data()[n];
                v.members[dd].data()[n] = soft_threshold(z, cfg.lambda_sparse);
            }
    }
    NuKernelEstimate est;
    est.weights.k = std::move(weights);
    est.weights.clamp_normalize();
    est.v = std::move(v);
    return est;
}

// Non-uniform TV deblurring: ADMM whose x-update is a CG solve of
//   (A^T A + rho D^T D) x = A^T b + rho D^T (z - u).
inline ImageBuffer nu_tv_deblur(const ImageBuffer& b, const PoseWeights& w, const PoseBasis& basis,
                                double mu, const AdmmConfig& cfg = {},
                                WarpBorder border = WarpBorder::Replicate,
                                double cg_tol = 1e-6, int cg_max_iter = 50,
                                bool clamp_output = true) {
    if (mu <= 0.0) throw Error("mu must be positive");
    const int width = b.width(), height = b.height();
    const size_t n = b.size();
    Boundary gbd = border == WarpBorder::Periodic ? Boundary::PeriodicAfterTaper
                                                  : Boundary::Replicate;

    auto grad = [&](const ImageBuffer& img) {
        return std::pair<ImageBuffer, ImageBuffer>{diff_x(img, gbd), diff_y(img, gbd)};
    };
    // Adjoint of the forward-difference pair (negative divergence).
    auto grad_adjoint = [&](const ImageBuffer& gx, const ImageBuffer& gy) {
        ImageBuffer out(width, height, 0.0);
        const bool periodic = gbd == Boundary::PeriodicAfterTaper;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double v = gx.at(x, y);
                out.at(x, y) -= v;
                int xn = x + 1;
                if (periodic)
                    out.at(xn % width, y) += v;
                else if (xn < width)
                    out.at(xn, y) += v;
                else
                    out.at(x, y) += v;  // clamped read in diff_x
                double vy = gy.at(x, y);
                out.at(x, y) -= vy;
                int yn = y + 1;
                if (periodic)
                    out.at(x, yn % height) += vy;
                else if (yn < height)
                    out.at(x, yn) += vy;
                else
                    out.at(x, y) += vy;
            }
        return out;
    };

    const double rho = cfg.rho;
    auto apply_normal = [&](const std::vector<double>& xv) {
        ImageBuffer x(width, height);
        std::copy(xv.begin(), xv.end(), x.data());
        ImageBuffer ax = apply_pose_blur(x, w, basis, border);
        ImageBuffer atax = apply_pose_blur_adjoint(ax, w, basis, border);
        auto [gx, gy] = grad(x);
        ImageBuffer dtd = grad_adjoint(gx, gy);
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = atax.data()[i] + rho * dtd.data()[i];
        return out;
    };

    ImageBuffer atb = apply_pose_blur_adjoint(b, w, basis, border);
    ImageBuffer x = b;
    ImageBuffer zx(width, height, 0.0), zy(width, height, 0.0);
    ImageBuffer ux(width, height, 0.0), uy(width, height, 0.0);
    std::vector<double> xv(x.data(), x.data() + n);

    for (int it = 0; it < cfg.iterations; ++it) {
        ImageBuffer dtr = grad_adjoint(zx - ux, zy - uy);
        std::vector<double> rhs(n);
        for (size_t i = 0; i < n; ++i) rhs[i] = atb.data()[i] + rho * dtr.data()[i];
        conjugate_gradient(apply_normal, rhs, xv, cg_tol, cg_max_iter);
        std::copy(xv.begin(), xv.end(), x.data());
        if (!x.all_finite()) throw Error("ADMM diverged");

        auto [gx, gy] = grad(x);
        double primal2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            zx.data()[i] = soft_threshold(gx.data()[i] + ux.data()[i], mu / rho);
            zy.data()[i] = soft_threshold(gy.data()[i] + uy.data()[i], mu / rho);
            double px = gx.data()[i] - zx.data()[i];
            double py = gy.data()[i] - zy.data()[i];
            ux.data()[i] += px;
            uy.data()[i] += py;
            primal2 += px * px + py * py;
        }
        if (std::sqrt(primal2) < cfg.primal_tol * std::sqrt(static_cast<double>(n))) break;
    }
    if (clamp_output) x.clamp01();
    return x;
}

struct NuDeblurResult {
    PoseWeights weights;
    PoseBasis basis;
    ImageBuffer latent;
};

// MSLS pyramid with the non-uniform solvers substituted. The translation
// extent of the pose grid shrinks with the pyramid level; the rotation grid
// is kept fixed.
inline NuDeblurResult nu_blind_deblur(const ImageBuffer& b, const DeblurConfig& cfg,
                                      const PoseGridConfig& grid_cfg,
                                      WarpBorder border = WarpBorder::Replicate) {
    cfg.validate();
    ScaleSchedule sched = build_schedule(b.width(), b.height(), cfg.kernel_size, cfg.beta);
    std::vector<ImageBuffer> pyr(sched.n_levels());
    pyr.back() = b;
    for (int l = sched.n_levels() - 2; l >= 0; --l) {
        ImageBuffer down = lowpass_downsample(pyr[l + 1], cfg.beta);
        if (down.width() != sched.levels[l].width || down.height() != sched.levels[l].height)
            down = resize_to(down, sched.levels[l].width, sched.levels[l].height);
        pyr[l] = down;
    }

    NuEstimateConfig ne;
    ne.lambda_kernel = cfg.lambda1;
    ne.lambda_sparse = cfg.lambda2;
    ne.alternations = cfg.inner_alternations;
    ne.border = border;

    NuDeblurResult res;
    ImageBuffer x_pr = lowpass_downsample(pyr[0], cfg.beta);
    for (int l = 0; l < sched.n_levels(); ++l) {
        const ImageBuffer& b_l = pyr[l];
        PoseGridConfig level_grid = grid_cfg;
        level_grid.trans_extent = grid_cfg.trans_extent / sched.levels[l].factor;
        PoseBasis basis = make_pose_grid(level_grid, b_l.width(), b_l.height());
        ImageBuffer x_l = b_l;
        NuKernelEstimate est;
        est.weights.k.assign(basis.size(), 0.0);
        est.weights.k[basis.identity_index] = 1.0;
        for (int it = 0; it < cfg.max_iteration; ++it) {
            ImageBuffer xhat = reconstruct_sharp(x_l, x_pr, detail::patch_cfg(cfg));
            est = estimate_nu_kernel(xhat, b_l, basis, ne, /*order=*/1);
            x_l = nu_tv_deblur(b_l, est.weights, basis, cfg.mu, cfg.admm, border);
        }
        res.weights = est.weights;
        res.basis = basis;
        res.latent = x_l;
        x_pr = x_l;
    }
    return res;
}

}  // namespace msls
