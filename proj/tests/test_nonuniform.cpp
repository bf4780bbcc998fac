#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "msls/metrics.hpp"
#include "msls/nonuniform.hpp"
#include "msls/synthdata.hpp"

using namespace msls;

namespace {

PoseWeights one_hot(const PoseBasis& basis, int idx) {
    PoseWeights w;
    w.k.assign(basis.size(), 0.0);
    w.k[idx] = 1.0;
    return w;
}

PoseWeights kernel_weights(const BlurKernel& k) {
    PoseWeights w;
    w.k = k.weights();
    return w;
}

double dot(const ImageBuffer& a, const ImageBuffer& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

ImageBuffer random_image(int w, int h, uint64_t seed) {
    GaussianSampler rng(seed);
    ImageBuffer img(w, h);
    for (double& v : img.pixels()) v = rng.uniform01();
    return img;
}

}  // namespace

TEST_CASE("identity one-hot weights leave the image unchanged") {
    ImageBuffer x = synthetic_scene(40, 40, 3);
    PoseBasis basis = translation_basis(5);
    REQUIRE(basis.identity_index >= 0);
    ImageBuffer out = apply_pose_blur(x, one_hot(basis, basis.identity_index), basis);
    for (size_t i = 0; i < x.size(); ++i)
        REQUIRE(out.data()[i] == Catch::Approx(x.data()[i]).margin(1e-12));
}

TEST_CASE("translation basis with kernel weights reproduces direct convolution") {
    ImageBuffer x = synthetic_scene(48, 40, 17);
    BlurKernel k = random_walk_kernel(5, 9);
    PoseBasis basis = translation_basis(5);
    ImageBuffer out = apply_pose_blur(x, kernel_weights(k), basis);
    ImageBuffer ref = convolve2d(x, k);
    for (int y = 2; y < x.height() - 2; ++y)
        for (int xx = 2; xx < x.width() - 2; ++xx)
            REQUIRE(out.at(xx, y) == Catch::Approx(ref.at(xx, y)).margin(1e-6));
}

TEST_CASE("pure-rotation one-hot matches an independent warp oracle") {
    ImageBuffer x = synthetic_scene(44, 44, 8);
    const double theta = 5.0 * M_PI / 180.0;
    const double cx = (x.width() - 1) / 2.0, cy = (x.height() - 1) / 2.0;
    PoseBasis basis;
    basis.poses.push_back(rotation_translation_pose(theta, 0.0, 0.0, cx, cy));
    PoseWeights w;
    w.k = {1.0};
    ImageBuffer out = apply_pose_blur(x, w, basis);
    // Oracle: sample the source at the inverse rotation of each output pixel,
    // with its own bilinear interpolation and replicate border.
    double c = std::cos(theta), s = std::sin(theta);
    for (int y = 0; y < x.height(); ++y)
        for (int xx = 0; xx < x.width(); ++xx) {
            double dx = xx - cx, dy = y - cy;
            double sx = std::clamp(c * dx + s * dy + cx, 0.0, x.width() - 1.0);
            double sy = std::clamp(-s * dx + c * dy + cy, 0.0, x.height() - 1.0);
            int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            int x1 = std::min(x0 + 1, x.width() - 1), y1 = std::min(y0 + 1, x.height() - 1);
            double fx = sx - x0, fy = sy - y0;
            double ref = (1 - fx) * (1 - fy) * x.at(x0, y0) + fx * (1 - fy) * x.at(x1, y0) +
                         (1 - fx) * fy * x.at(x0, y1) + fx * fy * x.at(x1, y1);
            REQUIRE(out.at(xx, y) == Catch::Approx(ref).margin(1e-10));
        }
}

TEST_CASE("pose basis invariants") {
    PoseBasis t = translation_basis(5);
    REQUIRE(t.size() == 25);
    REQUIRE(t.poses[t.identity_index].is_identity());
    REQUIRE_THROWS_AS(translation_basis(4), Error);
    REQUIRE_THROWS_AS(translation_basis(0), Error);

    PoseGridConfig gc;
    PoseBasis g = make_pose_grid(gc, 64, 64);
    REQUIRE(g.size() == 125);
    REQUIRE(g.identity_index >= 0);
    REQUIRE(g.poses[g.identity_index].is_identity(1e-9));
    gc.rot_steps = 2;
    REQUIRE_THROWS_AS(make_pose_grid(gc, 64, 64), Error);

    ImageBuffer x(8, 8, 0.5);
    PoseWeights bad;
    bad.k.assign(3, 0.1);
    REQUIRE_THROWS_AS(apply_pose_blur(x, bad, t), Error);
    PoseWeights neg;
    neg.k.assign(25, -1.0);
    REQUIRE_THROWS_AS(neg.clamp_normalize(), Error);
}

TEST_CASE("pose blur adjoint passes the dot-product test") {
    PoseGridConfig gc;
    gc.rot_extent_deg = 3.0;
    gc.trans_extent = 1.5;
    PoseBasis basis = make_pose_grid(gc, 24, 24);
    GaussianSampler rng(123);
    PoseWeights w;
    w.k.assign(basis.size(), 0.0);
    for (double& v : w.k) v = rng.uniform01();
    w.clamp_normalize();
    for (WarpBorder border : {WarpBorder::Replicate, WarpBorder::Periodic}) {
        for (int trial = 0; trial < 8; ++trial) {
            ImageBuffer u = random_image(24, 24, 1000 + trial);
            ImageBuffer v = random_image(24, 24, 2000 + trial);
            double lhs = dot(apply_pose_blur(u, w, basis, border), v);
            double rhs = dot(u, apply_pose_blur_adjoint(v, w, basis, border));
            REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10).margin(1e-10));
        }
    }
}

TEST_CASE("conjugate gradients match a dense direct solve") {
    const int n = 12;
    GaussianSampler rng(7);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng();
    Eigen::MatrixXd a = m.transpose() * m + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = rng();
    Eigen::VectorXd ref = a.ldlt().solve(rhs);

    auto apply = [&](const std::vector<double>& v) {
        Eigen::VectorXd ev = Eigen::Map<const Eigen::VectorXd>(v.data(), n);
        Eigen::VectorXd av = a * ev;
        return std::vector<double>(av.data(), av.data() + n);
    };
    std::vector<double> rhsv(rhs.data(), rhs.data() + n);
    std::vector<double> x;
    CgResult res = conjugate_gradient(apply, rhsv, x, 1e-12, 200);
    REQUIRE(res.residual <= 1e-10);
    for (int i = 0; i < n; ++i) REQUIRE(x[i] == Catch::Approx(ref(i)).margin(1e-8));
    // Residual history trends downward for this well-conditioned system.
    REQUIRE(res.residual_history.front() > res.residual_history.back());
    for (size_t i = 1; i < res.residual_history.size(); ++i)
        REQUIRE(res.residual_history[i] <= res.residual_history[i - 1] + 1e-9);
}

TEST_CASE("sharp pair concentrates the weight on the identity pose") {
    ImageBuffer x = synthetic_scene(64, 64, 21);
    PoseGridConfig gc;
    gc.rot_steps = 3;
    gc.trans_steps = 3;
    gc.trans_extent = 1.0;
    PoseBasis basis = make_pose_grid(gc, 64, 64);
    NuEstimateConfig cfg;
    cfg.lambda_kernel = 1e-3;
    NuKernelEstimate est = estimate_nu_kernel(x, x, basis, cfg);
    REQUIRE(est.weights.k[basis.identity_index] >= 0.9);
}

TEST_CASE("sparse three-pose truth is recovered") {
    ImageBuffer x = synthetic_scene(56, 56, 34);
    PoseBasis basis = translation_basis(5);
    PoseWeights wt;
    wt.k.assign(basis.size(), 0.0);
    wt.k[basis.identity_index] = 0.5;
    wt.k[2] = 0.3;   // (-0, -2) offset in the raster grid
    wt.k[16] = 0.2;  // (+1, +1)
    ImageBuffer b = apply_pose_blur(x, wt, basis, WarpBorder::Periodic);
    NuEstimateConfig cfg;
    cfg.lambda_kernel = 1e-6;
    cfg.border = WarpBorder::Periodic;
    cfg.taper = false;
    cfg.alternations = 2;
    cfg.cg_tol = 1e-9;
    cfg.cg_max_iter = 200;
    NuKernelEstimate est = estimate_nu_kernel(x, b, basis, cfg);
    double l1 = 0.0;
    for (size_t i = 0; i < wt.k.size(); ++i) l1 += std::abs(est.weights.k[i] - wt.k[i]);
    REQUIRE(l1 <= 0.1);

    // Dense normal-equations oracle at the same tiny regularization.
    GradientField gx = gradient(x, 1, Boundary::PeriodicAfterTaper);
    GradientField gb = gradient(b, 1, Boundary::PeriodicAfterTaper);
    const int np = static_cast<int>(basis.size());
    const int rows = static_cast<int>(x.size()) * 2;
    Eigen::MatrixXd bm(rows, np);
    for (int i = 0; i < np; ++i)
        for (int d = 0; d < 2; ++d) {
            ImageBuffer col = warp(gx.members[d], basis.poses[i], WarpBorder::Periodic);
            for (size_t n = 0; n < col.size(); ++n)
                bm(d * static_cast<int>(x.size()) + static_cast<int>(n), i) = col.data()[n];
        }
    Eigen::VectorXd rhs(rows);
    for (int d = 0; d < 2; ++d)
        for (size_t n = 0; n < x.size(); ++n)
            rhs(d * static_cast<int>(x.size()) + static_cast<int>(n)) = gb.members[d].data()[n];
    Eigen::MatrixXd a = bm.transpose() * bm +
                        2.0 * cfg.lambda_kernel * Eigen::MatrixXd::Identity(np, np);
    Eigen::VectorXd ref = a.ldlt().solve(bm.transpose() * rhs);
    for (int i = 0; i < np; ++i)
        REQUIRE(est.weights.k[i] == Catch::Approx(std::max(0.0, ref(i))).margin(1e-4));
}

TEST_CASE("translation-only estimation matches the frequency-domain kernel solve") {
    ImageBuffer x = synthetic_scene(64, 64, 51);
    BlurKernel kt = gaussian_kernel(5, 1.2);  // all entries above the 5% floor
    ImageBuffer b = fft_convolve(x, kt);
    const double lambda = 1e-8;

    GradientField gx = gradient(x, 1, Boundary::PeriodicAfterTaper);
    GradientField gb = gradient(b, 1, Boundary::PeriodicAfterTaper);
    CompensationField v = CompensationField::zeros_like(gx);
    BlurKernel kf = solve_kernel_fft(gx, gb, v, lambda, 5);

    PoseBasis basis = translation_basis(5);
    NuEstimateConfig cfg;
    cfg.lambda_kernel = lambda;
    cfg.border = WarpBorder::Periodic;
    cfg.taper = false;
    cfg.alternations = 1;
    cfg.cg_tol = 1e-10;
    cfg.cg_max_iter = 300;
    NuKernelEstimate est = estimate_nu_kernel(x, b, basis, cfg);
    for (int vv = 0; vv < 5; ++vv)
        for (int uu = 0; uu < 5; ++uu)
            REQUIRE(est.weights.k[static_cast<size_t>(vv) * 5 + uu] ==
                    Catch::Approx(kf.at(uu, vv)).margin(1e-3));
}

TEST_CASE("non-uniform TV with identity weights denoises gently") {
    ImageBuffer b = synthetic_scene(48, 48, 63);
    PoseBasis basis = translation_basis(3);
    ImageBuffer out = nu_tv_deblur(b, one_hot(basis, basis.identity_index), basis, 0.01);
    REQUIRE(psnr(out, b) >= 30.0);
}

TEST_CASE("translation-only non-uniform TV matches the frequency-domain solver") {
    ImageBuffer x = synthetic_scene(48, 48, 71);
    BlurKernel k = gaussian_kernel(5, 1.1);
    ImageBuffer b = convolve2d(x, k);
    AdmmConfig cfg;
    cfg.iterations = 6;
    cfg.primal_tol = 0.0;
    ImageBuffer ref = tv_deblur(b, k, 0.01, cfg, nullptr, /*clamp_output=*/false);
    // tv_deblur tapers internally; feed the tapered observation so both solvers
    // address the same periodic model.
    ImageBuffer bt = edge_taper(b, k);
    PoseBasis basis = translation_basis(5);
    ImageBuffer out = nu_tv_deblur(bt, kernel_weights(k), basis, 0.01, cfg,
                                   WarpBorder::Periodic, 1e-9, 400, /*clamp_output=*/false);
    for (int y = 4; y < 44; ++y)
        for (int xx = 4; xx < 44; ++xx)
            REQUIRE(out.at(xx, y) == Catch::Approx(ref.at(xx, y)).margin(1e-3));
}

TEST_CASE("rotational blur is substantially removed with known weights") {
    ImageBuffer x = synthetic_scene(64, 64, 82);
    PoseGridConfig gc;
    gc.rot_extent_deg = 3.0;
    gc.rot_steps = 5;
    gc.trans_steps = 1;
    PoseBasis basis = make_pose_grid(gc, 64, 64);
    PoseWeights w;
    w.k.assign(basis.size(), 0.0);
    for (int r = 0; r < 5; ++r) w.k[r] = 0.2;
    ImageBuffer b = apply_pose_blur(x, w, basis);
    AdmmConfig cfg;
    cfg.iterations = 60;  // rotational streaks need a deeper solve than the default
    cfg.primal_tol = 0.0;
    ImageBuffer out = nu_tv_deblur(b, w, basis, 0.01, cfg);
    REQUIRE(mse(out, x) <= 0.6 * mse(b, x));
}

TEST_CASE("non-uniform TV validates arguments") {
    ImageBuffer b(16, 16, 0.5);
    PoseBasis basis = translation_basis(3);
    REQUIRE_THROWS_AS(nu_tv_deblur(b, one_hot(basis, basis.identity_index), basis, 0.0), Error);
    PoseWeights bad;
    bad.k.assign(4, 0.25);
    REQUIRE_THROWS_AS(nu_tv_deblur(b, bad, basis, 0.01), Error);
}

TEST_CASE("blind non-uniform restoration of a sharp input stays sharp") {
    ImageBuffer x = synthetic_scene(96, 96, 95);
    DeblurConfig cfg;
    cfg.kernel_size = 5;
    PoseGridConfig gc;
    gc.rot_steps = 1;
    gc.trans_steps = 3;
    gc.trans_extent = 1.0;
    NuDeblurResult res = nu_blind_deblur(x, cfg, gc);
    // As in the uniform pipeline, the weights on an unblurred input trace the
    // point spread of the patch-reconstruction jitter; the identity pose is
    // dominant rather than a strict one-hot.
    double peak = 0.0;
    for (double w : res.weights.k) peak = std::max(peak, w);
    REQUIRE(res.weights.k[res.basis.identity_index] == peak);
    REQUIRE(psnr(res.latent, x) >= 30.0);
}
