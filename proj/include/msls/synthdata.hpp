// Deterministic generators for test scenes and blur kernels.
#pragma once

#include <cmath>

#include "msls/conv.hpp"
#include "msls/image.hpp"
#include "msls/pyramid.hpp"

namespace msls {

inline BlurKernel gaussian_kernel(int size, double sigma) {
    BlurKernel k(size);
    const int c = k.center();
    for (int v = 0; v < size; ++v)
        for (int u = 0; u < size; ++u)
            k.at(u, v) =
                std::exp(-0.5 * ((u - c) * (u - c) + (v - c) * (v - c)) / (sigma * sigma));
    k.normalize();
    return k;
}

// Camera-shake style kernel: a random walk with momentum, splatted with
// bilinear weights and lightly smoothed. The trajectory is de-drifted so the
// center of mass sits at the geometric center; restorations deconvolved with
// an estimate of this kernel then stay aligned with the sharp ground truth.
inline BlurKernel random_walk_kernel(int size, uint64_t seed, int steps = 0) {
    if (steps <= 0) steps = 6 * size;
    GaussianSampler rng(seed);
    BlurKernel k(size);
    const double c = (size - 1) / 2.0;
    double x = c, y = c;
    double vx = 0.4 * rng(), vy = 0.4 * rng();
    const double lim = size / 2.0 - 1.0;
    std::vector<std::pair<double, double>> pts;
    pts.reserve(steps);
    double mx = 0.0, my = 0.0;
    for (int s = 0; s < steps; ++s) {
        vx = 0.9 * vx + 0.35 * rng();
        vy = 0.9 * vy + 0.35 * rng();
        x = std::clamp(x + vx, c - lim, c + lim);
        y = std::clamp(y + vy, c - lim, c + lim);
        pts.emplace_back(x, y);
        mx += x;
        my += y;
    }
    mx /= steps;
    my /= steps;
    for (auto [px, py] : pts) {
        double sx = std::clamp(px + (c - mx), 0.0, size - 1.0);
        double sy = std::clamp(py + (c - my), 0.0, size - 1.0);
        int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
        double fx = sx - x0, fy = sy - y0;
        for (int j = 0; j <= 1; ++j)
            for (int i = 0; i <= 1; ++i) {
                int qx = x0 + i, qy = y0 + j;
                if (qx < 0 || qy < 0 || qx >= size || qy >= size) continue;
                k.at(qx, qy) += (i ? fx : 1 - fx) * (j ? fy : 1 - fy);
            }
    }
    // mild smoothing so the trajectory has finite width
    BlurKernel g = gaussian_kernel(3, 0.6);
    BlurKernel out(size);
    for (int v = 0; v < size; ++v)
        for (int u = 0; u < size; ++u) {
            double acc = 0.0;
            for (int j = -1; j <= 1; ++j)
                for (int i = -1; i <= 1; ++i) {
                    int su = u + i, sv = v + j;
                    if (su < 0 || sv < 0 || su >= size || sv >= size) continue;
                    acc += g.at(i + 1, j + 1) * k.at(su, sv);
                }
            out.at(u, v) = acc;
        }
    out.normalize();
    return out;
}

// Piecewise-constant scene over a smooth background: random rectangles,
// discs and line segments with strong edges at several scales.
inline ImageBuffer synthetic_scene(int width, int height, uint64_t seed) {
    GaussianSampler rng(seed);
    ImageBuffer img(width, height);
    double ax = 2.0 * M_PI * rng.uniform01(), fx = 1.0 + 2.0 * rng.uniform01();
    double ay = 2.0 * M_PI * rng.uniform01(), fy = 1.0 + 2.0 * rng.uniform01();
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            img.at(x, y) = 0.45 + 0.12 * std::sin(fx * 2.0 * M_PI * x / width + ax) +
                           0.12 * std::cos(fy * 2.0 * M_PI * y / height + ay);

    int n_shapes = 18 + static_cast<int>(10 * rng.uniform01());
    for (int s = 0; s < n_shapes; ++s) {
        double cx = rng.uniform01() * width, cy = rng.uniform01() * height;
        double val = 0.05 + 0.9 * rng.uniform01();
        int kind = static_cast<int>(3.0 * rng.uniform01());
        if (kind == 0) {  // rectangle
            double hw = (0.03 + 0.12 * rng.uniform01()) * width;
            double hh = (0.03 + 0.12 * rng.uniform01()) * height;
            int x0 = std::max(0, static_cast<int>(cx - hw)), x1 = std::min(width - 1, static_cast<int>(cx + hw));
            int y0 = std::max(0, static_cast<int>(cy - hh)), y1 = std::min(height - 1, static_cast<int>(cy + hh));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) img.at(x, y) = val;
        } else if (kind == 1) {  // disc
            double r = (0.02 + 0.10 * rng.uniform01()) * std::min(width, height);
            int x0 = std::max(0, static_cast<int>(cx - r)), x1 = std::min(width - 1, static_cast<int>(cx + r));
            int y0 = std::max(0, static_cast<int>(cy - r)), y1 = std::min(height - 1, static_cast<int>(cy + r));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.at(x, y) = val;
        } else {  // thick line segment
            double ang = 2.0 * M_PI * rng.uniform01();
            double len = (0.1 + 0.3 * rng.uniform01()) * std::min(width, height);
            double thick = 1.0 + 3.0 * rng.uniform01();
            double dx = std::cos(ang), dy = std::sin(ang);
            for (double t = -len / 2; t <= len / 2; t += 0.5) {
                for (double o = -thick / 2; o <= thick / 2; o += 0.5) {
                    int px = static_cast<int>(std::lround(cx + t * dx - o * dy));
                    int py = static_cast<int>(std::lround(cy + t * dy + o * dx));
                    if (px >= 0 && py >= 0 && px < width && py < height) img.at(px, py) = val;
                }
            }
        }
    }
    img = detail::gaussian_blur(img, 0.6);
    img.clamp01();
    return img;
}

}  // namespace msls
