// Multi-scale pyramid: level schedule, anti-aliased down-sampling, and the
// kernel down-scaling law.
#pragma once

#include <cmath>
#include <vector>

#include "msls/conv.hpp"
#include "msls/image.hpp"

namespace msls {

struct ScaleLevel {
    int level = 0;       // 0 = coarsest
    int width = 0;
    int height = 0;
    int kernel_size = 1;
    double factor = 1.0;  // cumulative down-sampling ratio vs finest
};

struct ScaleSchedule {
    std::vector<ScaleLevel> levels;  // coarsest -> finest
    double beta = 0.0;

    int n_levels() const { return static_cast<int>(levels.size()); }
    const ScaleLevel& finest() const { return levels.back(); }
    const ScaleLevel& coarsest() const { return levels.front(); }
};

inline int nearest_odd(double x) {
    int m = static_cast<int>(std::lround((x - 1.0) / 2.0));
    return std::max(1, 2 * m + 1);
}

// Levels are chosen so the coarsest kernel degenerates to a delta: the level
// count is the smallest n with h / beta^n <= 1.
inline ScaleSchedule build_schedule(int width, int height, int kernel_size, double beta) {
    if (kernel_size <= 0 || kernel_size % 2 == 0) throw Error("kernel size must be odd");
    if (beta <= 1.0) throw Error("beta must exceed 1");
    ScaleSchedule s;
    s.beta = beta;
    if (kernel_size == 1) {
        s.levels.push_back({0, width, height, 1, 1.0});
        return s;
    }
    int n = static_cast<int>(std::ceil(std::log(static_cast<double>(kernel_size)) / std::log(beta)));
    // Cap the depth so the coarsest level keeps a minimum dimension of 20 px;
    // the cap is legitimate only while the coarsest kernel stays near a delta.
    {
        int w = width, h = height, n_max = 1;
        while (std::min(static_cast<int>(std::lround(w / beta)),
                        static_cast<int>(std::lround(h / beta))) >= 20 &&
               n_max < n) {
            w = static_cast<int>(std::lround(w / beta));
            h = static_cast<int>(std::lround(h / beta));
            ++n_max;
        }
        if (n_max < n) {
            if (kernel_size / std::pow(beta, n_max - 1) > 5.0)
                throw Error("insufficient resolution for kernel size");
            n = n_max;
        }
    }
    s.levels.resize(n);
    // Dimensions chain level-to-level (finest downward), matching the way the
    // pyramid images are actually produced.
    int w = width, h = height;
    for (int l = n - 1; l >= 0; --l) {
        double factor = std::pow(beta, n - 1 - l);
        ScaleLevel& lev = s.levels[l];
        lev.level = l;
        lev.factor = factor;
        lev.width = w;
        lev.height = h;
        lev.kernel_size = l == 0 ? 1 : nearest_odd(kernel_size / factor);
        w = static_cast<int>(std::lround(w / beta));
        h = static_cast<int>(std::lround(h / beta));
    }
    s.levels.back().kernel_size = kernel_size;
    for (size_t l = 1; l < s.levels.size(); ++l)
        s.levels[l].kernel_size = std::max(s.levels[l].kernel_size, s.levels[l - 1].kernel_size);
    if (std::min(s.coarsest().width, s.coarsest().height) < 20)
        throw Error("insufficient resolution for kernel size");
    return s;
}

namespace detail {

// Separable Gaussian blur with replicate borders; radius 3*sigma.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> taps(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += taps[i + radius];
    }
    for (double& t : taps) t /= sum;

    ImageBuffer tmp(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += taps[i + radius] * img.at_clamped(x + i, y);
            tmp.at(x, y) = acc;
        }
    ImageBuffer out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) acc += taps[i + radius] * tmp.at_clamped(x, y + i);
            out.at(x, y) = acc;
        }
    return out;
}

inline double bilinear(const ImageBuffer& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
    double fx = x - x0, fy = y - y0;
    return (1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x1, y0) +
           (1 - fx) * fy * img.at(x0, y1) + fx * fy * img.at(x1, y1);
}

}  // namespace detail

// Gaussian anti-alias filter (sigma = 0.8*sqrt(factor^2-1)) followed by
// bilinear sampling at the fractional target grid.
inline ImageBuffer lowpass_downsample(const ImageBuffer& img, double factor) {
    if (factor < 1.0) throw Error("down-sampling factor must be >= 1");
    if (factor == 1.0) return img;
    int ow = static_cast<int>(std::lround(img.width() / factor));
    int oh = static_cast<int>(std::lround(img.height() / factor));
    if (ow < 2 || oh < 2) throw Error("degenerate down-sampled size");
    double sigma = 0.8 * std::sqrt(factor * factor - 1.0);
    ImageBuffer filtered = detail::gaussian_blur(img, sigma);
    ImageBuffer out(ow, oh);
    double sx = static_cast<double>(img.width()) / ow;
    double sy = static_cast<double>(img.height()) / oh;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at(x, y) = detail::bilinear(filtered, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    return out;
}

inline ImageBuffer resize_to(const ImageBuffer& img, int ow, int oh) {
    ImageBuffer out(ow, oh);
    double sx = static_cast<double>(img.width()) / ow;
    double sy = static_cast<double>(img.height()) / oh;
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at(x, y) = detail::bilinear(img, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
    return out;
}

// Discrete realization of k_a(u,v) = a^2 k(a u, a v): treat the kernel as a
// piecewise-constant density, integrate it over target cells of side alpha,
// then renormalize. The target support is the smallest odd size covering the
// shrunk support, so no mass is truncated and the center mass grows
// monotonically with alpha.
inline BlurKernel downsample_kernel(const BlurKernel& k, double alpha) {
    if (alpha < 1.0) throw Error("alpha must be >= 1");
    const int h = k.size();
    int target = static_cast<int>(std::ceil(h / alpha));
    if (target % 2 == 0) ++target;
    target = std::max(1, target);
    BlurKernel out(target);
    const double cs = (h - 1) / 2.0;       // source center
    const double ct = (target - 1) / 2.0;  // target center
    for (int tv = 0; tv < target; ++tv) {
        for (int tu = 0; tu < target; ++tu) {
            // Target cell footprint in source coordinates.
            double u0 = cs + ((tu - ct) - 0.5) * alpha;
            double u1 = cs + ((tu - ct) + 0.5) * alpha;
            double v0 = cs + ((tv - ct) - 0.5) * alpha;
            double v1 = cs + ((tv - ct) + 0.5) * alpha;
            double acc = 0.0;
            int su0 = std::max(0, static_cast<int>(std::floor(u0 + 0.5)));
            int su1 = std::min(h - 1, static_cast<int>(std::floor(u1 + 0.5)));
            int sv0 = std::max(0, static_cast<int>(std::floor(v0 + 0.5)));
            int sv1 = std::min(h - 1, static_cast<int>(std::floor(v1 + 0.5)));
            for (int sv = sv0; sv <= sv1; ++sv) {
                double oy = std::min(v1, sv + 0.5) - std::max(v0, sv - 0.5);
                if (oy <= 0.0) continue;
                for (int su = su0; su <= su1; ++su) {
                    double ox = std::min(u1, su + 0.5) - std::max(u0, su - 0.5);
                    if (ox <= 0.0) continue;
                    acc += ox * oy * k.at(su, sv);
                }
            }
            out.at(tu, tv) = acc;
        }
    }
    out.normalize();
    return out;
}

// L1 distance between a normalized kernel and the delta at its center.
inline double delta_distance(const BlurKernel& k) {
    const int c = k.center();
    double d = 0.0;
    for (int v = 0; v < k.size(); ++v)
        for (int u = 0; u < k.size(); ++u)
            d += (u == c && v == c) ? std::abs(k.at(u, v) - 1.0) : std::abs(k.at(u, v));
    return d;
}

}  // namespace msls
