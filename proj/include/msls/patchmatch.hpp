// Sharp image reconstruction by local self-example matching: every patch of
// the current latent image finds its nearest neighbor in a small window of
// the coarser prior image, and the matched prior patches are fused with
// Hamming-window weights.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "msls/image.hpp"

namespace msls {

struct WeightPatch {
    int N = 0;
    std::vector<double> w;   // 1D window
    std::vector<double> W;   // N*N separable weights

    double at(int i, int j) const { return W[static_cast<size_t>(j) * N + i]; }
};

// w(i) = 0.54 - 0.46*cos(2*pi*i/(N-1))
inline WeightPatch hamming_weights(int N) {
    if (N < 2) throw Error("window size must be >= 2");
    WeightPatch p;
    p.N = N;
    p.w.resize(N);
    for (int i = 0; i < N; ++i)
        p.w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (N - 1));
    p.W.resize(static_cast<size_t>(N) * N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) p.W[static_cast<size_t>(j) * N + i] = p.w[i] * p.w[j];
    return p;
}

struct PatchGrid {
    int patch_size;
    int stride;
    std::vector<std::pair<int, int>> anchors;  // top-left (x, y), raster order
};

// Anchors cover the image with the configured stride; the last row/column is
// clamped so patches stay in bounds.
inline PatchGrid make_patch_grid(int width, int height, int patch_size, int stride) {
    if (patch_size > width || patch_size > height)
        throw Error("patch larger than image");
    PatchGrid g{patch_size, stride, {}};
    std::vector<int> xs, ys;
    for (int x = 0;; x += stride) {
        xs.push_back(std::min(x, width - patch_size));
        if (x >= width - patch_size) break;
    }
    for (int y = 0;; y += stride) {
        ys.push_back(std::min(y, height - patch_size));
        if (y >= height - patch_size) break;
    }
    for (int y : ys)
        for (int x : xs) g.anchors.emplace_back(x, y);
    return g;
}

struct MatchResult {
    int src_x = 0, src_y = 0;        // anchor in x_l
    int match_x = 0, match_y = 0;    // matched anchor in x_pr
    double distance = 0.0;           // exact l2 distance between the patches
    int candidates = 0;              // instrumentation: evaluated positions
};

struct PatchMatchConfig {
    int patch_size = 5;
    int stride = 2;
    int search_window = 10;
};

inline double patch_l2(const ImageBuffer& a, int ax, int ay, const ImageBuffer& b, int bx, int by,
                       int p) {
    double d2 = 0.0;
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < p; ++i) {
            double diff = a.at(ax + i, ay + j) - b.at(bx + i, by + j);
            d2 += diff * diff;
        }
    return std::sqrt(d2);
}

// Exhaustive scan of the candidate window around the projected position;
// first minimum in raster order wins.
inline MatchResult local_nn_search(const ImageBuffer& x_l, const ImageBuffer& x_pr, int anchor_x,
                                   int anchor_y, const PatchMatchConfig& cfg) {
    const int p = cfg.patch_size;
    if (anchor_x < 0 || anchor_y < 0 || anchor_x + p > x_l.width() || anchor_y + p > x_l.height())
        throw Error("patch anchor out of bounds");
    const double rx = static_cast<double>(x_l.width()) / x_pr.width();
    const double ry = static_cast<double>(x_l.height()) / x_pr.height();
    int px = static_cast<int>(std::lround(anchor_x / rx));
    int py = static_cast<int>(std::lround(anchor_y / ry));

    // Candidates per axis; offsets centered on the projection, e.g. -3..2
    // for a 10-wide window and 5-wide patches (36 positions total).
    const int span = cfg.search_window - p + 1;
    const int off_lo = -(span / 2);

    MatchResult best;
    best.src_x = anchor_x;
    best.src_y = anchor_y;
    best.distance = -1.0;
    for (int dy = off_lo; dy < off_lo + span; ++dy) {
        int cy = py + dy;
        if (cy < 0 || cy + p > x_pr.height()) continue;
        for (int dx = off_lo; dx < off_lo + span; ++dx) {
            int cx = px + dx;
            if (cx < 0 || cx + p > x_pr.width()) continue;
            double d = patch_l2(x_l, anchor_x, anchor_y, x_pr, cx, cy, p);
            ++best.candidates;
            if (best.distance < 0.0 || d < best.distance) {
                best.distance = d;
                best.match_x = cx;
                best.match_y = cy;
            }
        }
    }
    if (best.distance < 0.0) {
        // Window fully clipped (tiny prior); fall back to the clamped
        // projected position itself.
        int cx = std::clamp(px, 0, x_pr.width() - p);
        int cy = std::clamp(py, 0, x_pr.height() - p);
        best.distance = patch_l2(x_l, anchor_x, anchor_y, x_pr, cx, cy, p);
        best.match_x = cx;
        best.match_y = cy;
        best.candidates = 1;
    }
    return best;
}

// Hamming-weighted fusion of matched prior patches. Output dims = x_l dims;
// sequential raster accumulation keeps the result bit-reproducible.
inline ImageBuffer reconstruct_sharp(const ImageBuffer& x_l, const ImageBuffer& x_pr,
                                     const PatchMatchConfig& cfg,
                                     std::vector<MatchResult>* matches = nullptr) {
    const int p = cfg.patch_size;
    if (x_pr.width() < p || x_pr.height() < p)
        throw Error("prior image smaller than patch size");
    PatchGrid grid = make_patch_grid(x_l.width(), x_l.height(), p, cfg.stride);
    WeightPatch wp = hamming_weights(p);
    ImageBuffer num(x_l.width(), x_l.height(), 0.0);
    ImageBuffer den(x_l.width(), x_l.height(), 0.0);
    for (auto [ax, ay] : grid.anchors) {
        MatchResult m = local_nn_search(x_l, x_pr, ax, ay, cfg);
        if (matches) matches->push_back(m);
        for (int j = 0; j < p; ++j)
            for (int i = 0; i < p; ++i) {
                double w = wp.at(i, j);
                num.at(ax + i, ay + j) += w * x_pr.at(m.match_x + i, m.match_y + j);
                den.at(ax + i, ay + j) += w;
            }
    }
    ImageBuffer out(x_l.width(), x_l.height());
    for (size_t i = 0; i < out.size(); ++i) {
        if (den.data()[i] <= 0.0) throw Error("patch grid left a pixel uncovered");
        out.data()[i] = num.data()[i] / den.data()[i];
    }
    return out;
}

}  // namespace msls
