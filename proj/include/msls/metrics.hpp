// Evaluation metrics: error ratio, shift-invariant kernel similarity, PSNR,
// and the aggregate report.
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "msls/image.hpp"

namespace msls {

inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_dims(b)) throw Error("image dimensions mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    double m = mse(a, b);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

// r = ||x - x_khat||^2 / ||x - x_k||^2; both restorations must come from the
// same non-blind solver. A vanishing denominator is floored and flagged.
inline double error_ratio(const ImageBuffer& x, const ImageBuffer& x_khat, const ImageBuffer& x_k,
                          bool* degenerate = nullptr) {
    if (!x.same_dims(x_khat) || !x.same_dims(x_k)) throw Error("image dimensions mismatch");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dn = x.data()[i] - x_khat.data()[i];
        double dd = x.data()[i] - x_k.data()[i];
        num += dn * dn;
        den += dd * dd;
    }
    double floor_val = std::numeric_limits<double>::epsilon() * static_cast<double>(x.size());
    if (degenerate) *degenerate = den < floor_val;
    return num / std::max(den, floor_val);
}

// Maximum normalized cross-correlation over integer shifts; blind deblurring
// recovers kernels only up to translation.
inline double kernel_similarity(const BlurKernel& k1, const BlurKernel& k2) {
    const int n = std::max(k1.size(), k2.size());
    auto embed = [n](const BlurKernel& k) {
        std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
        int off = (n - k.size()) / 2;
        for (int v = 0; v < k.size(); ++v)
            for (int u = 0; u < k.size(); ++u)
                out[static_cast<size_t>(v + off) * n + (u + off)] = k.at(u, v);
        return out;
    };
    std::vector<double> a = embed(k1), b = embed(k2);
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    double best = 0.0;
    for (int sy = -(n - 1); sy <= n - 1; ++sy)
        for (int sx = -(n - 1); sx <= n - 1; ++sx) {
            double dot = 0.0;
            for (int y = std::max(0, -sy); y < std::min(n, n - sy); ++y)
                for (int x = std::max(0, -sx); x < std::min(n, n - sx); ++x)
                    dot += a[static_cast<size_t>(y) * n + x] *
                           b[static_cast<size_t>(y + sy) * n + (x + sx)];
            best = std::max(best, dot);
        }
    return best / std::sqrt(na * nb);
}

struct EvalRecord {
    std::string name;
    double error_ratio = 0.0;
    double kernel_similarity = 0.0;
    double psnr = 0.0;
    double runtime_seconds = 0.0;
    bool degenerate_denominator = false;
};

struct EvalReport {
    std::vector<EvalRecord> records;
    static constexpr double success_threshold = 5.0;

    double mean_error_ratio() const {
        if (records.empty()) return 0.0;
        double s = 0.0;
        for (const auto& r : records) s += r.error_ratio;
        return s / static_cast<double>(records.size());
    }
    double worst_error_ratio() const {
        double w = 0.0;
        for (const auto& r : records) w = std::max(w, r.error_ratio);
        return w;
    }
    double success_rate() const {
        if (records.empty()) return 0.0;
        int ok = 0;
        for (const auto& r : records)
            if (r.error_ratio < success_threshold) ++ok;
        return static_cast<double>(ok) / static_cast<double>(records.size());
    }
    double median_error_ratio() const {
        if (records.empty()) return 0.0;
        std::vector<double> v;
        for (const auto& r : records) v.push_back(r.error_ratio);
        std::sort(v.begin(), v.end());
        size_t m = v.size() / 2;
        return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    }
};

}  // namespace msls
