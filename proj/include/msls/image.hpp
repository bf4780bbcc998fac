// Core image and kernel types shared by the whole library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace msls {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Single-channel 2D scalar field, row-major. Intensities nominally live in
// [0,1]; intermediate gradient-domain buffers may exceed that range and are
// only clamped at output boundaries.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, double fill = 0.0)
        : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
        if (width <= 0 || height <= 0)
            throw Error("image dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }

    double& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
    double at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

    // Clamped access, replicate-edge semantics.
    double at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width_ - 1);
        y = std::clamp(y, 0, height_ - 1);
        return at(x, y);
    }
    // Periodic access.
    double at_periodic(int x, int y) const {
        x = ((x % width_) + width_) % width_;
        y = ((y % height_) + height_) % height_;
        return at(x, y);
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& pixels() { return data_; }
    const std::vector<double>& pixels() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    void clamp01() {
        for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
    }

    bool same_dims(const ImageBuffer& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

inline ImageBuffer operator-(const ImageBuffer& a, const ImageBuffer& b) {
    ImageBuffer out(a.width(), a.height());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

inline ImageBuffer operator+(const ImageBuffer& a, const ImageBuffer& b) {
    ImageBuffer out(a.width(), a.height());
    for (size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    return out;
}

// Square blur kernel with odd support, nonnegative weights summing to one.
class BlurKernel {
public:
    BlurKernel() : BlurKernel(1) { weights_[0] = 1.0; }

    explicit BlurKernel(int size) : size_(size), weights_(static_cast<size_t>(size) * size, 0.0) {
        if (size <= 0 || size % 2 == 0)
            throw Error("kernel size must be odd and positive");
    }

    static BlurKernel delta(int size = 1) {
        BlurKernel k(size);
        k.at(size / 2, size / 2) = 1.0;
        return k;
    }

    int size() const { return size_; }
    int center() const { return size_ / 2; }

    double& at(int u, int v) { return weights_[static_cast<size_t>(v) * size_ + u]; }
    double at(int u, int v) const { return weights_[static_cast<size_t>(v) * size_ + u]; }

    double* data() { return weights_.data(); }
    const double* data() const { return weights_.data(); }
    std::vector<double>& weights() { return weights_; }
    const std::vector<double>& weights() const { return weights_; }

    double sum() const {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }

    void normalize() {
        double s = sum();
        if (s <= 0.0) throw Error("empty kernel estimate");
        for (double& w : weights_) w /= s;
    }

    bool is_normalized(double tol = 1e-9) const {
        if (std::abs(sum() - 1.0) > tol) return false;
        for (double w : weights_)
            if (w < 0.0) return false;
        return true;
    }

private:
    int size_;
    std::vector<double> weights_;
};

// Directional derivative stack. Order 1 holds {dx, dy}; order 2 adds
// {dxx, dyy, dxy}, each an image-sized buffer.
struct GradientField {
    std::vector<ImageBuffer> members;  // order: dx, dy [, dxx, dyy, dxy]
    int order = 1;

    size_t count() const { return members.size(); }
};

struct AdmmConfig {
    double rho = 2.0;  // penalty large enough that the objective settles by iteration 3
    int iterations = 30;
    double primal_tol = 1e-4;
};

// All tunable pipeline parameters. Defaults follow the published settings.
struct DeblurConfig {
    double lambda1 = 5.0;   // kernel l2 weight, preliminary phase
    double lambda2 = 0.05;  // compensation sparsity weight, preliminary phase
    double lambda3 = 5.0;   // kernel l2 weight, refinement phase
    double lambda4 = 0.05;  // compensation sparsity weight, refinement phase
    double mu = 0.01;       // TV weight
    double beta = std::log2(3.0);  // pyramid scale factor
    int max_iteration = 3;  // per-scale alternations
    int kernel_size = 27;
    int patch_size = 5;
    int patch_stride = 2;   // ~50% overlap for 5x5 patches
    int search_window = 10;
    int inner_alternations = 4;  // (k, v) rounds inside one kernel estimate
    AdmmConfig admm;
    double kernel_floor_fraction = 0.05;     // zero entries below this fraction of max
    double kernel_component_fraction = 0.10; // keep components above this mass fraction

    void validate() const {
        if (lambda1 <= 0 || lambda2 <= 0 || lambda3 <= 0 || lambda4 <= 0 || mu <= 0)
            throw Error("regularization weights must be positive");
        if (beta <= 1.0) throw Error("beta must exceed 1");
        if (kernel_size <= 0 || kernel_size % 2 == 0)
            throw Error("kernel size must be odd and positive");
        if (patch_size <= 0 || patch_size % 2 == 0)
            throw Error("patch size must be odd");
        if (search_window < patch_size)
            throw Error("search window must be at least the patch size");
        if (max_iteration < 0) throw Error("max_iteration must be nonnegative");
    }
};

struct SyntheticBlurSpec {
    BlurKernel kernel;
    double noise_sigma = 0.0;
    uint64_t seed = 0;
};

}  // namespace msls
