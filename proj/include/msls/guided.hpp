// Guided filter: local linear model between a guidance image and the output,
// computed from box-window statistics.
#pragma once

#include "msls/image.hpp"

namespace msls {

namespace detail {

// Box mean with replicate borders via a summed-area table on the padded grid.
inline ImageBuffer box_mean(const ImageBuffer& img, int radius) {
    const int w = img.width(), h = img.height();
    ImageBuffer out(w, h);
    // integral over clamped coordinates
    std::vector<double> integral(static_cast<size_t>(w + 2 * radius + 1) * (h + 2 * radius + 1), 0.0);
    const int iw = w + 2 * radius + 1;
    for (int y = 0; y < h + 2 * radius; ++y)
        for (int x = 0; x < w + 2 * radius; ++x) {
            double v = img.at_clamped(x - radius, y - radius);
            integral[static_cast<size_t>(y + 1) * iw + (x + 1)] =
                v + integral[static_cast<size_t>(y) * iw + (x + 1)] +
                integral[static_cast<size_t>(y + 1) * iw + x] -
                integral[static_cast<size_t>(y) * iw + x];
        }
    const double area = static_cast<double>(2 * radius + 1) * (2 * radius + 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int x0 = x, y0 = y, x1 = x + 2 * radius + 1, y1 = y + 2 * radius + 1;
            double s = integral[static_cast<size_t>(y1) * iw + x1] -
                       integral[static_cast<size_t>(y0) * iw + x1] -
                       integral[static_cast<size_t>(y1) * iw + x0] +
                       integral[static_cast<size_t>(y0) * iw + x0];
            out.at(x, y) = s / area;
        }
    return out;
}

}  // namespace detail

inline ImageBuffer guided_filter(const ImageBuffer& img, const ImageBuffer& guide, int radius,
                                 double eps) {
    if (!img.same_dims(guide)) throw Error("image/guide dimensions mismatch");
    if (radius < 1) throw Error("radius must be >= 1");
    if (eps <= 0.0) throw Error("eps must be positive");

    ImageBuffer mean_i = detail::box_mean(guide, radius);
    ImageBuffer mean_p = detail::box_mean(img, radius);
    ImageBuffer ii(img.width(), img.height()), ip(img.width(), img.height());
    for (size_t n = 0; n < img.size(); ++n) {
        ii.data()[n] = guide.data()[n] * guide.data()[n];
        ip.data()[n] = guide.data()[n] * img.data()[n];
    }
    ImageBuffer corr_i = detail::box_mean(ii, radius);
    ImageBuffer corr_ip = detail::box_mean(ip, radius);

    ImageBuffer a(img.width(), img.height()), c(img.width(), img.height());
    for (size_t n = 0; n < img.size(); ++n) {
        double var_i = corr_i.data()[n] - mean_i.data()[n] * mean_i.data()[n];
        double cov_ip = corr_ip.data()[n] - mean_i.data()[n] * mean_p.data()[n];
        a.data()[n] = cov_ip / (var_i + eps);
        c.data()[n] = mean_p.data()[n] - a.data()[n] * mean_i.data()[n];
    }
    ImageBuffer mean_a = detail::box_mean(a, radius);
    ImageBuffer mean_c = detail::box_mean(c, radius);
    ImageBuffer out(img.width(), img.height());
    for (size_t n = 0; n < img.size(); ++n)
        out.data()[n] = mean_a.data()[n] * guide.data()[n] + mean_c.data()[n];
    return out;
}

}  // namespace msls
