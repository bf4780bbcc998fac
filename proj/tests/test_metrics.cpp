#include <catch2/catch_amalgamated.hpp>

#include "msls/metrics.hpp"
#include "msls/synthdata.hpp"

using namespace msls;

TEST_CASE("error ratio arithmetic") {
    ImageBuffer x(8, 8, 0.0);
    ImageBuffer a(8, 8, 0.0), b(8, 8, 0.0);
    // ||x - a||^2 = 4, ||x - b||^2 = 2
    a.data()[0] = 2.0;
    b.data()[0] = std::sqrt(2.0);
    REQUIRE(error_ratio(x, a, b) == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(error_ratio(x, b, b) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(error_ratio(x, x, b) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("error ratio floors a vanishing denominator and flags it") {
    ImageBuffer x(8, 8, 0.3);
    ImageBuffer a(8, 8, 0.3);
    a.data()[5] = 0.4;
    bool degenerate = false;
    double r = error_ratio(x, a, x, &degenerate);
    REQUIRE(degenerate);
    REQUIRE(std::isfinite(r));
    REQUIRE(r > 0.0);
    degenerate = true;
    error_ratio(x, a, a, &degenerate);
    REQUIRE_FALSE(degenerate);
    ImageBuffer wrong(7, 8, 0.3);
    REQUIRE_THROWS_AS(error_ratio(x, wrong, x), Error);
}

TEST_CASE("kernel similarity of a kernel with itself is one") {
    BlurKernel k = random_walk_kernel(9, 4);
    REQUIRE(kernel_similarity(k, k) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("kernel similarity is shift invariant") {
    BlurKernel k = random_walk_kernel(7, 12);
    BlurKernel shifted(9);
    for (int v = 0; v < 7; ++v)
        for (int u = 0; u < 7; ++u) shifted.at(u, v) = k.at(u, v);  // off-center embed
    REQUIRE(kernel_similarity(k, shifted) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("delta against a box kernel scores one third") {
    BlurKernel box(3);
    for (double& w : box.weights()) w = 1.0 / 9.0;
    REQUIRE(kernel_similarity(BlurKernel::delta(3), box) == Catch::Approx(1.0 / 3.0).margin(1e-12));
    REQUIRE(kernel_similarity(BlurKernel::delta(5), box) == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("psnr and mse are consistent") {
    ImageBuffer a(16, 16, 0.5), b(16, 16, 0.6);
    REQUIRE(mse(a, b) == Catch::Approx(0.01).margin(1e-12));
    REQUIRE(psnr(a, b) == Catch::Approx(20.0).margin(1e-9));
    REQUIRE(psnr(a, a) == std::numeric_limits<double>::infinity());
}

TEST_CASE("report aggregates are recomputable from the records") {
    EvalReport rep;
    const double ratios[] = {0.7, 1.4, 2.9, 4.9, 6.5};
    for (int i = 0; i < 5; ++i) {
        EvalRecord rec;
        rec.name = "case" + std::to_string(i);
        rec.error_ratio = ratios[i];
        rep.records.push_back(rec);
    }
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= 5.0;
    REQUIRE(rep.mean_error_ratio() == Catch::Approx(mean).margin(1e-12));
    REQUIRE(rep.worst_error_ratio() == Catch::Approx(6.5).margin(1e-12));
    REQUIRE(rep.median_error_ratio() == Catch::Approx(2.9).margin(1e-12));
    REQUIRE(rep.success_rate() == Catch::Approx(4.0 / 5.0).margin(1e-12));

    rep.records.pop_back();
    REQUIRE(rep.success_rate() == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(rep.median_error_ratio() == Catch::Approx(0.5 * (1.4 + 2.9)).margin(1e-12));

    EvalReport empty;
    REQUIRE(empty.mean_error_ratio() == 0.0);
    REQUIRE(empty.success_rate() == 0.0);
    REQUIRE(empty.median_error_ratio() == 0.0);
}
