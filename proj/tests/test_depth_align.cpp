#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "geocond/depth_align.hpp"
#include "geocond/rng.hpp"

using namespace geocond;

namespace {

// Independent oracle: centered normal equations with Neumaier-compensated
// sums (a different algebraic route than the production closed form).
struct Kahan {
    double sum = 0, c = 0;
    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            c += (sum - t) + v;
        else
            c += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + c; }
};

ScaleShift oracle_fit(const DepthFrame& pred, const DepthFrame& sensor, const Mask& mask) {
    Kahan sp, ss;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (!mask.data()[i]) continue;
        sp.add(pred.data[i]);
        ss.add(sensor.data[i]);
        ++n;
    }
    const double mp = sp.value() / static_cast<double>(n);
    const double ms = ss.value() / static_cast<double>(n);
    Kahan cov, var;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (!mask.data()[i]) continue;
        cov.add((pred.data[i] - mp) * (sensor.data[i] - ms));
        var.add((pred.data[i] - mp) * (pred.data[i] - mp));
    }
    const double s = cov.value() / var.value();
    return {s, ms - s * mp};
}

DepthFrame uniform_frame(int h, int w, double lo, double hi, Rng& rng, DepthUnit unit) {
    DepthFrame d(h, w, unit);
    for (auto& v : d.data) v = rng.uniform(lo, hi);
    return d;
}

DepthFrame affine_of(const DepthFrame& src, double s, double b, DepthUnit unit) {
    DepthFrame out(src.height, src.width, unit);
    for (std::size_t i = 0; i < src.data.size(); ++i) out.data[i] = s * src.data[i] + b;
    return out;
}

}  // namespace

TEST_CASE("percentile: nearest rank") {
    const std::vector<double> v = {1, 2, 3, 4, 5};
    CHECK(percentile(v, 0.80) == 4.0);
    CHECK(percentile(v, 1.0) == 5.0);
    CHECK(percentile(v, 0.2) == 1.0);
    CHECK(percentile(v, 0.5) == 3.0);

    const std::vector<double> one = {42.0};
    CHECK(percentile(one, 0.01) == 42.0);
    CHECK(percentile(one, 0.99) == 42.0);

    CHECK_THROWS_AS(percentile({}, 0.5), InsufficientData);
    CHECK_THROWS_AS(percentile(v, 0.0), InvalidInput);
    CHECK_THROWS_AS(percentile(v, 1.5), InvalidInput);
}

TEST_CASE("percentile: permutation invariance") {
    Rng rng(7);
    std::vector<double> v(257);
    for (auto& x : v) x = rng.uniform(-5, 5);
    const double ref = percentile(v, 0.37);
    std::vector<double> shuffled = v;
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.next_u64() % i]);
    CHECK(percentile(shuffled, 0.37) == ref);
}

TEST_CASE("percentile: median of 1e4 uniform draws near 0.5 (sort oracle)") {
    Rng rng(99);
    std::vector<double> v(10000);
    for (auto& x : v) x = rng.uniform();
    const double got = percentile(v, 0.5);
    CHECK(std::abs(got - 0.5) < 0.02);

    // sort-based oracle computes the identical nearest-rank value
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(got == sorted[4999]);  // ceil(0.5 * 10000) = 5000, 1-indexed
}

TEST_CASE("scale_fit: identity case") {
    Rng rng(1);
    const DepthFrame pred = uniform_frame(16, 16, 0.5, 2.0, rng, DepthUnit::relative);
    const Mask full(16, 16, 1);
    const auto [s, b] = scale_fit(pred, pred, full);
    CHECK(s == 1.0);
    CHECK(b == 0.0);
}

TEST_CASE("scale_fit: recovers (2.5, 0.3) on 64x64 to 1e-9 relative vs compensated oracle") {
    Rng rng(42);
    const DepthFrame pred = uniform_frame(64, 64, 0.5, 2.0, rng, DepthUnit::relative);
    const DepthFrame sensor = affine_of(pred, 2.5, 0.3, DepthUnit::meters);
    const Mask full(64, 64, 1);

    const auto [s, b] = scale_fit(pred, sensor, full);
    CHECK(std::abs(s - 2.5) / 2.5 < 1e-9);
    CHECK(std::abs(b - 0.3) / 0.3 < 1e-9);

    const auto oracle = oracle_fit(pred, sensor, full);
    CHECK(std::abs(s - oracle.scale) / std::abs(oracle.scale) < 1e-9);
    CHECK(std::abs(b - oracle.shift) / std::abs(oracle.shift) < 1e-9);
}

TEST_CASE("scale_fit: constant pred is degenerate, tiny mask insufficient") {
    DepthFrame pred(8, 8, DepthUnit::relative, 1.0);
    DepthFrame sensor(8, 8, DepthUnit::meters, 2.0);
    const Mask full(8, 8, 1);
    CHECK_THROWS_AS(scale_fit(pred, sensor, full), DegenerateInput);

    Mask one(8, 8, 0);
    one.set(0, 0, 1);
    CHECK_THROWS_AS(scale_fit(pred, sensor, one), InsufficientData);
}

TEST_CASE("scale_fit: affine equivariance to 1e-12 relative") {
    Rng rng(5);
    const DepthFrame pred = uniform_frame(32, 32, 0.5, 2.0, rng, DepthUnit::relative);
    const DepthFrame sensor = uniform_frame(32, 32, 0.8, 3.0, rng, DepthUnit::meters);
    const Mask full(32, 32, 1);
    const auto base = scale_fit(pred, sensor, full);

    // exactly representable affine params keep the transform rounding-free
    const double alphas[] = {2.0, 0.5, 4.0};
    const double betas[] = {0.25, -0.5, 1.0};
    for (double a : alphas) {
        for (double be : betas) {
            const DepthFrame mapped = affine_of(sensor, a, be, DepthUnit::meters);
            const auto got = scale_fit(pred, mapped, full);
            CHECK(std::abs(got.scale - a * base.scale) <=
                  1e-12 * std::abs(a * base.scale));
            CHECK(std::abs(got.shift - (a * base.shift + be)) <=
                  1e-12 * std::max(1.0, std::abs(a * base.shift + be)));
        }
    }
}

TEST_CASE("scale_fit: returned pair minimizes the sum of squared residuals") {
    Rng rng(17);
    const DepthFrame pred = uniform_frame(24, 24, 0.5, 2.0, rng, DepthUnit::relative);
    DepthFrame sensor = affine_of(pred, 1.4, 0.2, DepthUnit::meters);
    for (auto& v : sensor.data) v += rng.uniform(-0.05, 0.05);
    const Mask full(24, 24, 1);
    const auto [s, b] = scale_fit(pred, sensor, full);

    auto ssr = [&](double ss, double bb) {
        double acc = 0;
        for (std::size_t i = 0; i < pred.data.size(); ++i) {
            const double r = ss * pred.data[i] + bb - sensor.data[i];
            acc += r * r;
        }
        return acc;
    };
    const double best = ssr(s, b);
    for (int i = 0; i < 100; ++i) {
        const double ds = rng.uniform(-0.1, 0.1);
        const double db = rng.uniform(-0.1, 0.1);
        CHECK(ssr(s + ds, b + db) >= best);
    }
}

TEST_CASE("dynamic_mask_align: clean pair matches plain scale_fit") {
    Rng rng(8);
    const DepthFrame gt = uniform_frame(48, 48, 0.6, 2.2, rng, DepthUnit::meters);
    const DepthFrame pred = affine_of(gt, 1.0 / 1.8, 0.2 / 1.8, DepthUnit::relative);

    const auto [metric, res] = dynamic_mask_align(pred, gt, {});
    const auto direct = scale_fit(pred, gt, Mask(48, 48, 1));
    CHECK(res.scale == doctest::Approx(direct.scale).epsilon(1e-9));
    CHECK(res.shift == doctest::Approx(direct.shift).epsilon(1e-9));
    CHECK(res.per_iteration.size() == 2);

    // no outliers: the percentile threshold trims roughly uniformly
    const auto total = static_cast<std::int64_t>(48 * 48);
    CHECK(res.per_iteration[0].inlier_count <=
          static_cast<std::int64_t>(0.80 * total) + 1);
    CHECK(res.per_iteration[1].inlier_count <=
          static_cast<std::int64_t>(0.80 * res.per_iteration[0].inlier_count) + 1);
}

TEST_CASE("dynamic_mask_align: holes + outliers, oracle = exact fit on clean subset") {
    Rng rng(31337);
    const int h = 64, w = 96;
    const double s_true = 1.8, b_true = -0.2;

    const DepthFrame gt = uniform_frame(h, w, 0.5, 2.0, rng, DepthUnit::meters);
    const DepthFrame pred = affine_of(gt, 1.0 / s_true, -b_true / s_true, DepthUnit::relative);
    DepthFrame sensor = gt;
    Mask clean(h, w, 1);
    for (std::size_t i = 0; i < sensor.data.size(); ++i) {
        const double u = rng.uniform();
        if (u < 0.2) {
            sensor.data[i] = 0;  // hole
            clean.data()[i] = 0;
        } else if (u < 0.3) {
            sensor.data[i] = rng.uniform(0.0, 5.0);  // outlier
            clean.data()[i] = 0;
        }
    }

    const auto [metric, res] = dynamic_mask_align(pred, sensor, {});
    const auto oracle = scale_fit(pred, sensor, clean);
    CHECK(std::abs(res.scale - oracle.scale) / oracle.scale < 0.01);
    CHECK(std::abs(res.shift - oracle.shift) < 0.02);
    CHECK(std::abs(res.scale - s_true) / s_true < 0.01);
    CHECK(std::abs(res.shift - b_true) < 0.02);

    // metric = s*pred + b for every pixel, bit-exact, including masked-out
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        CHECK(metric.data[i] == res.scale * pred.data[i] + res.shift);
}

TEST_CASE("dynamic_mask_align: inlier counts never increase and result is deterministic") {
    Rng rng(4);
    const DepthFrame gt = uniform_frame(40, 40, 0.5, 2.0, rng, DepthUnit::meters);
    const DepthFrame pred = affine_of(gt, 0.5, -0.05, DepthUnit::relative);
    DepthFrame sensor = gt;
    for (auto& v : sensor.data) v = std::max(0.0, v + rng.uniform(-0.01, 0.01));

    AlignmentConfig cfg;
    cfg.iterations = 4;
    const auto [metric, res] = dynamic_mask_align(pred, sensor, cfg);
    REQUIRE(res.per_iteration.size() == 4);
    for (std::size_t i = 1; i < res.per_iteration.size(); ++i)
        CHECK(res.per_iteration[i].inlier_count <= res.per_iteration[i - 1].inlier_count);
    CHECK(res.inlier_count == res.final_mask.count());
    CHECK(res.residual_rmse_m >= 0.0);

    const auto [metric2, res2] = dynamic_mask_align(pred, sensor, cfg);
    CHECK(metric2.data == metric.data);
    CHECK(res2.scale == res.scale);
    CHECK(res2.shift == res.shift);
    CHECK(res2.final_mask == res.final_mask);
}

TEST_CASE("dynamic_mask_align: min_inliers violation carries the last good result") {
    Rng rng(12);
    const DepthFrame gt = uniform_frame(10, 10, 0.5, 2.0, rng, DepthUnit::meters);
    const DepthFrame pred = affine_of(gt, 1.0, 0.0, DepthUnit::relative);

    AlignmentConfig cfg;
    cfg.min_inliers = 90;  // 100 pixels; 80th percentile keeps ~80 -> violation
    try {
        dynamic_mask_align(pred, gt, cfg);
        FAIL("expected AlignmentInsufficientData");
    } catch (const AlignmentInsufficientData& e) {
        REQUIRE(e.last_good().has_value());
        CHECK(e.last_good()->scale == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(e.last_good()->per_iteration.size() >= 1);
    }

    // initial validity below min_inliers: no last-good state
    DepthFrame zero(10, 10, DepthUnit::meters, 0.0);
    try {
        dynamic_mask_align(pred, zero, cfg);
        FAIL("expected AlignmentInsufficientData");
    } catch (const AlignmentInsufficientData& e) {
        CHECK(!e.last_good().has_value());
    }
}

TEST_CASE("dynamic_mask_align: joint mode pools frames into one fit") {
    Rng rng(21);
    std::vector<DepthFrame> gts, preds;
    for (int f = 0; f < 5; ++f) {
        gts.push_back(uniform_frame(24, 24, 0.5 + 0.1 * f, 2.0, rng, DepthUnit::meters));
        preds.push_back(affine_of(gts.back(), 1.0 / 2.5, -0.3 / 2.5, DepthUnit::relative));
    }
    const auto [metric, res] = dynamic_mask_align_joint(preds, gts, {});
    CHECK(res.scale == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(res.shift == doctest::Approx(0.3).epsilon(1e-9));
    REQUIRE(metric.size() == 5);
    REQUIRE(res.frame_masks.size() == 5);
    std::int64_t total = 0;
    for (const auto& msk : res.frame_masks) total += msk.count();
    CHECK(total == res.inlier_count);
}
