#include <doctest.h>

#include <cmath>
#include <fstream>

#include "geocond/metrics.hpp"
#include "test_support.hpp"

using namespace geocond;
using namespace geocond::metrics;

namespace {

DepthFrame frame_of(std::initializer_list<double> vals, int h, int w) {
    DepthFrame d(h, w, DepthUnit::meters);
    std::copy(vals.begin(), vals.end(), d.data.begin());
    return d;
}

NormalFrame constant_normals(int h, int w, float nx, float ny, float nz) {
    NormalFrame n(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) n.set(y, x, nx, ny, nz);
    return n;
}

}  // namespace

TEST_CASE("depth_error_stats: the hand-computed 2-pixel instance") {
    // gt = [1, 2], residuals forced to [+0.1, -0.1] without re-alignment
    const DepthFrame gt = frame_of({1.0, 2.0}, 2, 1);
    const DepthFrame pred = frame_of({1.1, 1.9}, 2, 1);
    const Mask full(2, 1, 1);
    const DepthErrorStats st = depth_error_stats(pred, gt, full);
    CHECK(std::abs(st.rmse - 0.1) < 1e-12);
    CHECK(std::abs(st.abs_rel - 0.075) < 1e-12);
    CHECK(std::abs(st.sq_rel - 0.0075) < 1e-12);
}

TEST_CASE("depth_metrics: identical frames and affine-mapped frames score zero") {
    Rng rng(3);
    std::vector<DepthFrame> gt;
    std::vector<Mask> masks;
    for (int f = 0; f < 3; ++f) {
        DepthFrame d(12, 16, DepthUnit::meters);
        for (auto& v : d.data) v = rng.uniform(0.5, 2.5);
        gt.push_back(d);
        masks.emplace_back(12, 16, 1);
    }

    const DepthMetricReport same = depth_metrics(gt, gt, masks);
    CHECK(same.rmse == 0.0);
    CHECK(same.abs_rel == 0.0);
    CHECK(same.sq_rel == 0.0);

    for (double alpha : {0.5, 1.0, 3.0}) {
        for (double beta : {-0.1, 0.0, 0.2}) {
            std::vector<DepthFrame> pred = gt;
            for (auto& d : pred)
                for (auto& v : d.data) v = alpha * v + beta;
            const DepthMetricReport rep = depth_metrics(pred, gt, masks);
            CHECK(rep.rmse < 1e-12);
            CHECK(rep.abs_rel < 1e-12);
            CHECK(rep.sq_rel < 1e-12);
            REQUIRE(rep.alignment_used.size() == 3);
            CHECK(rep.alignment_used[0].scale == doctest::Approx(1.0 / alpha).epsilon(1e-9));
        }
    }
}

TEST_CASE("depth_metrics: aggregate equals the mean of per-frame values") {
    Rng rng(9);
    std::vector<DepthFrame> gt, pred;
    std::vector<Mask> masks;
    for (int f = 0; f < 4; ++f) {
        DepthFrame g(8, 8, DepthUnit::meters), p(8, 8, DepthUnit::meters);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            g.data[i] = rng.uniform(0.5, 2.0);
            p.data[i] = g.data[i] + rng.uniform(-0.05, 0.05);
        }
        gt.push_back(g);
        pred.push_back(p);
        masks.emplace_back(8, 8, 1);
    }
    const DepthMetricReport rep = depth_metrics(pred, gt, masks);
    double m = 0;
    for (const auto& st : rep.per_frame) m += st.rmse;
    CHECK(rep.rmse == doctest::Approx(m / 4).epsilon(1e-12));
}

TEST_CASE("depth_metrics: degenerate frames are excluded and reported") {
    DepthFrame g1(4, 4, DepthUnit::meters, 1.0);
    for (std::size_t i = 0; i < g1.data.size(); ++i) g1.data[i] = 1.0 + 0.01 * i;
    DepthFrame p1 = g1;
    DepthFrame g2(4, 4, DepthUnit::meters, 2.0);
    DepthFrame p2(4, 4, DepthUnit::meters, 1.0);  // constant pred -> degenerate fit
    std::vector<DepthFrame> gt = {g1, g2}, pred = {p1, p2};
    std::vector<Mask> masks = {Mask(4, 4, 1), Mask(4, 4, 1)};

    const DepthMetricReport rep = depth_metrics(pred, gt, masks);
    CHECK(rep.per_frame.size() == 1);
    REQUIRE(rep.excluded_frames.size() == 1);
    CHECK(rep.excluded_frames[0] == 1);
}

TEST_CASE("normal_metrics: identical, orthogonal, and mixed fields") {
    const int h = 4, w = 8;
    std::vector<Mask> masks = {Mask(h, w, 1)};

    const std::vector<NormalFrame> z = {constant_normals(h, w, 0, 0, -1)};
    const NormalMetricReport same = normal_metrics(z, z, masks, false);
    CHECK(same.mean_err_deg == 0.0);
    CHECK(same.median_err_deg == 0.0);

    const std::vector<NormalFrame> x = {constant_normals(h, w, 1, 0, 0)};
    const std::vector<NormalFrame> y = {constant_normals(h, w, 0, 1, 0)};
    const NormalMetricReport ortho = normal_metrics(x, y, masks, false);
    CHECK(std::abs(ortho.mean_err_deg - 90.0) < 1e-9);
    CHECK(std::abs(ortho.median_err_deg - 90.0) < 1e-9);

    // half the pixels at 0 degrees, half at 60: mean 30, nearest-rank
    // median at n/2 takes the lower value, 0
    NormalFrame mixed(h, w);
    for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
            if ((yy * w + xx) % 2 == 0)
                mixed.set(yy, xx, 0, 0, -1);
            else
                mixed.set(yy, xx, std::sin(3.14159265358979323846 / 3.0), 0,
                          -std::cos(3.14159265358979323846 / 3.0));
        }
    }
    const std::vector<NormalFrame> m = {mixed};
    const NormalMetricReport half = normal_metrics(m, z, masks, false);
    CHECK(std::abs(half.mean_err_deg - 30.0) < 1e-4);
    CHECK(std::abs(half.median_err_deg - 0.0) < 1e-9);

    // symmetry
    const NormalMetricReport ab = normal_metrics(m, z, masks, false);
    const NormalMetricReport ba = normal_metrics(z, m, masks, false);
    CHECK(ab.mean_err_deg == ba.mean_err_deg);
    CHECK(ab.median_err_deg == ba.median_err_deg);

    // flip flag measures against the negated reference
    const std::vector<NormalFrame> zneg = {constant_normals(h, w, 0, 0, 1)};
    const NormalMetricReport flipped = normal_metrics(z, zneg, masks, true);
    CHECK(std::abs(flipped.mean_err_deg) < 1e-9);

    Mask empty(h, w, 0);
    std::vector<Mask> none = {empty};
    CHECK_THROWS_AS(normal_metrics(z, z, none, false), InsufficientData);
}

TEST_CASE("count_matches: thresholds and homography gating") {
    std::vector<MatchRecord> matches;
    // frame 0: 3 matches below threshold
    for (int i = 0; i < 3; ++i) matches.push_back({0, 1.0 * i, 2.0, 1.0 * i, 2.0, 0.2});
    const MatchReport none = count_matches(matches, 0.5, 2.0, std::nullopt);
    CHECK(none.mean_matched == 0.0);
    REQUIRE(none.matched_pixels.size() == 1);
    CHECK(none.matched_pixels[0] == 0);

    // threshold 0, no homography: every line counts
    const MatchReport all = count_matches(matches, 0.0, 2.0, std::nullopt);
    CHECK(all.matched_pixels[0] == 3);

    // synthetic planar scene: identity homography, 500 true + 50 corrupted
    // by >= 5 px offsets; 2 px gate keeps exactly the true ones
    Rng rng(8);
    std::vector<MatchRecord> planar;
    for (int i = 0; i < 500; ++i) {
        const double u = rng.uniform(0, 100), v = rng.uniform(0, 100);
        planar.push_back({0, u, v, u, v, 0.9});
    }
    for (int i = 0; i < 50; ++i) {
        const double u = rng.uniform(0, 100), v = rng.uniform(0, 100);
        const double du = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(5.0, 9.0);
        planar.push_back({0, u, v, u + du, v, 0.9});
    }
    Homography identity = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const MatchReport gated = count_matches(planar, 0.5, 2.0, identity);
    CHECK(gated.matched_pixels[0] == 500);

    // per-frame means
    std::vector<MatchRecord> two = {{0, 0, 0, 0, 0, 1.0}, {1, 0, 0, 0, 0, 1.0},
                                    {1, 1, 1, 1, 1, 1.0}};
    const MatchReport mr = count_matches(two, 0.5, 2.0, std::nullopt);
    CHECK(mr.mean_matched == doctest::Approx(1.5));
}

TEST_CASE("read_matches_file: format and failure") {
    test::TempDir dir("matches");
    {
        std::ofstream out(dir.path() / "m.txt");
        out << "# comment\n0 1.5 2.5 1.25 2.5 0.75\n1 3 4 5 6 0.5\n";
    }
    const auto ms = read_matches_file(dir.path() / "m.txt");
    REQUIRE(ms.size() == 2);
    CHECK(ms[0].u2 == 1.25);
    CHECK(ms[1].frame == 1);

    {
        std::ofstream out(dir.path() / "bad.txt");
        out << "0 1 2 nonsense\n";
    }
    CHECK_THROWS_AS(read_matches_file(dir.path() / "bad.txt"), FormatError);
}

TEST_CASE("naive_block_match: self match, shifted match, noise rejection") {
    Rng rng(5);
    const Raster frame = test::random_raster(64, 64, 1, Dtype::uint8, rng);

    const auto self = naive_block_match(frame, frame, 8, 3, 0.99);
    CHECK(self.size() == 64);  // every 8x8 grid block, zero offset
    for (const auto& m : self) {
        CHECK(m.u1 == m.u2);
        CHECK(m.v1 == m.v2);
        CHECK(m.score >= 0.99);
    }

    // shift the frame 3 px right; offsets must all be (3, 0)
    Raster shifted(64, 64, 1, Dtype::uint8);
    auto src = frame.as<const std::uint8_t>();
    auto dst = shifted.as<std::uint8_t>();
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            dst[static_cast<std::size_t>(y) * 64 + x] =
                src[static_cast<std::size_t>(y) * 64 + ((x - 3 + 64) % 64)];
    const auto moved = naive_block_match(frame, shifted, 8, 4, 0.98);
    CHECK(moved.size() >= 48);  // blocks whose window stays in bounds
    for (const auto& m : moved) {
        if (m.u1 + 3 + 4 + 4 > 64) continue;  // wrap-around columns
        CHECK(m.u2 - m.u1 == 3.0);
        CHECK(m.v2 - m.v1 == 0.0);
    }

    // uncorrelated noise: at most 1% of blocks pass a 0.9 gate
    const Raster noise_a = test::random_raster(64, 64, 1, Dtype::uint8, rng);
    const Raster noise_b = test::random_raster(64, 64, 1, Dtype::uint8, rng);
    const auto bogus = naive_block_match(noise_a, noise_b, 8, 4, 0.9);
    CHECK(bogus.size() <= 1);  // 64 blocks, 1% bound rounds up to <= 1

    CHECK_THROWS_AS(naive_block_match(frame, frame, 100, 2, 0.5), InvalidInput);
}

TEST_CASE("cosine_similarity: identities and scale invariance") {
    const std::vector<float> a = {1.f, 2.f, 3.f};
    const std::vector<float> na = {-1.f, -2.f, -3.f};
    const std::vector<float> e1 = {1.f, 0.f, 0.f};
    const std::vector<float> e2 = {0.f, 1.f, 0.f};

    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(e1, e2) == 0.0);
    CHECK(cosine_similarity(a, na) == doctest::Approx(-1.0).epsilon(1e-12));

    std::vector<float> a2 = {2.f, 4.f, 6.f};
    std::vector<float> a3 = {0.5f, 1.f, 1.5f};
    CHECK(std::abs(cosine_similarity(a2, a3) - cosine_similarity(a, a)) < 1e-12);

    const std::vector<float> zero = {0.f, 0.f, 0.f};
    CHECK_THROWS_AS(cosine_similarity(a, zero), InvalidInput);
    const std::vector<float> shorter = {1.f};
    CHECK_THROWS_AS(cosine_similarity(a, shorter), InvalidInput);
}
