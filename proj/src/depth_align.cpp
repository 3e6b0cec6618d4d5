#include "geocond/depth_align.hpp"

#include <algorithm>
#include <cmath>

namespace geocond {

void AlignmentConfig::validate() const {
    if (iterations < 1) throw InvalidInput("iterations must be >= 1");
    if (!(inlier_percentile > 0.0) || inlier_percentile > 1.0)
        throw InvalidInput("inlier_percentile must be in (0, 1]");
    if (!(validity_epsilon > 0.0)) throw InvalidInput("validity_epsilon must be positive");
    if (min_inliers < 2) throw InvalidInput("min_inliers must be >= 2");
}

double percentile(std::span<const double> values, double q) {
    if (values.empty()) throw InsufficientData("percentile of empty sequence");
    if (!(q > 0.0) || q > 1.0) throw InvalidInput("percentile q must be in (0, 1]");
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::vector<double> copy(values.begin(), values.end());
    std::nth_element(copy.begin(), copy.begin() + (rank - 1), copy.end());
    return copy[rank - 1];
}

namespace {

constexpr double kDegenerateRel = 1e-12;

struct FitSums {
    double sp = 0, ss = 0, spp = 0, sps = 0;
    std::int64_t n = 0;
};

ScaleShift solve(const FitSums& f) {
    if (f.n < 2) throw InsufficientData("scale_fit needs >= 2 valid pixels");
    const double n = static_cast<double>(f.n);
    const double delta = n * f.spp - f.sp * f.sp;
    if (std::abs(delta) <= kDegenerateRel * n * f.spp)
        throw DegenerateInput("scale_fit: predicted depth is (near-)constant, delta ~ 0");
    return {(n * f.sps - f.sp * f.ss) / delta, (f.spp * f.ss - f.sps * f.sp) / delta};
}

void check_same_dims(const DepthFrame& a, const DepthFrame& b) {
    if (a.height != b.height || a.width != b.width)
        throw InvalidInput("depth frames differ in dimensions");
}

}  // namespace

ScaleShift scale_fit_pooled(std::span<const double> pred, std::span<const double> sensor,
                            std::span<const std::uint8_t> valid) {
    if (pred.size() != sensor.size() || pred.size() != valid.size())
        throw InvalidInput("scale_fit: size mismatch");
    FitSums f;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!valid[i]) continue;
        const double p = pred[i], s = sensor[i];
        f.sp += p;
        f.ss += s;
        f.spp += p * p;
        f.sps += p * s;
        ++f.n;
    }
    return solve(f);
}

ScaleShift scale_fit(const DepthFrame& pred, const DepthFrame& sensor, const Mask& mask) {
    check_same_dims(pred, sensor);
    if (mask.height() != pred.height || mask.width() != pred.width)
        throw InvalidInput("mask dimensions differ from depth frames");
    return scale_fit_pooled(pred.data, sensor.data, mask.data());
}

namespace {

// Pooled core of Algorithm-style iterative alignment. `valid` is mutated
// in place to the final inlier set.
struct PooledAlign {
    double scale = 1, shift = 0;
    std::vector<IterationStat> stats;
    double rmse = 0;
    std::int64_t inliers = 0;
};

PooledAlign align_pooled(std::span<const double> pred, std::span<const double> sensor,
                         std::vector<std::uint8_t>& valid, const AlignmentConfig& cfg) {
    cfg.validate();
    const std::size_t n = pred.size();

    std::int64_t live = 0;
    for (std::size_t i = 0; i < n; ++i) {
        valid[i] = (sensor[i] > cfg.validity_epsilon && pred[i] > cfg.validity_epsilon) ? 1 : 0;
        live += valid[i];
    }
    if (live < cfg.min_inliers)
        throw AlignmentInsufficientData(
            "initial valid set has " + std::to_string(live) + " pixels, need " +
                std::to_string(cfg.min_inliers),
            std::nullopt);

    PooledAlign out;
    std::vector<double> errs;
    for (int it = 0; it < cfg.iterations; ++it) {
        const ScaleShift fit = scale_fit_pooled(pred, sensor, valid);

        errs.clear();
        errs.reserve(static_cast<std::size_t>(live));
        for (std::size_t i = 0; i < n; ++i) {
            if (valid[i]) errs.push_back(std::abs(fit.scale * pred[i] + fit.shift - sensor[i]));
        }
        const double tau = percentile(errs, cfg.inlier_percentile);

        std::int64_t kept = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!valid[i]) continue;
            if (std::abs(fit.scale * pred[i] + fit.shift - sensor[i]) < tau) {
                ++kept;
            } else {
                valid[i] = 0;
            }
        }
        out.scale = fit.scale;
        out.shift = fit.shift;
        out.stats.push_back({fit.scale, fit.shift, kept, tau});

        if (kept < cfg.min_inliers) {
            // The fit itself came from a set that still met min_inliers;
            // hand it back as the last good state (mask omitted).
            double acc = 0;
            std::int64_t cnt = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!valid[i]) continue;
                const double r = fit.scale * pred[i] + fit.shift - sensor[i];
                acc += r * r;
                ++cnt;
            }
            AlignmentResult res;
            res.scale = fit.scale;
            res.shift = fit.shift;
            res.inlier_count = kept;
            res.per_iteration = out.stats;
            res.residual_rmse_m = cnt ? std::sqrt(acc / static_cast<double>(cnt)) : 0.0;
            throw AlignmentInsufficientData(
                "inlier set shrank to " + std::to_string(kept) + " (< " +
                    std::to_string(cfg.min_inliers) + ") at iteration " + std::to_string(it + 1),
                res);
        }
        live = kept;
    }

    out.inliers = live;
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        const double r = out.scale * pred[i] + out.shift - sensor[i];
        acc += r * r;
    }
    out.rmse = live ? std::sqrt(acc / static_cast<double>(live)) : 0.0;
    return out;
}

DepthFrame apply_affine(const DepthFrame& pred, double s, double b) {
    DepthFrame metric(pred.height, pred.width, DepthUnit::meters);
    for (std::size_t i = 0; i < pred.data.size(); ++i) metric.data[i] = s * pred.data[i] + b;
    return metric;
}

}  // namespace

std::pair<DepthFrame, AlignmentResult> dynamic_mask_align(const DepthFrame& pred,
                                                          const DepthFrame& sensor,
                                                          const AlignmentConfig& cfg) {
    check_same_dims(pred, sensor);
    std::vector<std::uint8_t> valid(pred.data.size(), 0);
    const PooledAlign a = align_pooled(pred.data, sensor.data, valid, cfg);

    AlignmentResult res;
    res.scale = a.scale;
    res.shift = a.shift;
    res.inlier_count = a.inliers;
    res.per_iteration = a.stats;
    res.residual_rmse_m = a.rmse;
    res.final_mask = Mask(pred.height, pred.width);
    std::copy(valid.begin(), valid.end(), res.final_mask.data().begin());
    return {apply_affine(pred, a.scale, a.shift), std::move(res)};
}

std::pair<std::vector<DepthFrame>, ClipAlignmentResult> dynamic_mask_align_joint(
    std::span<const DepthFrame> pred, std::span<const DepthFrame> sensor,
    const AlignmentConfig& cfg) {
    if (pred.empty() || pred.size() != sensor.size())
        throw InvalidInput("joint alignment needs equally many pred and sensor frames");
    for (std::size_t i = 0; i < pred.size(); ++i) check_same_dims(pred[i], sensor[i]);

    const std::size_t per = pred.front().data.size();
    std::vector<double> p, s;
    p.reserve(per * pred.size());
    s.reserve(per * pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].data.size() != per) throw InvalidInput("frames differ in dimensions");
        p.insert(p.end(), pred[i].data.begin(), pred[i].data.end());
        s.insert(s.end(), sensor[i].data.begin(), sensor[i].data.end());
    }

    std::vector<std::uint8_t> valid(p.size(), 0);
    const PooledAlign a = align_pooled(p, s, valid, cfg);

    ClipAlignmentResult res;
    res.scale = a.scale;
    res.shift = a.shift;
    res.inlier_count = a.inliers;
    res.per_iteration = a.stats;
    res.residual_rmse_m = a.rmse;
    std::vector<DepthFrame> metric;
    metric.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        metric.push_back(apply_affine(pred[i], a.scale, a.shift));
        Mask m(pred[i].height, pred[i].width);
        std::copy(valid.begin() + static_cast<std::ptrdiff_t>(i * per),
                  valid.begin() + static_cast<std::ptrdiff_t>((i + 1) * per), m.data().begin());
        res.frame_masks.push_back(std::move(m));
    }
    return {std::move(metric), std::move(res)};
}

}  // namespace geocond
