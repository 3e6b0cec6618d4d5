#include "geocond/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace geocond {
namespace metrics {

DepthErrorStats depth_error_stats(const DepthFrame& pred, const DepthFrame& gt, const Mask& mask) {
    if (pred.height != gt.height || pred.width != gt.width || mask.height() != gt.height ||
        mask.width() != gt.width)
        throw InvalidInput("depth_error_stats: dimension mismatch");
    double se = 0, ar = 0, sr = 0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < gt.data.size(); ++i) {
        if (!mask.data()[i]) continue;
        const double g = gt.data[i];
        if (!(g > 0)) throw InvalidInput("depth_error_stats: gt must be positive on the mask");
        const double r = pred.data[i] - g;
        se += r * r;
        ar += std::abs(r) / g;
        sr += r * r / g;
        ++n;
    }
    if (n == 0) throw InsufficientData("depth_error_stats: empty mask");
    const double dn = static_cast<double>(n);
    return {std::sqrt(se / dn), ar / dn, sr / dn};
}

DepthMetricReport depth_metrics(std::span<const DepthFrame> pred, std::span<const DepthFrame> gt,
                                std::span<const Mask> masks) {
    if (pred.size() != gt.size() || pred.size() != masks.size() || pred.empty())
        throw InvalidInput("depth_metrics: need equally many pred/gt/mask frames");

    DepthMetricReport rep;
    double acc_rmse = 0, acc_ar = 0, acc_sr = 0;
    int used = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        ScaleShift fit;
        try {
            fit = scale_fit(pred[f], gt[f], masks[f]);
        } catch (const DegenerateInput&) {
            rep.excluded_frames.push_back(static_cast<int>(f));
            continue;
        }
        DepthFrame aligned(pred[f].height, pred[f].width, DepthUnit::meters);
        for (std::size_t i = 0; i < pred[f].data.size(); ++i)
            aligned.data[i] = fit.scale * pred[f].data[i] + fit.shift;
        const DepthErrorStats st = depth_error_stats(aligned, gt[f], masks[f]);
        rep.per_frame.push_back(st);
        rep.alignment_used.push_back(fit);
        acc_rmse += st.rmse;
        acc_ar += st.abs_rel;
        acc_sr += st.sq_rel;
        ++used;
    }
    if (used == 0) throw InsufficientData("depth_metrics: every frame was degenerate");
    rep.rmse = acc_rmse / used;
    rep.abs_rel = acc_ar / used;
    rep.sq_rel = acc_sr / used;
    return rep;
}

namespace {

constexpr double kRad2Deg = 57.29577951308232087679815481410517;

double pixel_angle_deg(double px, double py, double pz, double gx, double gy, double gz) {
    const double np = std::sqrt(px * px + py * py + pz * pz);
    const double ng = std::sqrt(gx * gx + gy * gy + gz * gz);
    if (std::abs(np - 1.0) > 1e-3 || std::abs(ng - 1.0) > 1e-3)
        throw InvalidInput("normal_metrics: non-unit normal on the mask");
    const double d = std::clamp((px * gx + py * gy + pz * gz) / (np * ng), -1.0, 1.0);
    return std::acos(d) * kRad2Deg;
}

}  // namespace

NormalMetricReport normal_metrics(std::span<const NormalFrame> pred,
                                  std::span<const NormalFrame> gt, std::span<const Mask> masks,
                                  bool flip) {
    if (pred.size() != gt.size() || pred.size() != masks.size() || pred.empty())
        throw InvalidInput("normal_metrics: need equally many pred/gt/mask frames");

    NormalMetricReport rep;
    const double gsign = flip ? -1.0 : 1.0;
    double acc_mean = 0, acc_med = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        const auto& p = pred[f];
        const auto& g = gt[f];
        const auto& m = masks[f];
        if (p.height != g.height || p.width != g.width || m.height() != p.height ||
            m.width() != p.width)
            throw InvalidInput("normal_metrics: dimension mismatch");

        std::vector<double> angles;
        angles.reserve(p.plane());
        for (int y = 0; y < p.height; ++y) {
            for (int x = 0; x < p.width; ++x) {
                if (!m.at(y, x)) continue;
                angles.push_back(pixel_angle_deg(p.nx(y, x), p.ny(y, x), p.nz(y, x),
                                                 gsign * g.nx(y, x), gsign * g.ny(y, x),
                                                 gsign * g.nz(y, x)));
            }
        }
        if (angles.empty()) throw InsufficientData("normal_metrics: empty mask in frame " +
                                                   std::to_string(f));
        double mean = 0;
        for (double a : angles) mean += a;
        mean /= static_cast<double>(angles.size());
        const double median = percentile(angles, 0.5);
        rep.per_frame_mean.push_back(mean);
        rep.per_frame_median.push_back(median);
        acc_mean += mean;
        acc_med += median;
    }
    rep.mean_err_deg = acc_mean / static_cast<double>(pred.size());
    rep.median_err_deg = acc_med / static_cast<double>(pred.size());
    return rep;
}

MatchReport count_matches(std::span<const MatchRecord> matches, double score_threshold,
                          double reproj_threshold_px,
                          const std::optional<Homography>& homography) {
    std::map<int, std::int64_t> per_frame;
    for (const auto& m : matches) per_frame[m.frame];  // register every frame present
    for (const auto& m : matches) {
        if (m.score < score_threshold) continue;
        if (homography) {
            const auto& H = *homography;
            const double w = H[6] * m.u1 + H[7] * m.v1 + H[8];
            if (w == 0) continue;
            const double u = (H[0] * m.u1 + H[1] * m.v1 + H[2]) / w;
            const double v = (H[3] * m.u1 + H[4] * m.v1 + H[5]) / w;
            const double err = std::hypot(u - m.u2, v - m.v2);
            if (err > reproj_threshold_px) continue;
        }
        ++per_frame[m.frame];
    }

    MatchReport rep;
    double total = 0;
    for (const auto& [frame, count] : per_frame) {
        rep.frames.push_back(frame);
        rep.matched_pixels.push_back(count);
        total += static_cast<double>(count);
    }
    rep.mean_matched = per_frame.empty() ? 0.0 : total / static_cast<double>(per_frame.size());
    return rep;
}

std::vector<MatchRecord> read_matches_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matches file: " + path.string());
    std::vector<MatchRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        MatchRecord m;
        if (!(ss >> m.frame >> m.u1 >> m.v1 >> m.u2 >> m.v2 >> m.score))
            throw FormatError("malformed matches line " + std::to_string(lineno));
        out.push_back(m);
    }
    return out;
}

namespace {

std::vector<double> to_luma(const Raster& r) {
    const std::size_t plane = r.pixel_count();
    std::vector<double> out(plane);
    auto mix = [&](auto px) {
        if (r.channels() == 1) {
            for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<double>(px[i]);
        } else if (r.channels() == 3) {
            for (std::size_t i = 0; i < plane; ++i)
                out[i] = 0.299 * px[i] + 0.587 * px[plane + i] + 0.114 * px[2 * plane + i];
        } else {
            throw InvalidInput("block matcher expects 1- or 3-channel frames");
        }
    };
    switch (r.dtype()) {
        case Dtype::uint8: mix(r.as<const std::uint8_t>()); break;
        case Dtype::uint16: mix(r.as<const std::uint16_t>()); break;
        case Dtype::float32: mix(r.as<const float>()); break;
    }
    return out;
}

struct BlockStats {
    double mean = 0, var = 0;
};

BlockStats block_stats(const std::vector<double>& img, int w, int x0, int y0, int block) {
    double s = 0, ss = 0;
    for (int y = 0; y < block; ++y) {
        for (int x = 0; x < block; ++x) {
            const double v = img[static_cast<std::size_t>(y0 + y) * w + (x0 + x)];
            s += v;
            ss += v * v;
        }
    }
    const double n = static_cast<double>(block) * block;
    const double mean = s / n;
    return {mean, ss / n - mean * mean};
}

}  // namespace

std::vector<MatchRecord> naive_block_match(const Raster& frame_a, const Raster& frame_b,
                                           int block, int search, double zncc_min) {
    if (block < 2) throw InvalidInput("block size must be >= 2");
    if (search < 0) throw InvalidInput("search radius must be >= 0");
    if (frame_a.height() != frame_b.height() || frame_a.width() != frame_b.width())
        throw InvalidInput("frames differ in size");
    if (block > frame_a.width() || block > frame_a.height())
        throw InvalidInput("block larger than frame");

    const int w = frame_a.width(), h = frame_a.height();
    const std::vector<double> A = to_luma(frame_a);
    const std::vector<double> B = to_luma(frame_b);

    std::vector<MatchRecord> out;
    for (int by = 0; by + block <= h; by += block) {
        for (int bx = 0; bx + block <= w; bx += block) {
            const BlockStats sa = block_stats(A, w, bx, by, block);
            if (sa.var <= 1e-12) continue;  // textureless block, ZNCC undefined

            double best = -2.0;
            int best_x = 0, best_y = 0;
            for (int dy = -search; dy <= search; ++dy) {
                const int y0 = by + dy;
                if (y0 < 0 || y0 + block > h) continue;
                for (int dx = -search; dx <= search; ++dx) {
                    const int x0 = bx + dx;
                    if (x0 < 0 || x0 + block > w) continue;
                    const BlockStats sb = block_stats(B, w, x0, y0, block);
                    if (sb.var <= 1e-12) continue;
                    double cov = 0;
                    for (int y = 0; y < block; ++y) {
                        for (int x = 0; x < block; ++x) {
                            cov += (A[static_cast<std::size_t>(by + y) * w + (bx + x)] - sa.mean) *
                                   (B[static_cast<std::size_t>(y0 + y) * w + (x0 + x)] - sb.mean);
                        }
                    }
                    cov /= static_cast<double>(block) * block;
                    const double zncc = cov / std::sqrt(sa.var * sb.var);
                    if (zncc > best) {
                        best = zncc;
                        best_x = x0;
                        best_y = y0;
                    }
                }
            }
            if (best >= zncc_min) {
                MatchRecord m;
                m.frame = 0;
                m.u1 = bx + block / 2.0;
                m.v1 = by + block / 2.0;
                m.u2 = best_x + block / 2.0;
                m.v2 = best_y + block / 2.0;
                m.score = best;
                out.push_back(m);
            }
        }
    }
    return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
    if (a.empty() || a.size() != b.size())
        throw InvalidInput("cosine_similarity: dimensions must match and be nonzero");
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += static_cast<double>(a[i]) * b[i];
        aa += static_cast<double>(a[i]) * a[i];
        bb += static_cast<double>(b[i]) * b[i];
    }
    if (!(aa > 0) || !(bb > 0)) throw InvalidInput("cosine_similarity: zero vector");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace metrics
}  // namespace geocond
