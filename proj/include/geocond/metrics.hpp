#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "geocond/depth_align.hpp"
#include "geocond/raster.hpp"

namespace geocond {
namespace metrics {

struct DepthErrorStats {
    double rmse = 0;
    double abs_rel = 0;
    double sq_rel = 0;
};

/// Raw residual statistics of pred against gt over the mask, no alignment:
/// rmse = sqrt(mean (p-g)^2), abs_rel = mean |p-g|/g, sq_rel = mean (p-g)^2/g.
DepthErrorStats depth_error_stats(const DepthFrame& pred, const DepthFrame& gt, const Mask& mask);

struct DepthMetricReport {
    double rmse = 0;
    double abs_rel = 0;
    double sq_rel = 0;
    std::vector<DepthErrorStats> per_frame;
    std::vector<ScaleShift> alignment_used;
    std::vector<int> excluded_frames;  // frames with degenerate fits
};

/// Scale-invariant depth metrics: per frame, fit (s, b) of pred onto gt
/// over the mask via scale_fit, evaluate residual stats on s*pred + b,
/// then average across frames. Degenerate frames are excluded and listed.
DepthMetricReport depth_metrics(std::span<const DepthFrame> pred, std::span<const DepthFrame> gt,
                                std::span<const Mask> masks);

struct NormalMetricReport {
    double mean_err_deg = 0;
    double median_err_deg = 0;
    std::vector<double> per_frame_mean;
    std::vector<double> per_frame_median;
};

/// Per-pixel angle = arccos(clamp(<p, g>, -1, 1)) in degrees over the mask
/// (g negated first when flip is set); nearest-rank median; frame-averaged.
/// Inputs are validated to be unit within 1e-3 and renormalized.
NormalMetricReport normal_metrics(std::span<const NormalFrame> pred,
                                  std::span<const NormalFrame> gt, std::span<const Mask> masks,
                                  bool flip = false);

struct MatchRecord {
    int frame = 0;
    double u1 = 0, v1 = 0, u2 = 0, v2 = 0;
    double score = 0;
};

struct MatchReport {
    std::vector<int> frames;                   // frame indices present, sorted
    std::vector<std::int64_t> matched_pixels;  // per frame pair
    double mean_matched = 0;
};

using Homography = std::array<double, 9>;  // row-major, maps view-1 pixels to view-2

/// Counts matches with score >= score_threshold and, when a ground-truth
/// homography is supplied, reprojection error <= reproj_threshold_px.
MatchReport count_matches(std::span<const MatchRecord> matches, double score_threshold,
                          double reproj_threshold_px,
                          const std::optional<Homography>& homography);

/// Parses the `frame u1 v1 u2 v2 score` line format.
std::vector<MatchRecord> read_matches_file(const std::filesystem::path& path);

/// Exhaustive ZNCC block matcher (desk-scale stand-in for a learned
/// matcher): best block in B within the search window for each grid block
/// of A, emitted when ZNCC >= zncc_min. RGB is converted to luma first.
std::vector<MatchRecord> naive_block_match(const Raster& frame_a, const Raster& frame_b,
                                           int block, int search, double zncc_min);

/// <a, b> / (||a|| ||b||).
double cosine_similarity(std::span<const float> a, std::span<const float> b);

}  // namespace metrics
}  // namespace geocond
