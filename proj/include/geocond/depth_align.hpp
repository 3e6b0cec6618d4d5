#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "geocond/raster.hpp"

namespace geocond {

struct AlignmentConfig {
    int iterations = 2;
    double inlier_percentile = 0.80;
    double validity_epsilon = 1e-4;  // meters
    std::int64_t min_inliers = 100;

    void validate() const;
};

struct ScaleShift {
    double scale = 1.0;
    double shift = 0.0;  // meters
};

struct IterationStat {
    double scale = 1.0;
    double shift = 0.0;
    std::int64_t inlier_count = 0;  // after this iteration's mask update
    double threshold = 0.0;         // tau
};

struct AlignmentResult {
    double scale = 1.0;
    double shift = 0.0;
    Mask final_mask;
    std::int64_t inlier_count = 0;
    std::vector<IterationStat> per_iteration;
    double residual_rmse_m = 0.0;  // over final inliers
};

/// Joint (pooled) alignment over a clip: one (s, b), per-frame masks.
struct ClipAlignmentResult {
    double scale = 1.0;
    double shift = 0.0;
    std::vector<Mask> frame_masks;
    std::int64_t inlier_count = 0;
    std::vector<IterationStat> per_iteration;
    double residual_rmse_m = 0.0;
};

/// Thrown when the inlier set shrinks below min_inliers; carries the last
/// state that still satisfied it, when one exists.
class AlignmentInsufficientData : public InsufficientData {
   public:
    AlignmentInsufficientData(const std::string& msg, std::optional<AlignmentResult> last_good)
        : InsufficientData(msg), last_good_(std::move(last_good)) {}

    const std::optional<AlignmentResult>& last_good() const { return last_good_; }

   private:
    std::optional<AlignmentResult> last_good_;
};

/// Nearest-rank percentile: the ceil(q*n)-th smallest value, no
/// interpolation, invariant under permutation. The rank is computed as
/// ceil(q*n - 1e-9) so that q*n landing one ulp above an integer (an IEEE
/// representation artifact, e.g. 0.8*5) does not bump the rank.
double percentile(std::span<const double> values, double q);

/// Closed-form least squares for sensor ~ scale*pred + shift over masked
/// pixels, accumulated in double:
///   s = (N*sum(p*s) - sum(p)*sum(s)) / delta
///   b = (sum(p^2)*sum(s) - sum(p*s)*sum(p)) / delta,  delta = N*sum(p^2) - sum(p)^2
/// Throws InsufficientData (< 2 valid pixels) or DegenerateInput
/// (|delta| <= 1e-12 * N * sum(p^2), i.e. effectively constant pred).
ScaleShift scale_fit(const DepthFrame& pred, const DepthFrame& sensor, const Mask& mask);

ScaleShift scale_fit_pooled(std::span<const double> pred, std::span<const double> sensor,
                            std::span<const std::uint8_t> valid);

/// Iterative robust alignment: mask starts at (sensor > eps) & (pred > eps);
/// each round fits (s, b), maps metric = s*pred + b, thresholds the error
/// map |metric - sensor| at the inlier percentile and keeps strictly-below
/// pixels. Returns metric depth for every pixel using the final fit.
std::pair<DepthFrame, AlignmentResult> dynamic_mask_align(const DepthFrame& pred,
                                                          const DepthFrame& sensor,
                                                          const AlignmentConfig& cfg = {});

/// Same procedure with pixels pooled across all frames of a clip.
std::pair<std::vector<DepthFrame>, ClipAlignmentResult> dynamic_mask_align_joint(
    std::span<const DepthFrame> pred, std::span<const DepthFrame> sensor,
    const AlignmentConfig& cfg = {});

}  // namespace geocond
