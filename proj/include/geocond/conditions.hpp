#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geocond/pack.hpp"
#include "geocond/raster.hpp"

namespace geocond {
namespace cond {

/// Externally produced per-object annotation: mask + embedding are
/// ingested from sidecar files, never computed here.
struct ObjectRecord {
    std::string object_id;
    std::string description;
    std::array<int, 4> bbox{};  // x, y, w, h in pixels
    std::string mask_path;      // relative to the pack directory
    std::vector<float> embedding;
    int source_frame = 0;
};

struct BackgroundRecord {
    Raster image;  // rgb, clip resolution
    int source_frame = 0;
    bool inpainted = false;
};

struct ObjectCropInfo {
    std::string object_id;
    std::string crop_path;  // 224x224 nearest-neighbor crop, raw rgb
};

struct ConditionTriplet {
    std::string policy;
    int object_frame = 0;
    int background_frame = 0;
    std::string condition_view;  // view used for appearance keyframes
    // per-view stream names
    std::vector<std::string> view_ids;
    std::vector<std::string> depth_streams;
    std::vector<std::string> normal_streams;
    std::vector<std::string> rgb_streams;
    BackgroundRecord background;
    std::vector<ObjectRecord> objects;
    std::vector<ObjectCropInfo> crops;
};

enum class KeyframePolicy { temporal, content };

/// Tabletop heuristic: first frame (fully populated) for objects, final
/// frame (post-manipulation) for the background.
std::pair<int, int> select_keyframes_temporal(int clip_len);

/// Content-aware: argmax visible object area for the object frame, argmin
/// for the background frame; ties break to the lowest index.
std::pair<int, int> select_keyframes_content(std::span<const std::int64_t> object_pixel_areas);

/// Replaces pixels under the union mask with `fill` (an externally
/// produced inpainting result, or the true empty render in tests); all
/// other bytes are untouched.
BackgroundRecord composite_background(const Raster& frame, const Mask& union_mask,
                                      const Raster& fill);

struct BuildOptions {
    KeyframePolicy policy = KeyframePolicy::temporal;
    std::optional<std::filesystem::path> masks_file;
    std::optional<std::filesystem::path> embeddings_file;
    std::optional<std::string> view_id;  // appearance view; default head-or-first
};

/// Assembles and validates the training triplet for a pack, writes
/// `triplet.json` (plus background/crop rasters under streams/) into the
/// pack directory and returns the validated record.
ConditionTriplet build_triplet(const std::filesystem::path& pack_dir, const BuildOptions& opts);

}  // namespace cond
}  // namespace geocond
