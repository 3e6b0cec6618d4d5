#pragma once

#include <span>
#include <string>
#include <vector>

#include "geocond/raster.hpp"
#include "geocond/rng.hpp"

namespace geocond {
namespace layout {

/// Synchronized per-view frame sequences. All views share height, channel
/// count, dtype and frame count; widths may differ. When the three robot
/// roles are all present the order must be (left_wrist, head, right_wrist).
struct MultiViewClip {
    struct View {
        std::string view_id;
        ViewRole role = ViewRole::other;
        std::vector<Raster> frames;
    };
    std::vector<View> views;

    void validate() const;
};

struct ConcatResult {
    std::vector<Raster> frames;
    std::vector<int> offsets;  // per-view starting column
};

/// Width-wise concatenation of the views, in declared order.
ConcatResult concat_views(const MultiViewClip& clip);

/// Exact inverse of concat_views given the recorded offsets. Restored
/// views carry placeholder ids; pixel data is bit-exact.
MultiViewClip split_views(std::span<const Raster> frames, std::span<const int> offsets);

enum class ChannelTag { noise, rgb_latent, depth_latent, normal_latent, background_latent };

std::string tag_name(ChannelTag t);
ChannelTag tag_from_name(const std::string& s);

struct TagBlock {
    ChannelTag tag;
    int channels;
};

/// frames x channels x latent_height x latent_width float32, with channel
/// blocks labelled by provenance. Blocks partition the channel axis.
struct LatentGrid {
    int frames = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;
    std::vector<TagBlock> tags;

    std::size_t frame_stride() const {
        return static_cast<std::size_t>(channels) * height * width;
    }
    void validate() const;
};

/// Lossless space-to-channel rearrangement standing in for a learned
/// encoder's shape contract: spatial dims / patch_size, channels *
/// patch_size^2. decode(encode(x)) == x bit-exactly.
struct PatchEncoder {
    int patch_size = 8;
};

LatentGrid encode_patches(std::span<const Raster> frames, const PatchEncoder& enc,
                          ChannelTag tag);
std::vector<Raster> decode_patches(const LatentGrid& grid, const PatchEncoder& enc,
                                   Dtype out_dtype);

/// Channel concatenation in fixed order [noise, depth, normal, background].
/// The background grid holds a single reference frame and is broadcast
/// across frames.
LatentGrid assemble_condition_latent(const LatentGrid& noise, const LatentGrid& depth_lat,
                                     const LatentGrid& normal_lat, const LatentGrid& bg_lat);

/// Extracts the channel block carrying `tag`; throws InvalidInput if the
/// grid has no such block.
LatentGrid get_block(const LatentGrid& grid, ChannelTag tag);

/// Standard-normal latent block, e.g. the sampler state.
LatentGrid make_noise_grid(int frames, int channels, int height, int width, Rng& rng);

}  // namespace layout
}  // namespace geocond
