#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geocond/raster.hpp"

namespace geocond {

constexpr int kPackSchemaVersion = 1;

enum class StreamKind { rgb, depth_sensor_mm, depth_pred_rel, depth_metric_m, normal_cam };

std::string kind_name(StreamKind k);
StreamKind kind_from_name(const std::string& name);

/// Expected dtype/channel contract for a stream kind.
Dtype kind_dtype(StreamKind k);
int kind_channels(StreamKind k);

struct StreamDescriptor {
    std::string name;
    std::string view_id;
    StreamKind kind = StreamKind::rgb;
    Dtype dtype = Dtype::float32;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::string path;  // relative to the pack directory
};

/// Pack layout on disk: `manifest.json` plus one headerless raw file per
/// stream at `streams/<name>.raw`. Raw files are little-endian, frame 0
/// fully (planar channel-major, row-major per channel), then frame 1, ...
struct PackManifest {
    int schema_version = kPackSchemaVersion;
    double fps = 10.0;
    int frame_count = 1;
    std::vector<ViewDescriptor> views;
    std::vector<StreamDescriptor> streams;
    std::optional<std::string> normal_convention;

    const StreamDescriptor* find_stream(const std::string& name) const;
    const ViewDescriptor* find_view(const std::string& view_id) const;
    void validate() const;
};

using StreamData = std::map<std::string, std::vector<Raster>>;

void pack_write(const PackManifest& manifest, const StreamData& streams,
                const std::filesystem::path& dir);

std::pair<PackManifest, StreamData> pack_read(const std::filesystem::path& dir);

/// Manifest-only read (streams loaded on demand via read_stream).
PackManifest manifest_read(const std::filesystem::path& dir);
std::vector<Raster> read_stream(const std::filesystem::path& dir, const PackManifest& manifest,
                                const std::string& name);

/// Appends (or replaces) one stream in an existing pack, rewriting the
/// manifest. Used by pipeline stages that add derived streams.
void pack_add_stream(const std::filesystem::path& dir, const StreamDescriptor& desc,
                     const std::vector<Raster>& frames,
                     const std::optional<std::string>& normal_convention = std::nullopt);

// Conversions between pack rasters and in-memory frames.

/// uint16 millimeter sensor raster -> meters; 0 stays 0 (invalid).
DepthFrame depth_from_sensor_mm(const Raster& r);
/// float32 depth raster (relative or metric) -> double frame.
DepthFrame depth_from_f32(const Raster& r, DepthUnit unit);
Raster depth_to_f32(const DepthFrame& d);
Raster sensor_mm_from_depth(const DepthFrame& d);

NormalFrame normal_from_raster(const Raster& r);
Raster normal_to_raster(const NormalFrame& n);

}  // namespace geocond
