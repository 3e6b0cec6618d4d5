#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geocond/pack.hpp"
#include "geocond/raster.hpp"
#include "geocond/rng.hpp"

namespace geocond {
namespace synth {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);
Vec3 normalized(const Vec3& v);

enum class Shape { box, sphere };

struct ObjectSpec {
    Shape shape = Shape::sphere;
    Vec3 center;          // world, meters
    Vec3 half_size;       // box half extents
    double radius = 0.1;  // sphere
    double yaw = 0.0;     // box rotation about world z, radians
    Vec3 albedo = {0.7, 0.7, 0.7};
    Vec3 velocity;        // m/s, linear motion across the clip
};

/// Camera pose as position + look-at in the world frame (z up). The
/// camera frame is the usual CV convention: x right, y down, z forward.
struct CameraSpec {
    ViewDescriptor view;
    Vec3 position;
    Vec3 look_at;
    Vec3 up = {0, 0, 1};
};

/// Tabletop test scene: a finite horizontal plane plus analytic solids,
/// three pinhole cameras, one directional light.
struct SceneSpec {
    double plane_z = 0.0;
    double plane_extent = 5.0;  // half-size, meters
    Vec3 plane_albedo = {0.75, 0.73, 0.70};
    std::vector<ObjectSpec> objects;
    std::vector<CameraSpec> cameras;
    Vec3 light_dir = {-0.3, 0.25, -1.0};
    std::uint64_t seed = 0;
};

struct CorruptionSpec {
    double hole_fraction = 0.2;
    double outlier_fraction = 0.1;
    double outlier_range = 5.0;   // meters, outliers uniform in (0, range)
    double noise_sigma_mm = 2.0;
    double affine_s = 1.8;        // ground-truth (s, b) for the relative stream
    double affine_b = -0.2;

    void validate() const;
};

/// One rendered camera: per-frame rasters plus the per-pixel primitive id
/// (-1 miss, 0 plane, 1.. objects) used by tests to reason about surface
/// interiors. Prim ids never leave memory.
struct RenderedView {
    ViewDescriptor view;
    std::vector<Raster> rgb;             // uint8 x3
    std::vector<DepthFrame> depth;       // meters, 0 where the ray misses
    std::vector<NormalFrame> normals;    // camera-space
    std::vector<std::vector<std::int16_t>> prim_ids;
};

struct RenderResult {
    std::vector<RenderedView> views;
    double fps = 10.0;
};

/// Analytic ray-cast render. Depth is camera-space z; normals are exact
/// surface normals oriented toward the camera; RGB is Lambertian shading
/// quantized to uint8. Deterministic.
RenderResult render(const SceneSpec& scene, int width, int height, int frame_count, double fps);

/// Holes to 0, uniform outliers, Gaussian noise on the rest; uint16 mm.
/// Outlier values are resampled until they clear 5x the noise sigma around
/// ground truth, so corrupted pixels are separable by construction.
Raster corrupt_sensor(const DepthFrame& gt_depth, const CorruptionSpec& spec, Rng& rng);

/// rel = (gt - b_true) / s_true, computed in double; inverting with
/// (s_true, b_true) reproduces gt at float32 precision.
DepthFrame make_relative(const DepthFrame& gt_depth, double s_true, double b_true);

/// Three-camera tabletop scene with a couple of solids, one in motion.
SceneSpec default_scene(int width, int height);

SceneSpec scene_from_json_text(const std::string& text, int width, int height);
std::string scene_to_json_text(const SceneSpec& scene);
CorruptionSpec corruption_from_json_text(const std::string& text);

/// Renders and writes a full pack: rgb / depth_gt / normal_gt per view,
/// plus depth_sensor / depth_pred streams when `corrupt` is given.
void write_scene_pack(const SceneSpec& scene, int width, int height, int frame_count, double fps,
                      const std::optional<CorruptionSpec>& corrupt, std::uint64_t seed,
                      const std::filesystem::path& out_dir);

}  // namespace synth
}  // namespace geocond
