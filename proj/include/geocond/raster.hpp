#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "geocond/errors.hpp"

namespace geocond {

enum class Dtype { float32, uint16, uint8 };

std::size_t dtype_size(Dtype d);
std::string dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);

/// Planar raster: all of channel 0 row-major, then channel 1, ...
/// float32 buffers must stay free of NaN/Inf; invalidity lives in Masks.
class Raster {
   public:
    Raster() = default;
    Raster(int height, int width, int channels, Dtype dtype);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    Dtype dtype() const { return dtype_; }

    std::size_t byte_size() const { return data_.size(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

    const std::uint8_t* bytes() const { return data_.data(); }
    std::uint8_t* bytes() { return data_.data(); }

    template <typename T>
    std::span<T> as() {
        return {reinterpret_cast<T*>(data_.data()), data_.size() / sizeof(T)};
    }
    template <typename T>
    std::span<const T> as() const {
        return {reinterpret_cast<const T*>(data_.data()), data_.size() / sizeof(T)};
    }

    /// Throws InvalidInput on NaN/Inf in float32 data.
    void check_finite() const;

    bool operator==(const Raster& o) const = default;

   private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    Dtype dtype_ = Dtype::float32;
    std::vector<std::uint8_t> data_;
};

/// Binary validity mask, one byte per pixel, values strictly {0,1}.
class Mask {
   public:
    Mask() = default;
    Mask(int height, int width, std::uint8_t fill = 0);

    int height() const { return height_; }
    int width() const { return width_; }

    std::uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int y, int x, std::uint8_t v);

    std::span<const std::uint8_t> data() const { return data_; }
    std::span<std::uint8_t> data() { return {data_.data(), data_.size()}; }

    std::int64_t count() const;

    bool operator==(const Mask& o) const = default;

   private:
    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

enum class DepthUnit { relative, meters };

/// Single-view per-frame depth. Kept in double in memory; packs store
/// float32 (or uint16 mm for sensor streams) on disk.
struct DepthFrame {
    int height = 0;
    int width = 0;
    DepthUnit unit = DepthUnit::meters;
    std::vector<double> data;

    DepthFrame() = default;
    DepthFrame(int h, int w, DepthUnit u, double fill = 0.0)
        : height(h), width(w), unit(u), data(static_cast<std::size_t>(h) * w, fill) {}

    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Camera-space unit normals (nx, ny, nz), planar float32, invalid pixels
/// exactly (0,0,0). Convention: toward the camera, nz < 0 for surfaces
/// facing it (+z into the scene, right-handed).
struct NormalFrame {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // 3 planes: nx, ny, nz

    NormalFrame() = default;
    NormalFrame(int h, int w) : height(h), width(w), data(3 * static_cast<std::size_t>(h) * w, 0.f) {}

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    float nx(int y, int x) const { return data[idx(y, x)]; }
    float ny(int y, int x) const { return data[plane() + idx(y, x)]; }
    float nz(int y, int x) const { return data[2 * plane() + idx(y, x)]; }
    void set(int y, int x, float a, float b, float c) {
        data[idx(y, x)] = a;
        data[plane() + idx(y, x)] = b;
        data[2 * plane() + idx(y, x)] = c;
    }
    bool is_invalid(int y, int x) const {
        return nx(y, x) == 0.f && ny(y, x) == 0.f && nz(y, x) == 0.f;
    }

   private:
    std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
};

struct Pinhole {
    double fx = 0, fy = 0, cx = 0, cy = 0;
};

enum class ViewRole { left_wrist, head, right_wrist, other };

std::string role_name(ViewRole r);
ViewRole role_from_name(const std::string& name);

struct ViewDescriptor {
    std::string view_id;
    Pinhole intrinsics;
    ViewRole role = ViewRole::other;
};

/// fx,fy > 0 and principal point inside the image.
void validate_view(const ViewDescriptor& v, int width, int height);

}  // namespace geocond
