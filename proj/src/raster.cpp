#include "geocond/raster.hpp"

#include <cmath>

namespace geocond {

std::size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::float32: return 4;
        case Dtype::uint16: return 2;
        case Dtype::uint8: return 1;
    }
    throw InvalidInput("unknown dtype");
}

std::string dtype_name(Dtype d) {
    switch (d) {
        case Dtype::float32: return "float32";
        case Dtype::uint16: return "uint16";
        case Dtype::uint8: return "uint8";
    }
    throw InvalidInput("unknown dtype");
}

Dtype dtype_from_name(const std::string& name) {
    if (name == "float32") return Dtype::float32;
    if (name == "uint16") return Dtype::uint16;
    if (name == "uint8") return Dtype::uint8;
    throw FormatError("unknown dtype name: " + name);
}

Raster::Raster(int height, int width, int channels, Dtype dtype)
    : height_(height), width_(width), channels_(channels), dtype_(dtype) {
    if (height <= 0 || width <= 0 || channels <= 0)
        throw InvalidInput("raster dimensions must be positive");
    data_.resize(static_cast<std::size_t>(height) * width * channels * dtype_size(dtype));
}

void Raster::check_finite() const {
    if (dtype_ != Dtype::float32) return;
    for (float v : as<float>()) {
        if (!std::isfinite(v)) throw InvalidInput("float32 raster contains NaN/Inf");
    }
}

Mask::Mask(int height, int width, std::uint8_t fill) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw InvalidInput("mask dimensions must be positive");
    if (fill > 1) throw InvalidInput("mask values must be 0 or 1");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
}

void Mask::set(int y, int x, std::uint8_t v) {
    if (v > 1) throw InvalidInput("mask values must be 0 or 1");
    data_[static_cast<std::size_t>(y) * width_ + x] = v;
}

std::int64_t Mask::count() const {
    std::int64_t n = 0;
    for (auto v : data_) n += v;
    return n;
}

std::string role_name(ViewRole r) {
    switch (r) {
        case ViewRole::left_wrist: return "left_wrist";
        case ViewRole::head: return "head";
        case ViewRole::right_wrist: return "right_wrist";
        case ViewRole::other: return "other";
    }
    throw InvalidInput("unknown role");
}

ViewRole role_from_name(const std::string& name) {
    if (name == "left_wrist") return ViewRole::left_wrist;
    if (name == "head") return ViewRole::head;
    if (name == "right_wrist") return ViewRole::right_wrist;
    if (name == "other") return ViewRole::other;
    throw FormatError("unknown view role: " + name);
}

void validate_view(const ViewDescriptor& v, int width, int height) {
    const auto& k = v.intrinsics;
    if (!(k.fx > 0) || !(k.fy > 0))
        throw FormatError("view '" + v.view_id + "': focal lengths must be positive");
    if (k.cx < 0 || k.cx >= width || k.cy < 0 || k.cy >= height)
        throw FormatError("view '" + v.view_id + "': principal point outside image");
}

}  // namespace geocond
