#include "geocond/geometry.hpp"

#include <array>
#include <cmath>

namespace geocond {

namespace {

struct V3 {
    double x, y, z;
};

V3 cross(const V3& a, const V3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double dot(const V3& a, const V3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

}  // namespace

NormalFrame normals_from_depth(const DepthFrame& depth, const Pinhole& intr, const Mask& mask) {
    if (depth.unit != DepthUnit::meters)
        throw InvalidInput("normals_from_depth expects metric depth");
    if (mask.height() != depth.height || mask.width() != depth.width)
        throw InvalidInput("mask dimensions differ from depth");
    if (!(intr.fx > 0) || !(intr.fy > 0)) throw InvalidInput("invalid intrinsics");
    const int h = depth.height, w = depth.width;

    auto valid = [&](int y, int x) { return mask.at(y, x) != 0 && depth.at(y, x) > 0.0; };
    auto point = [&](int y, int x) -> V3 {
        const double z = depth.at(y, x);
        return {z * (x - intr.cx) / intr.fx, z * (y - intr.cy) / intr.fy, z};
    };

    NormalFrame out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // central differences, one-sided at borders
            const int x0 = x > 0 ? x - 1 : x;
            const int x1 = x < w - 1 ? x + 1 : x;
            const int y0 = y > 0 ? y - 1 : y;
            const int y1 = y < h - 1 ? y + 1 : y;
            if (x0 == x1 || y0 == y1) continue;  // 1-wide axis, no tangent
            if (!valid(y, x) || !valid(y, x0) || !valid(y, x1) || !valid(y0, x) || !valid(y1, x))
                continue;

            const V3 du = {(point(y, x1).x - point(y, x0).x) / (x1 - x0),
                           (point(y, x1).y - point(y, x0).y) / (x1 - x0),
                           (point(y, x1).z - point(y, x0).z) / (x1 - x0)};
            const V3 dv = {(point(y1, x).x - point(y0, x).x) / (y1 - y0),
                           (point(y1, x).y - point(y0, x).y) / (y1 - y0),
                           (point(y1, x).z - point(y0, x).z) / (y1 - y0)};
            V3 n = cross(du, dv);
            const double len = std::sqrt(dot(n, n));
            if (!(len > 0) || !std::isfinite(len)) continue;
            n = {n.x / len, n.y / len, n.z / len};
            if (dot(n, point(y, x)) > 0) n = {-n.x, -n.y, -n.z};  // toward camera
            out.set(y, x, static_cast<float>(n.x), static_cast<float>(n.y),
                    static_cast<float>(n.z));
        }
    }
    return out;
}

NormalValidationReport validate_normals(const NormalFrame& frame) {
    NormalValidationReport rep;
    rep.total_pixels = static_cast<std::int64_t>(frame.plane());
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            if (frame.is_invalid(y, x)) {
                ++rep.invalid_pixels;
                continue;
            }
            const double nx = frame.nx(y, x), ny = frame.ny(y, x), nz = frame.nz(y, x);
            const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
            if (std::abs(norm - 1.0) > 1e-5) ++rep.unit_norm_violations;
        }
    }
    return rep;
}

}  // namespace geocond
