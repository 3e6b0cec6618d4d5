#include "geocond/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace geocond {
namespace synth {

using nlohmann::json;

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    if (!(n > 0)) throw InvalidInput("cannot normalize zero vector");
    return {v.x / n, v.y / n, v.z / n};
}

void CorruptionSpec::validate() const {
    if (hole_fraction < 0 || hole_fraction >= 1 || outlier_fraction < 0 || outlier_fraction >= 1)
        throw InvalidInput("corruption fractions must be in [0, 1)");
    if (hole_fraction + outlier_fraction >= 1)
        throw InvalidInput("hole + outlier fraction must be < 1");
    if (!(outlier_range > 0)) throw InvalidInput("outlier_range must be positive");
    if (noise_sigma_mm < 0) throw InvalidInput("noise_sigma_mm must be >= 0");
    if (affine_s == 0) throw InvalidInput("affine scale must be nonzero");
}

namespace {

struct Basis {
    Vec3 x, y, z;  // camera axes in world coordinates
};

Basis camera_basis(const CameraSpec& cam) {
    const Vec3 fwd = normalized(cam.look_at - cam.position);
    Vec3 up = cam.up;
    if (std::abs(dot(normalized(up), fwd)) > 0.999) up = {0, 1, 0};
    const Vec3 right = normalized(cross(fwd, up));
    const Vec3 down = cross(fwd, right);
    return {right, down, fwd};
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();  // camera-space depth
    Vec3 normal;                                         // world, toward the ray origin
    Vec3 albedo;
    int prim = -1;
};

// Ray through pixel (u, v) in world space; dir_cam = ((u-cx)/fx, (v-cy)/fy, 1)
// so the hit parameter t equals camera-space z directly.
Vec3 pixel_dir(const Basis& b, const Pinhole& k, int u, int v) {
    const double a = (u - k.cx) / k.fx;
    const double c = (v - k.cy) / k.fy;
    return b.x * a + b.y * c + b.z;
}

void hit_plane(const SceneSpec& s, const Vec3& o, const Vec3& d, Hit& best) {
    if (d.z == 0) return;
    const double t = (s.plane_z - o.z) / d.z;
    if (t <= 1e-9 || t >= best.t) return;
    const Vec3 p = o + d * t;
    if (std::abs(p.x) > s.plane_extent || std::abs(p.y) > s.plane_extent) return;
    best = {t, {0, 0, 1}, s.plane_albedo, 0};
}

void hit_sphere(const ObjectSpec& ob, const Vec3& c, int prim, const Vec3& o, const Vec3& d,
                Hit& best) {
    const Vec3 oc = o - c;
    const double A = dot(d, d);
    const double B = 2 * dot(oc, d);
    const double C = dot(oc, oc) - ob.radius * ob.radius;
    const double disc = B * B - 4 * A * C;
    if (disc < 0) return;
    const double sq = std::sqrt(disc);
    double t = (-B - sq) / (2 * A);
    if (t <= 1e-9) t = (-B + sq) / (2 * A);
    if (t <= 1e-9 || t >= best.t) return;
    const Vec3 p = o + d * t;
    best = {t, normalized(p - c), ob.albedo, prim};
}

void hit_box(const ObjectSpec& ob, const Vec3& c, int prim, const Vec3& o, const Vec3& d,
             Hit& best) {
    // slab test in the box frame (translate, rotate by -yaw about z)
    const double cs = std::cos(-ob.yaw), sn = std::sin(-ob.yaw);
    auto to_box = [&](const Vec3& v) -> Vec3 {
        return {cs * v.x - sn * v.y, sn * v.x + cs * v.y, v.z};
    };
    const Vec3 ol = to_box(o - c);
    const Vec3 dl = to_box(d);
    const double hs[3] = {ob.half_size.x, ob.half_size.y, ob.half_size.z};
    const double og[3] = {ol.x, ol.y, ol.z};
    const double dg[3] = {dl.x, dl.y, dl.z};

    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    int near_axis = -1;
    double near_sign = 1;
    for (int i = 0; i < 3; ++i) {
        if (dg[i] == 0) {
            if (std::abs(og[i]) > hs[i]) return;
            continue;
        }
        double t0 = (-hs[i] - og[i]) / dg[i];
        double t1 = (hs[i] - og[i]) / dg[i];
        double sign = -1;
        if (t0 > t1) {
            std::swap(t0, t1);
            sign = 1;
        }
        if (t0 > t_near) {
            t_near = t0;
            near_axis = i;
            near_sign = sign;
        }
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return;
    }
    const double t = t_near > 1e-9 ? t_near : t_far;
    if (t <= 1e-9 || t >= best.t || near_axis < 0) return;

    Vec3 nl{0, 0, 0};
    if (near_axis == 0) nl.x = near_sign;
    if (near_axis == 1) nl.y = near_sign;
    if (near_axis == 2) nl.z = near_sign;
    // back to world (rotate by +yaw)
    const double cw = std::cos(ob.yaw), sw = std::sin(ob.yaw);
    Vec3 nw{cw * nl.x - sw * nl.y, sw * nl.x + cw * nl.y, nl.z};
    best = {t, nw, ob.albedo, prim};
}

void validate_scene(const SceneSpec& s, int width, int height) {
    if (s.cameras.empty()) throw SceneError("scene has no cameras");
    if (!(s.plane_extent > 0)) throw SceneError("plane extent must be positive");
    for (const auto& ob : s.objects) {
        const double bottom = ob.shape == Shape::sphere ? ob.center.z - ob.radius
                                                        : ob.center.z - ob.half_size.z;
        if (bottom < s.plane_z - 1e-9) throw SceneError("object extends below the plane");
    }
    for (const auto& cam : s.cameras) {
        validate_view(cam.view, width, height);
        for (const auto& ob : s.objects) {
            const Vec3 rel = cam.position - ob.center;
            const bool inside = ob.shape == Shape::sphere
                                    ? norm(rel) < ob.radius
                                    : (std::abs(rel.x) < ob.half_size.x &&
                                       std::abs(rel.y) < ob.half_size.y &&
                                       std::abs(rel.z) < ob.half_size.z);
            if (inside) throw SceneError("camera is inside an object");
        }
        // the workspace center must project inside the image
        const Basis b = camera_basis(cam);
        const Vec3 center{0, 0, s.plane_z};
        const Vec3 rel = center - cam.position;
        const double zc = dot(rel, b.z);
        if (!(zc > 0)) throw SceneError("camera does not face the workspace");
        const double u = cam.view.intrinsics.fx * dot(rel, b.x) / zc + cam.view.intrinsics.cx;
        const double v = cam.view.intrinsics.fy * dot(rel, b.y) / zc + cam.view.intrinsics.cy;
        if (u < 0 || u >= width || v < 0 || v >= height)
            throw SceneError("plane center projects outside view '" + cam.view.view_id + "'");
    }
}

}  // namespace

RenderResult render(const SceneSpec& scene, int width, int height, int frame_count, double fps) {
    if (width <= 0 || height <= 0 || frame_count < 1 || !(fps > 0))
        throw InvalidInput("bad render parameters");
    validate_scene(scene, width, height);

    const Vec3 light = normalized(scene.light_dir);
    constexpr double kAmbient = 0.25;

    RenderResult out;
    out.fps = fps;
    for (const auto& cam : scene.cameras) {
        const Basis basis = camera_basis(cam);
        RenderedView rv;
        rv.view = cam.view;
        for (int fi = 0; fi < frame_count; ++fi) {
            const double t_sec = fi / fps;
            Raster rgb(height, width, 3, Dtype::uint8);
            DepthFrame depth(height, width, DepthUnit::meters);
            NormalFrame normals(height, width);
            std::vector<std::int16_t> prim(static_cast<std::size_t>(height) * width, -1);

            auto rgb_px = rgb.as<std::uint8_t>();
            const std::size_t plane_sz = static_cast<std::size_t>(height) * width;

            for (int v = 0; v < height; ++v) {
                for (int u = 0; u < width; ++u) {
                    const Vec3 dir = pixel_dir(basis, cam.view.intrinsics, u, v);
                    Hit best;
                    hit_plane(scene, cam.position, dir, best);
                    for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
                        const auto& ob = scene.objects[oi];
                        const Vec3 c = ob.center + ob.velocity * t_sec;
                        if (ob.shape == Shape::sphere)
                            hit_sphere(ob, c, static_cast<int>(oi) + 1, cam.position, dir, best);
                        else
                            hit_box(ob, c, static_cast<int>(oi) + 1, cam.position, dir, best);
                    }
                    const std::size_t pi = static_cast<std::size_t>(v) * width + u;
                    if (!std::isfinite(best.t)) continue;

                    depth.data[pi] = best.t;
                    prim[pi] = static_cast<std::int16_t>(best.prim);

                    // orient toward the camera, then express in camera axes
                    Vec3 nw = best.normal;
                    const Vec3 p = cam.position + dir * best.t;
                    if (dot(nw, p - cam.position) > 0) nw = nw * -1.0;
                    const Vec3 nc{dot(nw, basis.x), dot(nw, basis.y), dot(nw, basis.z)};
                    normals.set(v, u, static_cast<float>(nc.x), static_cast<float>(nc.y),
                                static_cast<float>(nc.z));

                    const double lambert = std::max(0.0, -dot(nw, light));
                    const double shade = kAmbient + (1.0 - kAmbient) * lambert;
                    const double rgbd[3] = {best.albedo.x * shade, best.albedo.y * shade,
                                            best.albedo.z * shade};
                    for (int ch = 0; ch < 3; ++ch) {
                        const double q = std::clamp(rgbd[ch], 0.0, 1.0) * 255.0;
                        rgb_px[static_cast<std::size_t>(ch) * plane_sz + pi] =
                            static_cast<std::uint8_t>(std::lround(q));
                    }
                }
            }
            rv.rgb.push_back(std::move(rgb));
            rv.depth.push_back(std::move(depth));
            rv.normals.push_back(std::move(normals));
            rv.prim_ids.push_back(std::move(prim));
        }
        out.views.push_back(std::move(rv));
    }
    return out;
}

Raster corrupt_sensor(const DepthFrame& gt_depth, const CorruptionSpec& spec, Rng& rng) {
    spec.validate();
    DepthFrame noisy(gt_depth.height, gt_depth.width, DepthUnit::meters);
    const double sigma_m = spec.noise_sigma_mm / 1000.0;

    for (std::size_t i = 0; i < gt_depth.data.size(); ++i) {
        const double gt = gt_depth.data[i];
        if (gt <= 0) {
            noisy.data[i] = 0;
            continue;
        }
        const double u = rng.uniform();
        if (u < spec.hole_fraction) {
            noisy.data[i] = 0;
        } else if (u < spec.hole_fraction + spec.outlier_fraction) {
            // keep resampling until the outlier clears the noise floor
            double v = rng.uniform(0.0, spec.outlier_range);
            const double band = 5.0 * std::max(sigma_m, 0.5e-3);
            for (int tries = 0; tries < 100 && std::abs(v - gt) <= band; ++tries)
                v = rng.uniform(0.0, spec.outlier_range);
            noisy.data[i] = v;
        } else {
            noisy.data[i] = std::max(0.0, gt + sigma_m * rng.normal());
        }
    }
    return sensor_mm_from_depth(noisy);
}

DepthFrame make_relative(const DepthFrame& gt_depth, double s_true, double b_true) {
    if (s_true == 0) throw InvalidInput("make_relative: scale must be nonzero");
    DepthFrame rel(gt_depth.height, gt_depth.width, DepthUnit::relative);
    for (std::size_t i = 0; i < gt_depth.data.size(); ++i)
        rel.data[i] = (gt_depth.data[i] - b_true) / s_true;
    return rel;
}

SceneSpec default_scene(int width, int height) {
    const double fx = 0.9 * width;
    const Pinhole k{fx, fx, (width - 1) / 2.0, (height - 1) / 2.0};

    SceneSpec s;
    s.plane_z = 0.0;
    s.plane_extent = 6.0;
    s.plane_albedo = {0.72, 0.70, 0.66};

    ObjectSpec box;
    box.shape = Shape::box;
    box.center = {0.06, 0.02, 0.030};
    box.half_size = {0.035, 0.025, 0.030};
    box.yaw = 0.35;
    box.albedo = {0.85, 0.30, 0.25};
    s.objects.push_back(box);

    ObjectSpec ball;
    ball.shape = Shape::sphere;
    ball.center = {-0.09, -0.04, 0.040};
    ball.radius = 0.040;
    ball.albedo = {0.25, 0.45, 0.85};
    ball.velocity = {0.012, 0.006, 0.0};
    s.objects.push_back(ball);

    ObjectSpec block;
    block.shape = Shape::box;
    block.center = {-0.02, 0.11, 0.020};
    block.half_size = {0.020, 0.020, 0.020};
    block.albedo = {0.35, 0.75, 0.35};
    s.objects.push_back(block);

    s.cameras = {
        {{"left_wrist", k, ViewRole::left_wrist}, {-0.34, -0.26, 0.38}, {0.02, 0.02, 0.0}},
        {{"head", k, ViewRole::head}, {0.0, -0.52, 0.62}, {0.0, 0.0, 0.0}},
        {{"right_wrist", k, ViewRole::right_wrist}, {0.35, -0.25, 0.40}, {-0.02, 0.02, 0.0}},
    };
    s.light_dir = {-0.3, 0.25, -1.0};
    return s;
}

namespace {

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

}  // namespace

SceneSpec scene_from_json_text(const std::string& text, int width, int height) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("invalid scene JSON: " + std::string(e.what()));
    }
    SceneSpec s = default_scene(width, height);
    if (j.contains("plane")) {
        const auto& p = j["plane"];
        if (p.contains("z")) s.plane_z = p["z"].get<double>();
        if (p.contains("extent")) s.plane_extent = p["extent"].get<double>();
        if (p.contains("albedo")) s.plane_albedo = vec3_from_json(p["albedo"]);
    }
    if (j.contains("light_dir")) s.light_dir = vec3_from_json(j["light_dir"]);
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("objects")) {
        s.objects.clear();
        for (const auto& o : j["objects"]) {
            ObjectSpec ob;
            const std::string shape = o.at("shape").get<std::string>();
            if (shape == "sphere") {
                ob.shape = Shape::sphere;
                ob.radius = o.at("radius").get<double>();
            } else if (shape == "box") {
                ob.shape = Shape::box;
                ob.half_size = vec3_from_json(o.at("half_size"));
                if (o.contains("yaw")) ob.yaw = o["yaw"].get<double>();
            } else {
                throw FormatError("unknown object shape: " + shape);
            }
            ob.center = vec3_from_json(o.at("center"));
            if (o.contains("albedo")) ob.albedo = vec3_from_json(o["albedo"]);
            if (o.contains("velocity")) ob.velocity = vec3_from_json(o["velocity"]);
            s.objects.push_back(ob);
        }
    }
    if (j.contains("cameras")) {
        s.cameras.clear();
        for (const auto& c : j["cameras"]) {
            CameraSpec cam;
            cam.view.view_id = c.at("view_id").get<std::string>();
            cam.view.role = role_from_name(c.value("role", "other"));
            if (c.contains("intrinsics")) {
                const auto& k = c["intrinsics"];
                cam.view.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                                       k.at("cx").get<double>(), k.at("cy").get<double>()};
            } else {
                const double fx = 0.9 * width;
                cam.view.intrinsics = {fx, fx, (width - 1) / 2.0, (height - 1) / 2.0};
            }
            cam.position = vec3_from_json(c.at("position"));
            cam.look_at = vec3_from_json(c.at("look_at"));
            if (c.contains("up")) cam.up = vec3_from_json(c["up"]);
            s.cameras.push_back(cam);
        }
    }
    return s;
}

std::string scene_to_json_text(const SceneSpec& s) {
    json j;
    j["plane"] = {{"z", s.plane_z}, {"extent", s.plane_extent},
                  {"albedo", vec3_to_json(s.plane_albedo)}};
    j["light_dir"] = vec3_to_json(s.light_dir);
    j["seed"] = s.seed;
    j["objects"] = json::array();
    for (const auto& ob : s.objects) {
        json o;
        o["shape"] = ob.shape == Shape::sphere ? "sphere" : "box";
        o["center"] = vec3_to_json(ob.center);
        if (ob.shape == Shape::sphere) {
            o["radius"] = ob.radius;
        } else {
            o["half_size"] = vec3_to_json(ob.half_size);
            o["yaw"] = ob.yaw;
        }
        o["albedo"] = vec3_to_json(ob.albedo);
        o["velocity"] = vec3_to_json(ob.velocity);
        j["objects"].push_back(o);
    }
    j["cameras"] = json::array();
    for (const auto& c : s.cameras) {
        j["cameras"].push_back({{"view_id", c.view.view_id},
                                {"role", role_name(c.view.role)},
                                {"intrinsics",
                                 {{"fx", c.view.intrinsics.fx},
                                  {"fy", c.view.intrinsics.fy},
                                  {"cx", c.view.intrinsics.cx},
                                  {"cy", c.view.intrinsics.cy}}},
                                {"position", vec3_to_json(c.position)},
                                {"look_at", vec3_to_json(c.look_at)},
                                {"up", vec3_to_json(c.up)}});
    }
    return j.dump(2) + "\n";
}

CorruptionSpec corruption_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("invalid corruption JSON: " + std::string(e.what()));
    }
    CorruptionSpec c;
    if (j.contains("hole_fraction")) c.hole_fraction = j["hole_fraction"].get<double>();
    if (j.contains("outlier_fraction")) c.outlier_fraction = j["outlier_fraction"].get<double>();
    if (j.contains("outlier_range")) c.outlier_range = j["outlier_range"].get<double>();
    if (j.contains("noise_sigma_mm")) c.noise_sigma_mm = j["noise_sigma_mm"].get<double>();
    if (j.contains("affine_true")) {
        const auto& a = j["affine_true"];
        if (!a.is_array() || a.size() != 2) throw FormatError("affine_true must be [s, b]");
        c.affine_s = a[0].get<double>();
        c.affine_b = a[1].get<double>();
    }
    c.validate();
    return c;
}

void write_scene_pack(const SceneSpec& scene, int width, int height, int frame_count, double fps,
                      const std::optional<CorruptionSpec>& corrupt, std::uint64_t seed,
                      const std::filesystem::path& out_dir) {
    const RenderResult rr = render(scene, width, height, frame_count, fps);

    PackManifest m;
    m.fps = fps;
    m.frame_count = frame_count;
    m.normal_convention = "toward_camera_neg_z";
    StreamData streams;

    Rng root(seed);
    for (std::size_t vi = 0; vi < rr.views.size(); ++vi) {
        const auto& rv = rr.views[vi];
        m.views.push_back(rv.view);
        const std::string id = rv.view.view_id;

        auto add = [&](const std::string& suffix, StreamKind kind, std::vector<Raster> frames) {
            StreamDescriptor d;
            d.name = id + "_" + suffix;
            d.view_id = id;
            d.kind = kind;
            d.dtype = frames.front().dtype();
            d.height = frames.front().height();
            d.width = frames.front().width();
            d.channels = frames.front().channels();
            d.path = "streams/" + d.name + ".raw";
            m.streams.push_back(d);
            streams[d.name] = std::move(frames);
        };

        add("rgb", StreamKind::rgb, rv.rgb);
        std::vector<Raster> depth_gt;
        for (const auto& d : rv.depth) depth_gt.push_back(depth_to_f32(d));
        add("depth_gt", StreamKind::depth_metric_m, std::move(depth_gt));
        std::vector<Raster> normal_gt;
        for (const auto& n : rv.normals) normal_gt.push_back(normal_to_raster(n));
        add("normal_gt", StreamKind::normal_cam, std::move(normal_gt));

        if (corrupt) {
            std::vector<Raster> sensor, rel;
            for (std::size_t fi = 0; fi < rv.depth.size(); ++fi) {
                Rng frame_rng = root.child(vi * 100000 + fi);
                sensor.push_back(corrupt_sensor(rv.depth[fi], *corrupt, frame_rng));
                rel.push_back(
                    depth_to_f32(make_relative(rv.depth[fi], corrupt->affine_s, corrupt->affine_b)));
            }
            add("depth_sensor", StreamKind::depth_sensor_mm, std::move(sensor));
            add("depth_pred", StreamKind::depth_pred_rel, std::move(rel));
        }
    }
    std::sort(m.streams.begin(), m.streams.end(),
              [](const StreamDescriptor& a, const StreamDescriptor& b) { return a.name < b.name; });
    pack_write(m, streams, out_dir);
}

}  // namespace synth
}  // namespace geocond
