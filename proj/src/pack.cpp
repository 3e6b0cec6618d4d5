#include "geocond/pack.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace geocond {

using nlohmann::json;

std::string kind_name(StreamKind k) {
    switch (k) {
        case StreamKind::rgb: return "rgb";
        case StreamKind::depth_sensor_mm: return "depth_sensor_mm";
        case StreamKind::depth_pred_rel: return "depth_pred_rel";
        case StreamKind::depth_metric_m: return "depth_metric_m";
        case StreamKind::normal_cam: return "normal_cam";
    }
    throw InvalidInput("unknown stream kind");
}

StreamKind kind_from_name(const std::string& name) {
    if (name == "rgb") return StreamKind::rgb;
    if (name == "depth_sensor_mm") return StreamKind::depth_sensor_mm;
    if (name == "depth_pred_rel") return StreamKind::depth_pred_rel;
    if (name == "depth_metric_m") return StreamKind::depth_metric_m;
    if (name == "normal_cam") return StreamKind::normal_cam;
    throw FormatError("unknown stream kind: " + name);
}

Dtype kind_dtype(StreamKind k) {
    switch (k) {
        case StreamKind::rgb: return Dtype::uint8;
        case StreamKind::depth_sensor_mm: return Dtype::uint16;
        default: return Dtype::float32;
    }
}

int kind_channels(StreamKind k) {
    switch (k) {
        case StreamKind::rgb: return 3;
        case StreamKind::normal_cam: return 3;
        default: return 1;
    }
}

const StreamDescriptor* PackManifest::find_stream(const std::string& name) const {
    for (const auto& s : streams)
        if (s.name == name) return &s;
    return nullptr;
}

const ViewDescriptor* PackManifest::find_view(const std::string& view_id) const {
    for (const auto& v : views)
        if (v.view_id == view_id) return &v;
    return nullptr;
}

void PackManifest::validate() const {
    if (frame_count < 1) throw FormatError("frame_count must be >= 1");
    if (!(fps > 0)) throw FormatError("fps must be positive");
    std::set<std::string> ids;
    for (const auto& v : views) {
        if (!ids.insert(v.view_id).second)
            throw FormatError("duplicate view_id: " + v.view_id);
    }
    std::set<std::string> names;
    for (const auto& s : streams) {
        if (!names.insert(s.name).second)
            throw FormatError("duplicate stream name: " + s.name);
        if (!find_view(s.view_id))
            throw FormatError("stream '" + s.name + "' references unknown view '" + s.view_id + "'");
        if (s.height <= 0 || s.width <= 0 || s.channels <= 0)
            throw FormatError("stream '" + s.name + "' has non-positive shape");
        if (s.dtype != kind_dtype(s.kind) || s.channels != kind_channels(s.kind))
            throw FormatError("stream '" + s.name + "' dtype/channels do not match kind " +
                              kind_name(s.kind));
    }
    for (const auto& v : views) {
        for (const auto& s : streams)
            if (s.view_id == v.view_id) validate_view(v, s.width, s.height);
    }
}

namespace {

json view_to_json(const ViewDescriptor& v) {
    return json{{"view_id", v.view_id},
                {"intrinsics",
                 {{"fx", v.intrinsics.fx},
                  {"fy", v.intrinsics.fy},
                  {"cx", v.intrinsics.cx},
                  {"cy", v.intrinsics.cy}}},
                {"role", role_name(v.role)}};
}

ViewDescriptor view_from_json(const json& j) {
    ViewDescriptor v;
    v.view_id = j.at("view_id").get<std::string>();
    const auto& k = j.at("intrinsics");
    v.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                    k.at("cy").get<double>()};
    v.role = role_from_name(j.at("role").get<std::string>());
    return v;
}

json stream_to_json(const StreamDescriptor& s) {
    return json{{"name", s.name},
                {"view_id", s.view_id},
                {"kind", kind_name(s.kind)},
                {"dtype", dtype_name(s.dtype)},
                {"shape", {s.height, s.width, s.channels}},
                {"path", s.path}};
}

StreamDescriptor stream_from_json(const json& j) {
    StreamDescriptor s;
    s.name = j.at("name").get<std::string>();
    s.view_id = j.at("view_id").get<std::string>();
    s.kind = kind_from_name(j.at("kind").get<std::string>());
    s.dtype = dtype_from_name(j.at("dtype").get<std::string>());
    const auto& sh = j.at("shape");
    if (!sh.is_array() || sh.size() != 3) throw FormatError("stream shape must be [h, w, c]");
    s.height = sh[0].get<int>();
    s.width = sh[1].get<int>();
    s.channels = sh[2].get<int>();
    s.path = j.at("path").get<std::string>();
    return s;
}

json manifest_to_json(const PackManifest& m) {
    json j{{"schema_version", m.schema_version},
           {"fps", m.fps},
           {"frame_count", m.frame_count},
           {"views", json::array()},
           {"streams", json::array()}};
    for (const auto& v : m.views) j["views"].push_back(view_to_json(v));
    for (const auto& s : m.streams) j["streams"].push_back(stream_to_json(s));
    if (m.normal_convention) j["normal_convention"] = *m.normal_convention;
    return j;
}

PackManifest manifest_from_json(const json& j) {
    PackManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kPackSchemaVersion)
        throw VersionError("unsupported pack schema_version " + std::to_string(m.schema_version));
    m.fps = j.at("fps").get<double>();
    m.frame_count = j.at("frame_count").get<int>();
    for (const auto& v : j.at("views")) m.views.push_back(view_from_json(v));
    for (const auto& s : j.at("streams")) m.streams.push_back(stream_from_json(s));
    if (j.contains("normal_convention"))
        m.normal_convention = j.at("normal_convention").get<std::string>();
    return m;
}

// On-disk bytes are little-endian regardless of host.
void to_disk_order(std::vector<std::uint8_t>& buf, std::size_t elem) {
    if constexpr (std::endian::native == std::endian::little) {
        (void)buf;
        (void)elem;
    } else {
        for (std::size_t i = 0; i + elem <= buf.size(); i += elem)
            std::reverse(buf.begin() + i, buf.begin() + i + elem);
    }
}

void check_stream_matches(const StreamDescriptor& d, const std::vector<Raster>& frames,
                          int frame_count) {
    if (static_cast<int>(frames.size()) != frame_count)
        throw FormatError("stream '" + d.name + "': manifest declares " +
                          std::to_string(frame_count) + " frames, " +
                          std::to_string(frames.size()) + " supplied");
    for (const auto& f : frames) {
        if (f.height() != d.height || f.width() != d.width || f.channels() != d.channels ||
            f.dtype() != d.dtype)
            throw FormatError("stream '" + d.name + "': raster shape/dtype mismatch");
        f.check_finite();
    }
}

void write_file(const std::filesystem::path& p, const void* data, std::size_t size) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + p.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("write failed: " + p.string());
}

}  // namespace

void pack_write(const PackManifest& manifest, const StreamData& streams,
                const std::filesystem::path& dir) {
    manifest.validate();
    for (const auto& d : manifest.streams) {
        auto it = streams.find(d.name);
        if (it == streams.end())
            throw FormatError("declared stream '" + d.name + "' not supplied");
        check_stream_matches(d, it->second, manifest.frame_count);
    }

    std::error_code ec;
    std::filesystem::create_directories(dir / "streams", ec);
    if (ec) throw IoError("cannot create pack directory: " + dir.string());

    for (const auto& d : manifest.streams) {
        const auto& frames = streams.at(d.name);
        std::vector<std::uint8_t> buf;
        buf.reserve(frames.size() * frames.front().byte_size());
        for (const auto& f : frames) buf.insert(buf.end(), f.bytes(), f.bytes() + f.byte_size());
        to_disk_order(buf, dtype_size(d.dtype));
        write_file(dir / d.path, buf.data(), buf.size());
    }

    const std::string text = manifest_to_json(manifest).dump(2) + "\n";
    write_file(dir / "manifest.json", text.data(), text.size());
}

PackManifest manifest_read(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open manifest: " + (dir / "manifest.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("invalid manifest JSON: " + std::string(e.what()));
    }
    PackManifest m = manifest_from_json(j);
    m.validate();
    return m;
}

std::vector<Raster> read_stream(const std::filesystem::path& dir, const PackManifest& manifest,
                                const std::string& name) {
    const StreamDescriptor* d = manifest.find_stream(name);
    if (!d) throw FormatError("no such stream: " + name);

    const auto path = dir / d->path;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("missing stream file: " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

    const std::size_t frame_bytes = static_cast<std::size_t>(d->height) * d->width * d->channels *
                                    dtype_size(d->dtype);
    const std::size_t expect = frame_bytes * manifest.frame_count;
    if (buf.size() != expect)
        throw FormatError("stream '" + name + "': file has " + std::to_string(buf.size()) +
                          " bytes, manifest expects " + std::to_string(expect));
    to_disk_order(buf, dtype_size(d->dtype));

    std::vector<Raster> frames;
    frames.reserve(manifest.frame_count);
    for (int i = 0; i < manifest.frame_count; ++i) {
        Raster r(d->height, d->width, d->channels, d->dtype);
        std::memcpy(r.bytes(), buf.data() + frame_bytes * i, frame_bytes);
        r.check_finite();
        frames.push_back(std::move(r));
    }
    return frames;
}

std::pair<PackManifest, StreamData> pack_read(const std::filesystem::path& dir) {
    PackManifest m = manifest_read(dir);
    StreamData streams;
    for (const auto& d : m.streams) streams[d.name] = read_stream(dir, m, d.name);
    return {std::move(m), std::move(streams)};
}

void pack_add_stream(const std::filesystem::path& dir, const StreamDescriptor& desc,
                     const std::vector<Raster>& frames,
                     const std::optional<std::string>& normal_convention) {
    PackManifest m = manifest_read(dir);
    check_stream_matches(desc, frames, m.frame_count);
    if (!m.find_view(desc.view_id)) throw FormatError("unknown view: " + desc.view_id);

    std::erase_if(m.streams, [&](const StreamDescriptor& s) { return s.name == desc.name; });
    m.streams.push_back(desc);
    std::sort(m.streams.begin(), m.streams.end(),
              [](const StreamDescriptor& a, const StreamDescriptor& b) { return a.name < b.name; });
    if (normal_convention) m.normal_convention = normal_convention;
    m.validate();

    std::vector<std::uint8_t> buf;
    buf.reserve(frames.size() * frames.front().byte_size());
    for (const auto& f : frames) buf.insert(buf.end(), f.bytes(), f.bytes() + f.byte_size());
    to_disk_order(buf, dtype_size(desc.dtype));
    write_file(dir / desc.path, buf.data(), buf.size());

    const std::string text = manifest_to_json(m).dump(2) + "\n";
    write_file(dir / "manifest.json", text.data(), text.size());
}

DepthFrame depth_from_sensor_mm(const Raster& r) {
    if (r.dtype() != Dtype::uint16 || r.channels() != 1)
        throw InvalidInput("sensor depth raster must be 1-channel uint16");
    DepthFrame d(r.height(), r.width(), DepthUnit::meters);
    auto src = r.as<const std::uint16_t>();
    for (std::size_t i = 0; i < src.size(); ++i) d.data[i] = src[i] / 1000.0;
    return d;
}

DepthFrame depth_from_f32(const Raster& r, DepthUnit unit) {
    if (r.dtype() != Dtype::float32 || r.channels() != 1)
        throw InvalidInput("depth raster must be 1-channel float32");
    DepthFrame d(r.height(), r.width(), unit);
    auto src = r.as<const float>();
    for (std::size_t i = 0; i < src.size(); ++i) d.data[i] = src[i];
    return d;
}

Raster depth_to_f32(const DepthFrame& d) {
    Raster r(d.height, d.width, 1, Dtype::float32);
    auto dst = r.as<float>();
    for (std::size_t i = 0; i < d.data.size(); ++i) dst[i] = static_cast<float>(d.data[i]);
    return r;
}

Raster sensor_mm_from_depth(const DepthFrame& d) {
    Raster r(d.height, d.width, 1, Dtype::uint16);
    auto dst = r.as<std::uint16_t>();
    for (std::size_t i = 0; i < d.data.size(); ++i) {
        const double mm = std::round(d.data[i] * 1000.0);
        dst[i] = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    }
    return r;
}

NormalFrame normal_from_raster(const Raster& r) {
    if (r.dtype() != Dtype::float32 || r.channels() != 3)
        throw InvalidInput("normal raster must be 3-channel float32");
    NormalFrame n(r.height(), r.width());
    auto src = r.as<const float>();
    std::copy(src.begin(), src.end(), n.data.begin());
    return n;
}

Raster normal_to_raster(const NormalFrame& n) {
    Raster r(n.height, n.width, 3, Dtype::float32);
    auto dst = r.as<float>();
    std::copy(n.data.begin(), n.data.end(), dst.begin());
    return r;
}

}  // namespace geocond
