#include "geocond/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace geocond {
namespace cond {

using nlohmann::json;

std::pair<int, int> select_keyframes_temporal(int clip_len) {
    if (clip_len < 1) throw InvalidInput("clip_len must be >= 1");
    return {0, clip_len - 1};
}

std::pair<int, int> select_keyframes_content(std::span<const std::int64_t> areas) {
    if (areas.empty()) throw InvalidInput("object_pixel_areas is empty");
    int best_max = 0, best_min = 0;
    for (std::size_t i = 1; i < areas.size(); ++i) {
        if (areas[i] < 0) throw InvalidInput("object_pixel_areas must be non-negative");
        if (areas[i] > areas[best_max]) best_max = static_cast<int>(i);
        if (areas[i] < areas[best_min]) best_min = static_cast<int>(i);
    }
    if (areas[0] < 0) throw InvalidInput("object_pixel_areas must be non-negative");
    return {best_max, best_min};
}

BackgroundRecord composite_background(const Raster& frame, const Mask& union_mask,
                                      const Raster& fill) {
    if (frame.height() != union_mask.height() || frame.width() != union_mask.width() ||
        frame.height() != fill.height() || frame.width() != fill.width() ||
        frame.channels() != fill.channels() || frame.dtype() != fill.dtype())
        throw InvalidInput("composite_background: dimension mismatch");

    BackgroundRecord rec;
    rec.image = frame;
    rec.inpainted = true;
    const std::size_t es = dtype_size(frame.dtype());
    const std::size_t plane = frame.pixel_count();
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) {
            if (!union_mask.at(y, x)) continue;
            const std::size_t pi = static_cast<std::size_t>(y) * frame.width() + x;
            for (int c = 0; c < frame.channels(); ++c) {
                const std::size_t off = (static_cast<std::size_t>(c) * plane + pi) * es;
                std::memcpy(rec.image.bytes() + off, fill.bytes() + off, es);
            }
        }
    }
    return rec;
}

namespace {

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open: " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("missing file: " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const void* data, std::size_t size) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + p.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw IoError("write failed: " + p.string());
}

/// Prefers the conventional derived-stream name, falls back to the first
/// stream of the kind for the view (name order).
const StreamDescriptor* pick_stream(const PackManifest& m, const std::string& view,
                                    StreamKind kind,
                                    std::initializer_list<const char*> preferred_suffixes) {
    for (const char* suf : preferred_suffixes) {
        if (const auto* d = m.find_stream(view + "_" + suf); d && d->kind == kind) return d;
    }
    const StreamDescriptor* found = nullptr;
    for (const auto& s : m.streams) {
        if (s.view_id != view || s.kind != kind) continue;
        if (!found || s.name < found->name) found = &s;
    }
    return found;
}

struct MaskEntry {
    ObjectRecord rec;
    Mask mask;
};

}  // namespace

ConditionTriplet build_triplet(const std::filesystem::path& pack_dir, const BuildOptions& opts) {
    const PackManifest m = manifest_read(pack_dir);

    ConditionTriplet t;
    t.policy = opts.policy == KeyframePolicy::temporal ? "temporal" : "content";

    // every view with ground truth must carry a full geometry pair
    for (const auto& v : m.views) {
        const auto* rgb = pick_stream(m, v.view_id, StreamKind::rgb, {"rgb"});
        if (!rgb) continue;
        const auto* depth =
            pick_stream(m, v.view_id, StreamKind::depth_metric_m, {"depth_metric", "depth_gt"});
        if (!depth)
            throw FormatError("view '" + v.view_id + "' has ground truth but no metric depth");
        const auto* normal =
            pick_stream(m, v.view_id, StreamKind::normal_cam, {"normal", "normal_gt"});
        if (!normal)
            throw FormatError("view '" + v.view_id + "' has ground truth but no normals");
        t.view_ids.push_back(v.view_id);
        t.rgb_streams.push_back(rgb->name);
        t.depth_streams.push_back(depth->name);
        t.normal_streams.push_back(normal->name);
    }
    if (t.view_ids.empty()) throw FormatError("pack has no rgb streams");

    // appearance view: explicit choice, else the head camera, else first
    t.condition_view = t.view_ids.front();
    if (opts.view_id) {
        if (std::find(t.view_ids.begin(), t.view_ids.end(), *opts.view_id) == t.view_ids.end())
            throw FormatError("requested view '" + *opts.view_id + "' has no ground truth");
        t.condition_view = *opts.view_id;
    } else {
        for (const auto& v : m.views) {
            if (v.role == ViewRole::head &&
                std::find(t.view_ids.begin(), t.view_ids.end(), v.view_id) != t.view_ids.end()) {
                t.condition_view = v.view_id;
                break;
            }
        }
    }

    json masks_json;
    if (opts.masks_file) {
        try {
            masks_json = json::parse(read_text(*opts.masks_file));
        } catch (const json::exception& e) {
            throw FormatError("invalid masks JSON: " + std::string(e.what()));
        }
    }

    if (opts.policy == KeyframePolicy::temporal) {
        std::tie(t.object_frame, t.background_frame) = select_keyframes_temporal(m.frame_count);
    } else {
        if (!opts.masks_file || !masks_json.is_object() ||
            !masks_json.contains("object_pixel_areas"))
            throw ValidationError(
                "content policy needs a masks file with an object_pixel_areas array");
        std::vector<std::int64_t> areas;
        for (const auto& a : masks_json["object_pixel_areas"]) areas.push_back(a.get<std::int64_t>());
        if (static_cast<int>(areas.size()) != m.frame_count)
            throw ValidationError("object_pixel_areas length must equal frame_count");
        std::tie(t.object_frame, t.background_frame) = select_keyframes_content(areas);
    }

    const std::string cond_rgb = t.rgb_streams[static_cast<std::size_t>(
        std::find(t.view_ids.begin(), t.view_ids.end(), t.condition_view) - t.view_ids.begin())];
    const std::vector<Raster> rgb_frames = read_stream(pack_dir, m, cond_rgb);
    const Raster& bg_frame = rgb_frames[t.background_frame];
    const Raster& obj_frame = rgb_frames[t.object_frame];
    const int W = bg_frame.width(), H = bg_frame.height();

    t.background.image = bg_frame;
    t.background.source_frame = t.background_frame;
    t.background.inpainted = false;

    // ingest object annotations
    std::vector<MaskEntry> entries;
    if (opts.masks_file) {
        const json& list = masks_json.is_array() ? masks_json : masks_json.at("objects");
        json emb_json;
        if (opts.embeddings_file) {
            try {
                emb_json = json::parse(read_text(*opts.embeddings_file));
            } catch (const json::exception& e) {
                throw FormatError("invalid embeddings JSON: " + std::string(e.what()));
            }
        }

        std::vector<std::string> offenders;
        std::vector<std::string> reasons;
        for (const auto& o : list) {
            MaskEntry e;
            e.rec.object_id = o.at("object_id").get<std::string>();
            e.rec.description = o.value("description", "");
            const auto& bb = o.at("bbox");
            if (!bb.is_array() || bb.size() != 4)
                throw FormatError("bbox must be [x, y, w, h] for object " + e.rec.object_id);
            for (int i = 0; i < 4; ++i) e.rec.bbox[static_cast<std::size_t>(i)] = bb[i].get<int>();
            e.rec.mask_path = o.at("mask").get<std::string>();
            e.rec.source_frame = o.value("source_frame", t.object_frame);

            const auto [bx, by, bw, bh] = e.rec.bbox;
            if (bx < 0 || by < 0 || bw < 1 || bh < 1 || bx + bw > W || by + bh > H) {
                offenders.push_back(e.rec.object_id);
                reasons.push_back(e.rec.object_id + ": bbox outside frame bounds");
                continue;
            }

            const auto bytes = read_bytes(pack_dir / e.rec.mask_path);
            if (bytes.size() != static_cast<std::size_t>(W) * H)
                throw FormatError("mask file for '" + e.rec.object_id + "' has wrong size");
            e.mask = Mask(H, W);
            for (std::size_t i = 0; i < bytes.size(); ++i)
                e.mask.data()[i] = bytes[i] ? 1 : 0;

            // nonzero only inside bbox, 2 px tolerance
            bool outside = false;
            for (int y = 0; y < H && !outside; ++y) {
                for (int x = 0; x < W; ++x) {
                    if (!e.mask.at(y, x)) continue;
                    if (x < bx - 2 || x >= bx + bw + 2 || y < by - 2 || y >= by + bh + 2) {
                        outside = true;
                        break;
                    }
                }
            }
            if (outside) {
                offenders.push_back(e.rec.object_id);
                reasons.push_back(e.rec.object_id + ": mask has pixels outside bbox (+2px)");
                continue;
            }

            if (!emb_json.is_object() || !emb_json.contains(e.rec.object_id)) {
                offenders.push_back(e.rec.object_id);
                reasons.push_back(e.rec.object_id + ": no embedding supplied");
                continue;
            }
            const auto& ej = emb_json.at(e.rec.object_id);
            const auto dim = ej.at("dim").get<std::size_t>();
            const auto data = read_bytes(
                opts.embeddings_file->parent_path() / ej.at("data").get<std::string>());
            if (dim == 0 || data.size() != dim * sizeof(float))
                throw FormatError("embedding for '" + e.rec.object_id + "' has wrong size");
            e.rec.embedding.resize(dim);
            std::memcpy(e.rec.embedding.data(), data.data(), data.size());
            for (float v : e.rec.embedding) {
                if (!std::isfinite(v)) {
                    offenders.push_back(e.rec.object_id);
                    reasons.push_back(e.rec.object_id + ": embedding has non-finite values");
                    break;
                }
            }
            if (!offenders.empty() && offenders.back() == e.rec.object_id) continue;

            entries.push_back(std::move(e));
        }
        if (!offenders.empty()) {
            std::string msg = "object validation failed:";
            for (const auto& r : reasons) msg += " [" + r + "]";
            throw ValidationError(msg, offenders);
        }
    }

    // persist: background reference, object crops, triplet.json
    std::error_code ec;
    std::filesystem::create_directories(pack_dir / "streams", ec);
    if (ec) throw IoError("cannot create streams dir in " + pack_dir.string());

    write_bytes(pack_dir / "streams" / "background_ref.raw", t.background.image.bytes(),
                t.background.image.byte_size());

    constexpr int kCrop = 224;
    for (const auto& e : entries) {
        const auto [bx, by, bw, bh] = e.rec.bbox;
        Raster crop(kCrop, kCrop, obj_frame.channels(), obj_frame.dtype());
        auto src = obj_frame.as<const std::uint8_t>();
        auto dst = crop.as<std::uint8_t>();
        const std::size_t splane = obj_frame.pixel_count();
        const std::size_t dplane = crop.pixel_count();
        for (int y = 0; y < kCrop; ++y) {
            const int sy = by + static_cast<int>((static_cast<std::int64_t>(y) * bh) / kCrop);
            for (int x = 0; x < kCrop; ++x) {
                const int sx = bx + static_cast<int>((static_cast<std::int64_t>(x) * bw) / kCrop);
                for (int c = 0; c < crop.channels(); ++c)
                    dst[static_cast<std::size_t>(c) * dplane + static_cast<std::size_t>(y) * kCrop +
                        x] = src[static_cast<std::size_t>(c) * splane +
                                 static_cast<std::size_t>(sy) * W + sx];
            }
        }
        const std::string crop_path = "streams/" + e.rec.object_id + "_crop224.raw";
        write_bytes(pack_dir / crop_path, crop.bytes(), crop.byte_size());
        t.crops.push_back({e.rec.object_id, crop_path});
        t.objects.push_back(e.rec);
    }

    json tj;
    tj["schema_version"] = 1;
    tj["policy"] = t.policy;
    tj["condition_view"] = t.condition_view;
    tj["object_frame"] = t.object_frame;
    tj["background_frame"] = t.background_frame;
    tj["views"] = t.view_ids;
    json geom = json::object(), gt = json::object();
    for (std::size_t i = 0; i < t.view_ids.size(); ++i) {
        geom[t.view_ids[i]] = {{"depth", t.depth_streams[i]}, {"normal", t.normal_streams[i]}};
        gt[t.view_ids[i]] = t.rgb_streams[i];
    }
    tj["geometry"] = geom;
    tj["ground_truth"] = gt;
    tj["background"] = {{"image", "streams/background_ref.raw"},
                        {"source_frame", t.background.source_frame},
                        {"inpainted", t.background.inpainted},
                        {"shape", {H, W, t.background.image.channels()}}};
    tj["objects"] = json::array();
    for (std::size_t i = 0; i < t.objects.size(); ++i) {
        const auto& o = t.objects[i];
        tj["objects"].push_back(
            {{"object_id", o.object_id},
             {"description", o.description},
             {"bbox", {o.bbox[0], o.bbox[1], o.bbox[2], o.bbox[3]}},
             {"mask", o.mask_path},
             {"embedding_dim", o.embedding.size()},
             {"source_frame", o.source_frame},
             {"crop", {{"path", t.crops[i].crop_path}, {"size", {kCrop, kCrop}},
                       {"method", "nearest"}}}});
    }
    const std::string text = tj.dump(2) + "\n";
    write_bytes(pack_dir / "triplet.json", text.data(), text.size());
    return t;
}

}  // namespace cond
}  // namespace geocond
