#include "geocond/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace geocond {
namespace layout {

void MultiViewClip::validate() const {
    if (views.empty()) throw InvalidInput("clip has no views");
    const auto& first = views.front();
    if (first.frames.empty()) throw InvalidInput("view has no frames");
    const int h = first.frames.front().height();
    const int c = first.frames.front().channels();
    const Dtype dt = first.frames.front().dtype();
    const std::size_t n = first.frames.size();

    for (const auto& v : views) {
        if (v.frames.size() != n) throw InvalidInput("views differ in frame count");
        const int w = v.frames.front().width();
        for (const auto& f : v.frames) {
            if (f.height() != h) throw InvalidInput("views differ in height");
            if (f.width() != w) throw InvalidInput("frames of one view differ in width");
            if (f.channels() != c || f.dtype() != dt)
                throw InvalidInput("views differ in channels/dtype");
        }
    }

    // Three-camera rigs have a fixed order contract.
    bool has_l = false, has_h = false, has_r = false;
    for (const auto& v : views) {
        has_l |= v.role == ViewRole::left_wrist;
        has_h |= v.role == ViewRole::head;
        has_r |= v.role == ViewRole::right_wrist;
    }
    if (has_l && has_h && has_r) {
        const ViewRole want[3] = {ViewRole::left_wrist, ViewRole::head, ViewRole::right_wrist};
        if (views.size() != 3) throw InvalidInput("role-tagged clip must have exactly 3 views");
        for (int i = 0; i < 3; ++i) {
            if (views[i].role != want[i])
                throw InvalidInput("views must be ordered (left_wrist, head, right_wrist)");
        }
    }
}

ConcatResult concat_views(const MultiViewClip& clip) {
    clip.validate();
    const auto& f0 = clip.views.front().frames.front();
    const int h = f0.height(), c = f0.channels();
    const Dtype dt = f0.dtype();
    const std::size_t es = dtype_size(dt);
    const std::size_t n_frames = clip.views.front().frames.size();

    ConcatResult out;
    int total_w = 0;
    for (const auto& v : clip.views) {
        out.offsets.push_back(total_w);
        total_w += v.frames.front().width();
    }

    out.frames.reserve(n_frames);
    for (std::size_t fi = 0; fi < n_frames; ++fi) {
        Raster dst(h, total_w, c, dt);
        for (std::size_t vi = 0; vi < clip.views.size(); ++vi) {
            const Raster& src = clip.views[vi].frames[fi];
            const int vw = src.width();
            const int off = out.offsets[vi];
            for (int ch = 0; ch < c; ++ch) {
                for (int y = 0; y < h; ++y) {
                    const std::size_t srow = (static_cast<std::size_t>(ch) * h + y) * vw;
                    const std::size_t drow =
                        (static_cast<std::size_t>(ch) * h + y) * total_w + off;
                    std::memcpy(dst.bytes() + drow * es, src.bytes() + srow * es, vw * es);
                }
            }
        }
        out.frames.push_back(std::move(dst));
    }
    return out;
}

MultiViewClip split_views(std::span<const Raster> frames, std::span<const int> offsets) {
    if (frames.empty()) throw InvalidInput("no frames to split");
    if (offsets.empty() || offsets.front() != 0)
        throw InvalidInput("offsets must start at 0");
    const int w = frames.front().width();
    for (std::size_t i = 1; i < offsets.size(); ++i) {
        if (offsets[i] <= offsets[i - 1]) throw InvalidInput("offsets must be strictly increasing");
    }
    if (offsets.back() >= w) throw InvalidInput("offset out of bounds");

    const int h = frames.front().height(), c = frames.front().channels();
    const Dtype dt = frames.front().dtype();
    const std::size_t es = dtype_size(dt);

    MultiViewClip clip;
    for (std::size_t vi = 0; vi < offsets.size(); ++vi) {
        const int off = offsets[vi];
        const int vw = (vi + 1 < offsets.size() ? offsets[vi + 1] : w) - off;
        MultiViewClip::View view;
        view.view_id = "view" + std::to_string(vi);
        for (const Raster& f : frames) {
            if (f.height() != h || f.width() != w || f.channels() != c || f.dtype() != dt)
                throw InvalidInput("frames differ in shape");
            Raster dst(h, vw, c, dt);
            for (int ch = 0; ch < c; ++ch) {
                for (int y = 0; y < h; ++y) {
                    const std::size_t srow = (static_cast<std::size_t>(ch) * h + y) * w + off;
                    const std::size_t drow = (static_cast<std::size_t>(ch) * h + y) * vw;
                    std::memcpy(dst.bytes() + drow * es, f.bytes() + srow * es, vw * es);
                }
            }
            view.frames.push_back(std::move(dst));
        }
        clip.views.push_back(std::move(view));
    }
    return clip;
}

std::string tag_name(ChannelTag t) {
    switch (t) {
        case ChannelTag::noise: return "noise";
        case ChannelTag::rgb_latent: return "rgb_latent";
        case ChannelTag::depth_latent: return "depth_latent";
        case ChannelTag::normal_latent: return "normal_latent";
        case ChannelTag::background_latent: return "background_latent";
    }
    throw InvalidInput("unknown channel tag");
}

ChannelTag tag_from_name(const std::string& s) {
    if (s == "noise") return ChannelTag::noise;
    if (s == "rgb_latent") return ChannelTag::rgb_latent;
    if (s == "depth_latent") return ChannelTag::depth_latent;
    if (s == "normal_latent") return ChannelTag::normal_latent;
    if (s == "background_latent") return ChannelTag::background_latent;
    throw FormatError("unknown channel tag: " + s);
}

void LatentGrid::validate() const {
    if (frames <= 0 || channels <= 0 || height <= 0 || width <= 0)
        throw InvalidInput("latent grid has non-positive dims");
    if (data.size() != static_cast<std::size_t>(frames) * frame_stride())
        throw InvalidInput("latent grid data size mismatch");
    int tagged = 0;
    for (const auto& t : tags) {
        if (t.channels <= 0) throw InvalidInput("tag block with non-positive channels");
        tagged += t.channels;
    }
    if (tagged != channels) throw InvalidInput("tag blocks must partition the channel axis");
}

LatentGrid encode_patches(std::span<const Raster> frames, const PatchEncoder& enc,
                          ChannelTag tag) {
    if (frames.empty()) throw InvalidInput("no frames to encode");
    const int p = enc.patch_size;
    if (p < 1) throw InvalidInput("patch_size must be >= 1");
    const int h = frames.front().height(), w = frames.front().width();
    const int c = frames.front().channels();
    if (h % p != 0 || w % p != 0)
        throw InvalidInput("frame dims must be divisible by patch_size");

    LatentGrid grid;
    grid.frames = static_cast<int>(frames.size());
    grid.channels = c * p * p;
    grid.height = h / p;
    grid.width = w / p;
    grid.data.resize(static_cast<std::size_t>(grid.frames) * grid.frame_stride());
    grid.tags = {{tag, grid.channels}};

    const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;
    for (int fi = 0; fi < grid.frames; ++fi) {
        const Raster& f = frames[fi];
        if (f.height() != h || f.width() != w || f.channels() != c ||
            f.dtype() != frames.front().dtype())
            throw InvalidInput("frames differ in shape");
        float* dst = grid.data.data() + static_cast<std::size_t>(fi) * grid.frame_stride();
        auto write = [&](auto src) {
            for (int ch = 0; ch < c; ++ch) {
                for (int dy = 0; dy < p; ++dy) {
                    for (int dx = 0; dx < p; ++dx) {
                        const int oc = (ch * p + dy) * p + dx;
                        float* out_plane = dst + static_cast<std::size_t>(oc) * plane;
                        for (int y = 0; y < grid.height; ++y) {
                            for (int x = 0; x < grid.width; ++x) {
                                const std::size_t si =
                                    (static_cast<std::size_t>(ch) * h + (y * p + dy)) * w +
                                    (x * p + dx);
                                out_plane[static_cast<std::size_t>(y) * grid.width + x] =
                                    static_cast<float>(src[si]);
                            }
                        }
                    }
                }
            }
        };
        switch (f.dtype()) {
            case Dtype::float32: write(f.as<const float>()); break;
            case Dtype::uint16: write(f.as<const std::uint16_t>()); break;
            case Dtype::uint8: write(f.as<const std::uint8_t>()); break;
        }
    }
    return grid;
}

std::vector<Raster> decode_patches(const LatentGrid& grid, const PatchEncoder& enc,
                                   Dtype out_dtype) {
    grid.validate();
    const int p = enc.patch_size;
    if (p < 1) throw InvalidInput("patch_size must be >= 1");
    if (grid.channels % (p * p) != 0)
        throw InvalidInput("latent channels not divisible by patch_size^2");
    const int c = grid.channels / (p * p);
    const int h = grid.height * p, w = grid.width * p;
    const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;

    std::vector<Raster> out;
    out.reserve(grid.frames);
    for (int fi = 0; fi < grid.frames; ++fi) {
        Raster r(h, w, c, out_dtype);
        const float* src = grid.data.data() + static_cast<std::size_t>(fi) * grid.frame_stride();
        auto read = [&](auto dst) {
            using T = std::remove_reference_t<decltype(dst[0])>;
            for (int ch = 0; ch < c; ++ch) {
                for (int dy = 0; dy < p; ++dy) {
                    for (int dx = 0; dx < p; ++dx) {
                        const int oc = (ch * p + dy) * p + dx;
                        const float* in_plane = src + static_cast<std::size_t>(oc) * plane;
                        for (int y = 0; y < grid.height; ++y) {
                            for (int x = 0; x < grid.width; ++x) {
                                const std::size_t di =
                                    (static_cast<std::size_t>(ch) * h + (y * p + dy)) * w +
                                    (x * p + dx);
                                const float v =
                                    in_plane[static_cast<std::size_t>(y) * grid.width + x];
                                if constexpr (std::is_same_v<T, float>) {
                                    dst[di] = v;
                                } else {
                                    dst[di] = static_cast<T>(std::lround(v));
                                }
                            }
                        }
                    }
                }
            }
        };
        switch (out_dtype) {
            case Dtype::float32: read(r.as<float>()); break;
            case Dtype::uint16: read(r.as<std::uint16_t>()); break;
            case Dtype::uint8: read(r.as<std::uint8_t>()); break;
        }
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

void check_spatial(const LatentGrid& a, const LatentGrid& b, const char* what) {
    if (a.height != b.height || a.width != b.width)
        throw InvalidInput(std::string("assemble: spatial mismatch on ") + what);
}

}  // namespace

LatentGrid assemble_condition_latent(const LatentGrid& noise, const LatentGrid& depth_lat,
                                     const LatentGrid& normal_lat, const LatentGrid& bg_lat) {
    noise.validate();
    depth_lat.validate();
    normal_lat.validate();
    bg_lat.validate();
    check_spatial(noise, depth_lat, "depth");
    check_spatial(noise, normal_lat, "normal");
    check_spatial(noise, bg_lat, "background");
    if (depth_lat.frames != noise.frames || normal_lat.frames != noise.frames)
        throw InvalidInput("assemble: frame count mismatch");
    if (bg_lat.frames != 1)
        throw InvalidInput("assemble: background latent must hold a single reference frame");

    LatentGrid out;
    out.frames = noise.frames;
    out.height = noise.height;
    out.width = noise.width;
    out.channels = noise.channels + depth_lat.channels + normal_lat.channels + bg_lat.channels;
    out.tags = {{ChannelTag::noise, noise.channels},
                {ChannelTag::depth_latent, depth_lat.channels},
                {ChannelTag::normal_latent, normal_lat.channels},
                {ChannelTag::background_latent, bg_lat.channels}};
    out.data.resize(static_cast<std::size_t>(out.frames) * out.frame_stride());

    for (int fi = 0; fi < out.frames; ++fi) {
        float* dst = out.data.data() + static_cast<std::size_t>(fi) * out.frame_stride();
        auto copy_block = [&](const LatentGrid& src, int src_frame) {
            const float* s =
                src.data.data() + static_cast<std::size_t>(src_frame) * src.frame_stride();
            std::memcpy(dst, s, src.frame_stride() * sizeof(float));
            dst += src.frame_stride();
        };
        copy_block(noise, fi);
        copy_block(depth_lat, fi);
        copy_block(normal_lat, fi);
        copy_block(bg_lat, 0);  // frame-broadcast
    }
    return out;
}

LatentGrid get_block(const LatentGrid& grid, ChannelTag tag) {
    grid.validate();
    int start = 0;
    for (const auto& t : grid.tags) {
        if (t.tag == tag) {
            LatentGrid out;
            out.frames = grid.frames;
            out.channels = t.channels;
            out.height = grid.height;
            out.width = grid.width;
            out.tags = {{tag, t.channels}};
            out.data.resize(static_cast<std::size_t>(out.frames) * out.frame_stride());
            const std::size_t plane = static_cast<std::size_t>(grid.height) * grid.width;
            for (int fi = 0; fi < grid.frames; ++fi) {
                const float* s = grid.data.data() +
                                 static_cast<std::size_t>(fi) * grid.frame_stride() +
                                 static_cast<std::size_t>(start) * plane;
                float* d = out.data.data() + static_cast<std::size_t>(fi) * out.frame_stride();
                std::memcpy(d, s, out.frame_stride() * sizeof(float));
            }
            return out;
        }
        start += t.channels;
    }
    throw InvalidInput("grid has no block tagged " + tag_name(tag));
}

LatentGrid make_noise_grid(int frames, int channels, int height, int width, Rng& rng) {
    LatentGrid g;
    g.frames = frames;
    g.channels = channels;
    g.height = height;
    g.width = width;
    g.tags = {{ChannelTag::noise, channels}};
    g.data.resize(static_cast<std::size_t>(frames) * g.frame_stride());
    for (auto& v : g.data) v = static_cast<float>(rng.normal());
    g.validate();
    return g;
}

}  // namespace layout
}  // namespace geocond
