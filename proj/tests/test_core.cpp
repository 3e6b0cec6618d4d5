#include <doctest.h>

#include <cstring>
#include <fstream>

#include "geocond/pack.hpp"
#include "geocond/rng.hpp"
#include "test_support.hpp"

using namespace geocond;

namespace {

PackManifest one_stream_manifest(int frames, int h, int w, int c, StreamKind kind, Dtype dt) {
    PackManifest m;
    m.fps = 10.0;
    m.frame_count = frames;
    m.views.push_back({"head", {500.0, 500.0, (w - 1) / 2.0, (h - 1) / 2.0}, ViewRole::head});
    StreamDescriptor d;
    d.name = "head_s";
    d.view_id = "head";
    d.kind = kind;
    d.dtype = dt;
    d.height = h;
    d.width = w;
    d.channels = c;
    d.path = "streams/head_s.raw";
    m.streams.push_back(d);
    return m;
}

}  // namespace

TEST_CASE("rng: equal seeds give equal streams") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 100000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c(1234), d(1234);
    for (int i = 0; i < 100000; ++i) {
        REQUIRE(c.uniform() == d.uniform());
    }
    Rng e(77), f(77);
    for (int i = 0; i < 1000; ++i) REQUIRE(e.normal() == f.normal());
}

TEST_CASE("rng: uniform stays in [0,1) and children differ") {
    Rng r(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    Rng base(9);
    REQUIRE(base.child(0).next_u64() != base.child(1).next_u64());
}

TEST_CASE("raster: construction and finite check") {
    Raster r(2, 3, 1, Dtype::float32);
    REQUIRE(r.byte_size() == 2 * 3 * 4);
    r.as<float>()[0] = std::numeric_limits<float>::infinity();
    REQUIRE_THROWS_AS(r.check_finite(), InvalidInput);
}

TEST_CASE("mask: values restricted to {0,1}") {
    Mask m(2, 2);
    m.set(0, 0, 1);
    REQUIRE(m.count() == 1);
    REQUIRE_THROWS_AS(m.set(0, 1, 2), InvalidInput);
}

TEST_CASE("pack: 1-view 1-frame 2x2 float32 stream is a 16-byte raw file") {
    test::TempDir dir("pack_tiny");
    PackManifest m = one_stream_manifest(1, 2, 2, 1, StreamKind::depth_metric_m, Dtype::float32);
    Raster r(2, 2, 1, Dtype::float32);
    float vals[4] = {1.f, 2.f, 3.f, 4.f};
    std::memcpy(r.bytes(), vals, sizeof(vals));
    pack_write(m, {{"head_s", {r}}}, dir.path());

    REQUIRE(std::filesystem::file_size(dir.path() / "streams/head_s.raw") == 16);
    auto [m2, streams] = pack_read(dir.path());
    REQUIRE(streams.at("head_s")[0] == r);
    REQUIRE(m2.frame_count == 1);
}

TEST_CASE("pack: declared 3 frames but 2 supplied is a FormatError") {
    test::TempDir dir("pack_short");
    PackManifest m = one_stream_manifest(3, 2, 2, 1, StreamKind::depth_metric_m, Dtype::float32);
    std::vector<Raster> frames(2, Raster(2, 2, 1, Dtype::float32));
    REQUIRE_THROWS_AS(pack_write(m, {{"head_s", frames}}, dir.path()), FormatError);
}

TEST_CASE("pack: truncated stream file is a FormatError") {
    test::TempDir dir("pack_trunc");
    PackManifest m = one_stream_manifest(2, 4, 4, 1, StreamKind::depth_metric_m, Dtype::float32);
    Rng rng(3);
    std::vector<Raster> frames;
    for (int i = 0; i < 2; ++i) {
        Raster r(4, 4, 1, Dtype::float32);
        for (auto& v : r.as<float>()) v = static_cast<float>(rng.uniform());
        frames.push_back(r);
    }
    pack_write(m, {{"head_s", frames}}, dir.path());
    std::filesystem::resize_file(dir.path() / "streams/head_s.raw", 100);
    REQUIRE_THROWS_AS(pack_read(dir.path()), FormatError);
}

TEST_CASE("pack: duplicate view_id is a FormatError") {
    PackManifest m = one_stream_manifest(1, 2, 2, 1, StreamKind::depth_metric_m, Dtype::float32);
    m.views.push_back(m.views.front());
    REQUIRE_THROWS_AS(m.validate(), FormatError);
}

TEST_CASE("pack: unknown schema_version is a VersionError") {
    test::TempDir dir("pack_ver");
    PackManifest m = one_stream_manifest(1, 2, 2, 1, StreamKind::depth_metric_m, Dtype::float32);
    Raster r(2, 2, 1, Dtype::float32);
    pack_write(m, {{"head_s", {r}}}, dir.path());

    std::ifstream in(dir.path() / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"schema_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"schema_version\": 9");
    std::ofstream out(dir.path() / "manifest.json", std::ios::trunc);
    out << text;
    out.close();
    REQUIRE_THROWS_AS(pack_read(dir.path()), VersionError);
}

TEST_CASE("pack: round trip is bit-exact over randomized shapes and dtypes") {
    Rng rng(2024);
    const Dtype dts[3] = {Dtype::float32, Dtype::uint16, Dtype::uint8};
    const StreamKind kinds[3] = {StreamKind::depth_metric_m, StreamKind::depth_sensor_mm,
                                 StreamKind::rgb};
    for (int trial = 0; trial < 25; ++trial) {
        test::TempDir dir("pack_prop");
        const int frames = 1 + static_cast<int>(rng.next_u64() % 4);
        const int h = 1 + static_cast<int>(rng.next_u64() % 12);
        const int w = 1 + static_cast<int>(rng.next_u64() % 12);
        const int pick = static_cast<int>(rng.next_u64() % 3);
        const Dtype dt = dts[pick];
        const int c = kind_channels(kinds[pick]);

        PackManifest m = one_stream_manifest(frames, h, w, c, kinds[pick], dt);
        std::vector<Raster> data;
        for (int i = 0; i < frames; ++i) data.push_back(test::random_raster(h, w, c, dt, rng));
        pack_write(m, {{"head_s", data}}, dir.path());
        auto [m2, streams] = pack_read(dir.path());
        REQUIRE(streams.at("head_s").size() == data.size());
        for (int i = 0; i < frames; ++i) REQUIRE(streams.at("head_s")[i] == data[i]);

        // rewriting yields byte-identical files
        std::ifstream f1(dir.path() / "streams/head_s.raw", std::ios::binary);
        std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        pack_write(m, {{"head_s", data}}, dir.path());
        std::ifstream f2(dir.path() / "streams/head_s.raw", std::ios::binary);
        std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        REQUIRE(bytes1 == bytes2);
    }
}

TEST_CASE("pack: 3-view 30-frame synthetic round trip") {
    test::TempDir dir("pack_3v");
    PackManifest m;
    m.fps = 10.0;
    m.frame_count = 30;
    StreamData streams;
    Rng rng(11);
    const char* ids[3] = {"left_wrist", "head", "right_wrist"};
    const ViewRole roles[3] = {ViewRole::left_wrist, ViewRole::head, ViewRole::right_wrist};
    for (int v = 0; v < 3; ++v) {
        m.views.push_back({ids[v], {100.0, 100.0, 15.5, 11.5}, roles[v]});
        StreamDescriptor d;
        d.name = std::string(ids[v]) + "_rgb";
        d.view_id = ids[v];
        d.kind = StreamKind::rgb;
        d.dtype = Dtype::uint8;
        d.height = 24;
        d.width = 32;
        d.channels = 3;
        d.path = "streams/" + d.name + ".raw";
        m.streams.push_back(d);
        std::vector<Raster> frames;
        for (int i = 0; i < 30; ++i)
            frames.push_back(test::random_raster(24, 32, 3, Dtype::uint8, rng));
        streams[d.name] = std::move(frames);
    }
    pack_write(m, streams, dir.path());
    auto [m2, got] = pack_read(dir.path());
    for (const auto& [name, frames] : streams) {
        REQUIRE(got.at(name).size() == frames.size());
        for (std::size_t i = 0; i < frames.size(); ++i) REQUIRE(got.at(name)[i] == frames[i]);
    }
}

TEST_CASE("pack: add_stream replaces and keeps the manifest valid") {
    test::TempDir dir("pack_add");
    PackManifest m = one_stream_manifest(2, 4, 4, 1, StreamKind::depth_pred_rel, Dtype::float32);
    m.streams[0].name = "head_depth_pred";
    m.streams[0].path = "streams/head_depth_pred.raw";
    Rng rng(5);
    std::vector<Raster> frames;
    for (int i = 0; i < 2; ++i) {
        Raster r(4, 4, 1, Dtype::float32);
        for (auto& v : r.as<float>()) v = static_cast<float>(rng.uniform(0.5, 2.0));
        frames.push_back(r);
    }
    pack_write(m, {{"head_depth_pred", frames}}, dir.path());

    StreamDescriptor d;
    d.name = "head_depth_metric";
    d.view_id = "head";
    d.kind = StreamKind::depth_metric_m;
    d.dtype = Dtype::float32;
    d.height = 4;
    d.width = 4;
    d.channels = 1;
    d.path = "streams/head_depth_metric.raw";
    pack_add_stream(dir.path(), d, frames);

    const PackManifest m2 = manifest_read(dir.path());
    REQUIRE(m2.streams.size() == 2);
    REQUIRE(m2.find_stream("head_depth_metric") != nullptr);
    const auto back = read_stream(dir.path(), m2, "head_depth_metric");
    REQUIRE(back[0] == frames[0]);
}

TEST_CASE("depth conversions: mm sensor to meters and back") {
    Raster mm(1, 3, 1, Dtype::uint16);
    auto px = mm.as<std::uint16_t>();
    px[0] = 0;
    px[1] = 1500;
    px[2] = 832;
    const DepthFrame d = depth_from_sensor_mm(mm);
    REQUIRE(d.data[0] == 0.0);
    REQUIRE(d.data[1] == doctest::Approx(1.5));
    REQUIRE(d.data[2] == doctest::Approx(0.832));
    const Raster back = sensor_mm_from_depth(d);
    REQUIRE(back == mm);
}
