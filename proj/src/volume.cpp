#include "vseg/volume.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "vseg/errors.hpp"
#include "vseg/kvfile.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw voxel I/O assumes a little-endian host");

namespace vseg {

size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::u8: return 1;
        case Dtype::i16: return 2;
        case Dtype::f32: return 4;
    }
    throw InvalidArgument("unknown dtype");
}

const char* dtype_name(Dtype d) {
    switch (d) {
        case Dtype::u8: return "u8";
        case Dtype::i16: return "i16";
        case Dtype::f32: return "f32";
    }
    throw InvalidArgument("unknown dtype");
}

Dtype dtype_from_name(const std::string& name) {
    if (name == "u8") return Dtype::u8;
    if (name == "i16") return Dtype::i16;
    if (name == "f32") return Dtype::f32;
    throw FormatError("unknown dtype '" + name + "' (expected u8, i16 or f32)");
}

Dtype Volume::dtype() const {
    switch (values.index()) {
        case 0: return Dtype::u8;
        case 1: return Dtype::i16;
        default: return Dtype::f32;
    }
}

float Volume::scalar_at(int x, int y, int z) const {
    const size_t i = index(x, y, z);
    return std::visit([i](const auto& buf) { return static_cast<float>(buf[i]); }, values);
}

void Volume::validate() const {
    if (width < 1 || height < 1 || depth < 1)
        throw InvalidArgument("volume dims must be >= 1");
    for (double s : spacing)
        if (!(s > 0.0)) throw InvalidArgument("volume spacing must be > 0");
    const size_t n = voxel_count();
    const size_t have = std::visit([](const auto& buf) { return buf.size(); }, values);
    if (have != n)
        throw InvalidArgument("volume buffer length " + std::to_string(have) +
                              " != width*height*depth " + std::to_string(n));
}

size_t MaskVolume::count(uint8_t v) const {
    return static_cast<size_t>(std::count(values.begin(), values.end(), v));
}

void MaskVolume::validate_alphabet(std::span<const uint8_t> allowed) const {
    for (uint8_t v : values) {
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end())
            throw InvalidArgument("mask voxel value " + std::to_string(int(v)) +
                                  " outside the declared alphabet");
    }
}

namespace {

struct HeaderInfo {
    int w, h, d;
    std::array<double, 3> spacing;
    Dtype dtype;
    std::filesystem::path raw_path;
};

HeaderInfo read_header(const std::filesystem::path& header_path) {
    if (!std::filesystem::exists(header_path))
        throw IoError("header not found: " + header_path.string());
    KvFile kv = KvFile::load(header_path);

    auto dims = kv.require_ints("dims", 3);
    auto sp = kv.require_doubles("spacing_mm", 3);
    HeaderInfo info;
    info.w = static_cast<int>(dims[0]);
    info.h = static_cast<int>(dims[1]);
    info.d = static_cast<int>(dims[2]);
    if (info.w < 1 || info.h < 1 || info.d < 1)
        throw FormatError("header dims must be >= 1 in " + header_path.string());
    info.spacing = {sp[0], sp[1], sp[2]};
    for (double s : info.spacing)
        if (!(s > 0.0)) throw FormatError("header spacing must be > 0 in " + header_path.string());
    info.dtype = dtype_from_name(kv.require("dtype"));
    if (kv.require("byte_order") != "little")
        throw FormatError("byte_order must be 'little' in " + header_path.string());
    info.raw_path = header_path.parent_path() / kv.require("data_file");
    return info;
}

std::vector<char> read_raw(const std::filesystem::path& raw_path, size_t expected_bytes) {
    std::ifstream f(raw_path, std::ios::binary);
    if (!f) throw IoError("raw data file not found: " + raw_path.string());
    f.seekg(0, std::ios::end);
    const auto size = static_cast<size_t>(f.tellg());
    if (size != expected_bytes)
        throw FormatError("raw file size " + std::to_string(size) + " != expected " +
                          std::to_string(expected_bytes) + " for " + raw_path.string());
    f.seekg(0);
    std::vector<char> buf(size);
    f.read(buf.data(), static_cast<std::streamsize>(size));
    if (!f) throw IoError("short read from " + raw_path.string());
    return buf;
}

void write_pair(const std::filesystem::path& header_path, int w, int h, int d,
                const std::array<double, 3>& spacing, Dtype dtype, const void* bytes,
                size_t nbytes) {
    std::filesystem::path raw_path = header_path;
    raw_path.replace_extension(".vraw");

    KvFile kv;
    kv.set("dims", std::to_string(w) + " " + std::to_string(h) + " " + std::to_string(d));
    {
        std::string s;
        for (int i = 0; i < 3; ++i) {
            KvFile tmp;
            tmp.set_double("x", spacing[i]);
            s += tmp.require("x");
            if (i < 2) s += " ";
        }
        kv.set("spacing_mm", s);
    }
    kv.set("dtype", dtype_name(dtype));
    kv.set("data_file", raw_path.filename().string());
    kv.set("byte_order", "little");
    kv.save(header_path);

    std::ofstream f(raw_path, std::ios::binary);
    if (!f) throw IoError("cannot write " + raw_path.string());
    f.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(nbytes));
    if (!f) throw IoError("write failed: " + raw_path.string());
}

}  // namespace

Volume load_volume(const std::filesystem::path& header_path) {
    const HeaderInfo info = read_header(header_path);
    const size_t n = size_t(info.w) * info.h * info.d;
    const std::vector<char> raw = read_raw(info.raw_path, n * dtype_size(info.dtype));

    Volume v;
    v.width = info.w;
    v.height = info.h;
    v.depth = info.d;
    v.spacing = info.spacing;
    switch (info.dtype) {
        case Dtype::u8: {
            std::vector<uint8_t> buf(n);
            std::memcpy(buf.data(), raw.data(), raw.size());
            v.values = std::move(buf);
            break;
        }
        case Dtype::i16: {
            std::vector<int16_t> buf(n);
            std::memcpy(buf.data(), raw.data(), raw.size());
            v.values = std::move(buf);
            break;
        }
        case Dtype::f32: {
            std::vector<float> buf(n);
            std::memcpy(buf.data(), raw.data(), raw.size());
            v.values = std::move(buf);
            break;
        }
    }
    v.validate();
    return v;
}

void save_volume(const Volume& v, const std::filesystem::path& header_path) {
    v.validate();
    std::visit(
        [&](const auto& buf) {
            using T = typename std::decay_t<decltype(buf)>::value_type;
            write_pair(header_path, v.width, v.height, v.depth, v.spacing, v.dtype(),
                       buf.data(), buf.size() * sizeof(T));
        },
        v.values);
}

MaskVolume load_mask(const std::filesystem::path& header_path) {
    Volume v = load_volume(header_path);
    if (v.dtype() != Dtype::u8)
        throw FormatError("mask volume must be u8: " + header_path.string());
    MaskVolume m;
    m.width = v.width;
    m.height = v.height;
    m.depth = v.depth;
    m.spacing = v.spacing;
    m.values = std::move(v.data<uint8_t>());
    return m;
}

void save_mask(const MaskVolume& m, const std::filesystem::path& header_path, bool pgm_frames) {
    if (m.voxel_count() != m.values.size())
        throw InvalidArgument("mask buffer length does not match dims");
    write_pair(header_path, m.width, m.height, m.depth, m.spacing, Dtype::u8, m.values.data(),
               m.values.size());

    if (!pgm_frames) return;
    std::filesystem::path stem = header_path;
    stem.replace_extension();
    std::vector<uint8_t> pixels(size_t(m.width) * m.height);
    for (int z = 0; z < m.depth; ++z) {
        const uint8_t* src = m.values.data() + size_t(z) * m.width * m.height;
        for (size_t i = 0; i < pixels.size(); ++i)
            pixels[i] = static_cast<uint8_t>(std::min(255, int(src[i]) * 63));
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "_%04d.pgm", z);
        save_pgm(stem.string() + suffix, m.width, m.height, pixels);
    }
}

Frame slice_frame(const Volume& v, int k) {
    if (k < 0 || k >= v.depth)
        throw InvalidArgument("frame index " + std::to_string(k) + " out of range [0," +
                              std::to_string(v.depth) + ")");
    Frame f;
    f.width = v.width;
    f.height = v.height;
    f.frame_index = k;
    f.values.resize(size_t(v.width) * v.height);
    for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x) f.at(x, y) = v.scalar_at(x, y, k);
    return f;
}

MaskFrame slice_mask_frame(const MaskVolume& m, int k) {
    if (k < 0 || k >= m.depth)
        throw InvalidArgument("frame index " + std::to_string(k) + " out of range [0," +
                              std::to_string(m.depth) + ")");
    MaskFrame f;
    f.width = m.width;
    f.height = m.height;
    const uint8_t* src = m.values.data() + size_t(k) * m.width * m.height;
    f.values.assign(src, src + size_t(m.width) * m.height);
    return f;
}

void save_pgm(const std::filesystem::path& path, int width, int height,
              std::span<const uint8_t> pixels) {
    if (pixels.size() != size_t(width) * height)
        throw InvalidArgument("pgm pixel count does not match dims");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << "P5\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace vseg
