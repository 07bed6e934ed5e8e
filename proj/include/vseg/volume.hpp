#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace vseg {

enum class Dtype : uint8_t { u8, i16, f32 };

size_t dtype_size(Dtype d);
const char* dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& name);

// 3D scalar grid with physical voxel spacing. Voxels are stored x-fastest
// (row-major within a frame, frames contiguous). Immutable after load by
// convention; concurrent reads are safe.
struct Volume {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // millimeters per voxel
    std::variant<std::vector<uint8_t>, std::vector<int16_t>, std::vector<float>> values;

    Dtype dtype() const;
    size_t voxel_count() const { return size_t(width) * height * depth; }
    size_t index(int x, int y, int z) const { return size_t(z) * height * width + size_t(y) * width + x; }

    float scalar_at(int x, int y, int z) const;

    template <typename T>
    std::vector<T>& data() { return std::get<std::vector<T>>(values); }
    template <typename T>
    const std::vector<T>& data() const { return std::get<std::vector<T>>(values); }

    // Throws InvalidArgument when dims/spacing/buffer length are inconsistent.
    void validate() const;
};

// One z-plane of a Volume, as 32-bit floats regardless of source dtype.
struct Frame {
    int width = 0;
    int height = 0;
    int frame_index = 0;
    std::vector<float> values;

    float at(int x, int y) const { return values[size_t(y) * width + x]; }
    float& at(int x, int y) { return values[size_t(y) * width + x]; }
};

// Unsigned-8-bit volume used for binary masks ({0,1}) and class-label
// stacks ({1..C}); dims and spacing mirror the associated Volume.
struct MaskVolume {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<uint8_t> values;

    size_t voxel_count() const { return size_t(width) * height * depth; }
    size_t index(int x, int y, int z) const { return size_t(z) * height * width + size_t(y) * width + x; }
    uint8_t at(int x, int y, int z) const { return values[index(x, y, z)]; }
    uint8_t& at(int x, int y, int z) { return values[index(x, y, z)]; }

    size_t count(uint8_t v) const;
    bool same_dims(const MaskVolume& o) const {
        return width == o.width && height == o.height && depth == o.depth;
    }

    void validate_alphabet(std::span<const uint8_t> allowed) const;
};

// One z-plane of a MaskVolume.
struct MaskFrame {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> values;

    uint8_t at(int x, int y) const { return values[size_t(y) * width + x]; }
    uint8_t& at(int x, int y) { return values[size_t(y) * width + x]; }
};

// Text header (.vhdr) + little-endian raw voxels (.vraw).
// Header keys: dims, spacing_mm, dtype, data_file, byte_order.
Volume load_volume(const std::filesystem::path& header_path);
void save_volume(const Volume& v, const std::filesystem::path& header_path);

MaskVolume load_mask(const std::filesystem::path& header_path);

// Writes header + raw like save_volume; with pgm_frames also emits one
// P5 image per frame named <stem>_<frame:04>.pgm, labels scaled by 63.
void save_mask(const MaskVolume& m, const std::filesystem::path& header_path,
               bool pgm_frames = false);

Frame slice_frame(const Volume& v, int k);
MaskFrame slice_mask_frame(const MaskVolume& m, int k);

// 8-bit binary P5 writer used for mask frames and overlays.
void save_pgm(const std::filesystem::path& path, int width, int height,
              std::span<const uint8_t> pixels);

}  // namespace vseg
