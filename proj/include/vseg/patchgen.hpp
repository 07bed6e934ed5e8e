#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

// Patch geometry: side length n, sliding stride s. The patch center sits at
// offset (n/2, n/2) from the patch top-left, so for n = 32 the center is
// local pixel (16,16).
struct PatchSpec {
    int n = 32;
    int s = 1;

    int half() const { return n / 2; }
    // Minimum gap required between a box edge and the frame edge: ceil(n/2).
    int edge_gap() const { return (n + 1) / 2; }
    void validate() const;
};

// Rectangle of patch-center positions, fully inside the frame with at least
// edge_gap() pixels to every frame edge so extraction needs no padding.
struct RoiBox {
    int row0 = 0;
    int col0 = 0;
    int rows = 0;
    int cols = 0;

    int row_end() const { return row0 + rows; }  // exclusive
    int col_end() const { return col0 + cols; }
    bool contains(int row, int col) const {
        return row >= row0 && row < row_end() && col >= col0 && col < col_end();
    }
    void validate(int frame_width, int frame_height, const PatchSpec& spec) const;
};

// Per-pixel class map over one frame. With k boundary bands the classes are
// 1 = background, 2..k+1 = bands outermost to innermost, k+2 = spine; the
// default k = 2 yields {1 bg, 2 outer band, 3 inner band, 4 spine}.
struct LabelMap {
    int width = 0;
    int height = 0;
    int num_classes = 4;
    std::vector<int> band_widths;  // innermost first, pixel distances
    std::vector<uint8_t> classes;

    uint8_t at(int x, int y) const { return classes[size_t(y) * width + x]; }
    size_t count(uint8_t cls) const;
};

// Labeled n x n patches with their center coordinates.
struct PatchSet {
    PatchSpec spec;
    RoiBox box;
    bool labeled = false;
    int num_classes = 0;                        // 0 when unlabeled
    std::vector<float> pixels;                  // [count][n*n], row-major
    std::vector<std::pair<int, int>> centers;   // (row, col)
    std::vector<uint8_t> labels;                // class ids; empty when unlabeled

    size_t size() const { return centers.size(); }
    int patch_len() const { return spec.n * spec.n; }
    std::span<const float> patch(size_t i) const {
        return {pixels.data() + i * size_t(patch_len()), size_t(patch_len())};
    }
    std::vector<size_t> class_histogram() const;  // indexed by class id
};

// Bounding box of all spine pixels over all frames, expanded by `margin`
// per side, then clamped to the edge-gap invariant. Spine pixels that fall
// outside the clamped box are counted into *uncovered when given.
RoiBox compute_roi_box(const MaskVolume& gt, int margin, const PatchSpec& spec,
                       size_t* uncovered = nullptr);

// Redundant classes by masking: spine keeps its own class, then nested
// distance bands of the given widths, then background. Pixel distance is
// exact Euclidean distance to the nearest spine pixel.
LabelMap generate_label_map(const MaskFrame& gt_frame, std::span<const int> band_widths);
LabelMap generate_label_map(const MaskFrame& gt_frame, int t1, int t2);

// Integer (t1,t2) in [lo,hi]^2 minimizing max/min class-pixel-count over
// classes {2,3,4} inside the box, aggregated over all frames. Ties break to
// smaller t1+t2, then smaller t1.
std::pair<int, int> balance_band_widths(const MaskVolume& gt, const RoiBox& box, int lo, int hi);

// One patch per center (row0 + i*s, col0 + j*s); label read from the map at
// the center when a map is given.
PatchSet extract_patches(const Frame& frame, const LabelMap* label_map, const RoiBox& box,
                         const PatchSpec& spec);

// 1 iff the ground-truth pixel at the center is spine.
int label_patch_2class(const MaskFrame& gt_frame, int row, int col);

// Manifest (.pmf) + raw little-endian f32 patch tensor (.pf32) + u8 labels
// (.plbl).
void save_patchset(const PatchSet& ps, const std::filesystem::path& manifest_path);
PatchSet load_patchset(const std::filesystem::path& manifest_path);

}  // namespace vseg
