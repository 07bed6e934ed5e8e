#include "vseg/patchgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "vseg/edt.hpp"
#include "vseg/errors.hpp"
#include "vseg/kvfile.hpp"

namespace vseg {

void PatchSpec::validate() const {
    if (n < 1) throw InvalidArgument("patch size must be >= 1");
    if (s < 1) throw InvalidArgument("patch stride must be >= 1");
}

void RoiBox::validate(int frame_width, int frame_height, const PatchSpec& spec) const {
    spec.validate();
    if (rows < 1 || cols < 1) throw GeometryError("roi box must span at least one pixel");
    const int gap = spec.edge_gap();
    if (row0 < gap || col0 < gap || frame_height - row_end() < gap ||
        frame_width - col_end() < gap)
        throw GeometryError("roi box closer than ceil(n/2) pixels to a frame edge");
}

size_t LabelMap::count(uint8_t cls) const {
    return static_cast<size_t>(std::count(classes.begin(), classes.end(), cls));
}

std::vector<size_t> PatchSet::class_histogram() const {
    std::vector<size_t> h(size_t(num_classes) + 1, 0);
    for (uint8_t l : labels) {
        if (l < h.size()) ++h[l];
    }
    return h;
}

RoiBox compute_roi_box(const MaskVolume& gt, int margin, const PatchSpec& spec,
                       size_t* uncovered) {
    spec.validate();
    if (margin < 0) throw InvalidArgument("margin must be >= 0");

    int rmin = gt.height, rmax = -1, cmin = gt.width, cmax = -1;
    for (int z = 0; z < gt.depth; ++z)
        for (int y = 0; y < gt.height; ++y)
            for (int x = 0; x < gt.width; ++x)
                if (gt.at(x, y, z) != 0) {
                    rmin = std::min(rmin, y);
                    rmax = std::max(rmax, y);
                    cmin = std::min(cmin, x);
                    cmax = std::max(cmax, x);
                }
    if (rmax < 0) throw InvalidArgument("ground truth contains no spine voxel");

    const int gap = spec.edge_gap();
    const int row_lo = gap, row_hi = gt.height - 1 - gap;  // inclusive center range
    const int col_lo = gap, col_hi = gt.width - 1 - gap;
    if (row_lo > row_hi || col_lo > col_hi)
        throw GeometryError("frame too small for patch size " + std::to_string(spec.n));

    auto clamp = [](int v, int lo, int hi) { return std::max(lo, std::min(v, hi)); };
    const int r0 = clamp(rmin - margin, row_lo, row_hi);
    const int r1 = clamp(rmax + margin, row_lo, row_hi);
    const int c0 = clamp(cmin - margin, col_lo, col_hi);
    const int c1 = clamp(cmax + margin, col_lo, col_hi);

    RoiBox box{r0, c0, r1 - r0 + 1, c1 - c0 + 1};
    box.validate(gt.width, gt.height, spec);

    if (uncovered) {
        size_t outside = 0;
        for (int z = 0; z < gt.depth; ++z)
            for (int y = 0; y < gt.height; ++y)
                for (int x = 0; x < gt.width; ++x)
                    if (gt.at(x, y, z) != 0 && !box.contains(y, x)) ++outside;
        *uncovered = outside;
    }
    return box;
}

LabelMap generate_label_map(const MaskFrame& gt_frame, std::span<const int> band_widths) {
    for (int w : band_widths)
        if (w <= 0) throw InvalidArgument("band widths must be > 0");

    const int k = static_cast<int>(band_widths.size());
    LabelMap map;
    map.width = gt_frame.width;
    map.height = gt_frame.height;
    map.num_classes = k + 2;
    map.band_widths.assign(band_widths.begin(), band_widths.end());
    map.classes.assign(size_t(map.width) * map.height, 1);

    const uint8_t spine_class = static_cast<uint8_t>(k + 2);
    bool any_spine = false;
    for (size_t i = 0; i < gt_frame.values.size(); ++i)
        if (gt_frame.values[i] != 0) {
            map.classes[i] = spine_class;
            any_spine = true;
        }
    if (!any_spine || k == 0) return map;  // all background / no bands

    // cumulative thresholds, innermost band first
    std::vector<double> thr2(k);
    int cum = 0;
    for (int j = 0; j < k; ++j) {
        cum += band_widths[j];
        thr2[j] = double(cum) * cum;
    }

    const std::vector<double> d2 =
        squared_distance_field_2d(gt_frame.values, gt_frame.width, gt_frame.height);
    for (size_t i = 0; i < d2.size(); ++i) {
        if (map.classes[i] == spine_class) continue;
        for (int j = 0; j < k; ++j) {
            if (d2[i] <= thr2[j]) {
                map.classes[i] = static_cast<uint8_t>(k + 1 - j);  // inner band -> higher id
                break;
            }
        }
    }
    return map;
}

LabelMap generate_label_map(const MaskFrame& gt_frame, int t1, int t2) {
    const int widths[2] = {t1, t2};
    return generate_label_map(gt_frame, widths);
}

std::pair<int, int> balance_band_widths(const MaskVolume& gt, const RoiBox& box, int lo,
                                        int hi) {
    if (lo < 1 || hi > 64 || lo > hi)
        throw InvalidArgument("band width search range must lie within [1,64]");

    // Count-by-threshold prefix sums: cum[t] = #pixels in box with 0 < d <= t,
    // aggregated over frames. Then class3(t1) = cum[t1], class2(t1,t2) =
    // cum[t1+t2] - cum[t1], class4 = spine count; exact since d^2 and t^2 are
    // both integer-valued here.
    const int tmax = 2 * hi;
    std::vector<size_t> cum(size_t(tmax) + 1, 0);
    size_t spine = 0;
    bool any_spine = false;

    for (int z = 0; z < gt.depth; ++z) {
        const MaskFrame frame = slice_mask_frame(gt, z);
        bool frame_has_spine = false;
        for (uint8_t v : frame.values)
            if (v) {
                frame_has_spine = true;
                break;
            }
        if (frame_has_spine) any_spine = true;

        std::vector<double> d2;
        if (frame_has_spine)
            d2 = squared_distance_field_2d(frame.values, frame.width, frame.height);

        for (int y = box.row0; y < box.row_end(); ++y)
            for (int x = box.col0; x < box.col_end(); ++x) {
                if (frame.at(x, y) != 0) {
                    ++spine;
                    continue;
                }
                if (!frame_has_spine) continue;  // infinite distance, never in a band
                const double dist2 = d2[size_t(y) * frame.width + x];
                for (int t = 1; t <= tmax; ++t) {
                    if (dist2 <= double(t) * t) {
                        ++cum[t];
                        break;  // counted at its smallest covering threshold
                    }
                }
            }
    }
    if (!any_spine) throw InvalidArgument("ground truth contains no spine voxel");

    // make cum a proper prefix sum
    for (int t = 1; t <= tmax; ++t) cum[t] += cum[t - 1];

    const double inf = std::numeric_limits<double>::infinity();
    double best_ratio = inf;
    std::pair<int, int> best{lo, lo};
    bool first = true;
    for (int t1 = lo; t1 <= hi; ++t1)
        for (int t2 = lo; t2 <= hi; ++t2) {
            const size_t c3 = cum[t1];
            const size_t c2 = cum[t1 + t2] - cum[t1];
            const size_t mx = std::max({c2, c3, spine});
            const size_t mn = std::min({c2, c3, spine});
            const double ratio = (mn == 0) ? inf : double(mx) / double(mn);
            bool better = false;
            if (first || ratio < best_ratio) {
                better = true;
            } else if (ratio == best_ratio) {
                const int sum = t1 + t2, best_sum = best.first + best.second;
                if (sum < best_sum || (sum == best_sum && t1 < best.first)) better = true;
            }
            if (better) {
                best_ratio = ratio;
                best = {t1, t2};
                first = false;
            }
        }
    return best;
}

PatchSet extract_patches(const Frame& frame, const LabelMap* label_map, const RoiBox& box,
                         const PatchSpec& spec) {
    box.validate(frame.width, frame.height, spec);
    if (label_map && (label_map->width != frame.width || label_map->height != frame.height))
        throw InvalidArgument("label map dimensions do not match the frame");

    PatchSet ps;
    ps.spec = spec;
    ps.box = box;
    ps.labeled = label_map != nullptr;
    ps.num_classes = label_map ? label_map->num_classes : 0;

    const int ni = (box.rows - 1) / spec.s + 1;
    const int nj = (box.cols - 1) / spec.s + 1;
    const int n = spec.n, half = spec.half();
    ps.centers.reserve(size_t(ni) * nj);
    ps.pixels.reserve(size_t(ni) * nj * n * n);

    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < nj; ++j) {
            const int row = box.row0 + i * spec.s;
            const int col = box.col0 + j * spec.s;
            const int top = row - half, left = col - half;
            if (top < 0 || left < 0 || top + n > frame.height || left + n > frame.width)
                throw GeometryError("patch would leave the frame");
            for (int py = 0; py < n; ++py) {
                const float* src = frame.values.data() + size_t(top + py) * frame.width + left;
                ps.pixels.insert(ps.pixels.end(), src, src + n);
            }
            ps.centers.emplace_back(row, col);
            if (label_map) ps.labels.push_back(label_map->at(col, row));
        }
    return ps;
}

int label_patch_2class(const MaskFrame& gt_frame, int row, int col) {
    if (row < 0 || col < 0 || row >= gt_frame.height || col >= gt_frame.width)
        throw InvalidArgument("patch center outside the frame");
    return gt_frame.at(col, row) != 0 ? 1 : 0;
}

void save_patchset(const PatchSet& ps, const std::filesystem::path& manifest_path) {
    std::filesystem::path pixels_path = manifest_path;
    pixels_path.replace_extension(".pf32");
    std::filesystem::path labels_path = manifest_path;
    labels_path.replace_extension(".plbl");

    KvFile kv;
    kv.set_int("patch_n", ps.spec.n);
    kv.set_int("patch_s", ps.spec.s);
    kv.set("box", std::to_string(ps.box.row0) + " " + std::to_string(ps.box.col0) + " " +
                      std::to_string(ps.box.rows) + " " + std::to_string(ps.box.cols));
    kv.set_int("count", static_cast<long long>(ps.size()));
    kv.set_int("labeled", ps.labeled ? 1 : 0);
    kv.set_int("num_classes", ps.num_classes);
    if (ps.labeled) {
        const auto hist = ps.class_histogram();
        std::string h;
        for (size_t c = 0; c < hist.size(); ++c) {
            h += std::to_string(hist[c]);
            if (c + 1 < hist.size()) h += " ";
        }
        kv.set("class_counts", h);
        kv.set("label_file", labels_path.filename().string());
    }
    kv.set("pixel_file", pixels_path.filename().string());
    kv.save(manifest_path);

    {
        std::ofstream f(pixels_path, std::ios::binary);
        if (!f) throw IoError("cannot write " + pixels_path.string());
        std::ofstream cf(pixels_path.string() + ".centers", std::ios::binary);
        f.write(reinterpret_cast<const char*>(ps.pixels.data()),
                static_cast<std::streamsize>(ps.pixels.size() * sizeof(float)));
        std::vector<int32_t> centers;
        centers.reserve(ps.centers.size() * 2);
        for (auto [r, c] : ps.centers) {
            centers.push_back(r);
            centers.push_back(c);
        }
        cf.write(reinterpret_cast<const char*>(centers.data()),
                 static_cast<std::streamsize>(centers.size() * sizeof(int32_t)));
        if (!f || !cf) throw IoError("write failed: " + pixels_path.string());
    }
    if (ps.labeled) {
        std::ofstream f(labels_path, std::ios::binary);
        if (!f) throw IoError("cannot write " + labels_path.string());
        f.write(reinterpret_cast<const char*>(ps.labels.data()),
                static_cast<std::streamsize>(ps.labels.size()));
        if (!f) throw IoError("write failed: " + labels_path.string());
    }
}

PatchSet load_patchset(const std::filesystem::path& manifest_path) {
    const KvFile kv = KvFile::load(manifest_path);
    PatchSet ps;
    ps.spec.n = static_cast<int>(kv.require_int("patch_n"));
    ps.spec.s = static_cast<int>(kv.require_int("patch_s"));
    const auto b = kv.require_ints("box", 4);
    ps.box = {int(b[0]), int(b[1]), int(b[2]), int(b[3])};
    const size_t count = static_cast<size_t>(kv.require_int("count"));
    ps.labeled = kv.require_int("labeled") != 0;
    ps.num_classes = static_cast<int>(kv.require_int("num_classes"));

    const auto dir = manifest_path.parent_path();
    const auto pixels_path = dir / kv.require("pixel_file");
    {
        std::ifstream f(pixels_path, std::ios::binary);
        if (!f) throw IoError("cannot open " + pixels_path.string());
        ps.pixels.resize(count * size_t(ps.patch_len()));
        f.read(reinterpret_cast<char*>(ps.pixels.data()),
               static_cast<std::streamsize>(ps.pixels.size() * sizeof(float)));
        if (!f) throw FormatError("patch tensor truncated: " + pixels_path.string());
    }
    {
        const auto centers_path = pixels_path.string() + ".centers";
        std::ifstream f(centers_path, std::ios::binary);
        if (!f) throw IoError("cannot open " + centers_path);
        std::vector<int32_t> centers(count * 2);
        f.read(reinterpret_cast<char*>(centers.data()),
               static_cast<std::streamsize>(centers.size() * sizeof(int32_t)));
        if (!f) throw FormatError("center list truncated: " + centers_path);
        ps.centers.reserve(count);
        for (size_t i = 0; i < count; ++i)
            ps.centers.emplace_back(centers[2 * i], centers[2 * i + 1]);
    }
    if (ps.labeled) {
        const auto labels_path = dir / kv.require("label_file");
        std::ifstream f(labels_path, std::ios::binary);
        if (!f) throw IoError("cannot open " + labels_path.string());
        ps.labels.resize(count);
        f.read(reinterpret_cast<char*>(ps.labels.data()),
               static_cast<std::streamsize>(count));
        if (!f) throw FormatError("label array truncated: " + labels_path.string());
    }
    return ps;
}

}  // namespace vseg
