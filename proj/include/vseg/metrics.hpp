#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vseg/volume.hpp"

namespace vseg {

// Voxelwise counts comparing a segmentation S against a gold standard GT.
struct ConfusionMatrix {
    uint64_t tp = 0;  // spine in both
    uint64_t fp = 0;  // spine in S only
    uint64_t tn = 0;  // background in both
    uint64_t fn = 0;  // spine in GT only
    uint64_t total() const { return tp + fp + tn + fn; }
};

ConfusionMatrix confusion(const MaskVolume& s, const MaskVolume& gt);

// Degenerate inputs (empty masks, zero denominators) are mapped to the fixed
// conventions below instead of NaN; when that happens and `flagged` is
// non-null it is set to true.
double dice(const ConfusionMatrix& cm, bool* flagged = nullptr);                   // empty/empty -> 1
double jaccard(const ConfusionMatrix& cm, bool* flagged = nullptr);                // empty union -> 1
double volumetric_similarity(const ConfusionMatrix& cm, bool* flagged = nullptr);  // empty/empty -> 1
double sensitivity(const ConfusionMatrix& cm, bool* flagged = nullptr);            // no positives -> 0
double specificity(const ConfusionMatrix& cm, bool* flagged = nullptr);            // no negatives -> 0
std::pair<double, double> over_under_segmentation(const ConfusionMatrix& cm,
                                                  bool* flagged = nullptr);  // -> (0,0)
double accuracy(const ConfusionMatrix& cm);  // percentage in [0,100]
double mcc(const ConfusionMatrix& cm, bool* flagged = nullptr);  // zero denominator -> 0

// Per-voxel Euclidean distance in millimeters to the nearest surface voxel
// of a mask; zero on the surface voxels themselves, positive both inside
// and outside.
struct DistanceField {
    int width = 0, height = 0, depth = 0;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<double> mm;

    double at(int x, int y, int z) const {
        return mm[size_t(z) * height * width + size_t(y) * width + x];
    }
};

// Foreground voxels with at least one 6-connected neighbor that is
// background or outside the volume.
MaskVolume surface_extract(const MaskVolume& mask);

// Exact (non-chamfer) spacing-aware transform; throws InvalidArgument when
// the mask has no surface voxel.
DistanceField distance_transform(const MaskVolume& mask, const std::array<double, 3>& spacing);

// Directional mean over S's surface voxels of the distance to GT's surface.
double mean_surface_distance(const MaskVolume& s, const MaskVolume& gt,
                             const std::array<double, 3>& spacing);
// Average of the two directional means.
double mean_surface_distance_symmetric(const MaskVolume& s, const MaskVolume& gt,
                                       const std::array<double, 3>& spacing);

// max(h(S,GT), h(GT,S)) over surface voxel sets, h the directed max-min.
double hausdorff(const MaskVolume& s, const MaskVolume& gt, const std::array<double, 3>& spacing);

// Global consistency error with local refinement error
// E(A,B,x) = |R(A,x)\R(B,x)| / |R(A,x)|, minimized over both directions.
double gce(const MaskVolume& s, const MaskVolume& gt);

struct MetricReport {
    double dc = 0, jaccard = 0, vs = 0;
    double sensitivity = 0, specificity = 0;
    double os_pct = 0, us_pct = 0, accuracy_pct = 0, mcc = 0;
    double msd_mm = 0;      // directional S->GT
    double msd_sym_mm = 0;  // symmetric average, reported alongside
    double hd_mm = 0, gce = 0;
    ConfusionMatrix cm;
    std::vector<std::string> convention_flags;
};

MetricReport evaluate_all(const MaskVolume& s, const MaskVolume& gt,
                          const std::array<double, 3>& spacing);

// Mean / sample-SD aggregation across volumes plus text emitters.
struct MetricSummary {
    std::array<double, 12> mean{};
    std::array<double, 12> sd{};
    size_t count = 0;
};

std::array<double, 12> metric_values(const MetricReport& r);  // fixed column order
extern const std::array<const char*, 12> kMetricNames;

MetricSummary summarize(std::span<const MetricReport> reports);
std::string report_table(std::span<const std::string> ids, std::span<const MetricReport> reports);
std::string report_csv(std::span<const std::string> ids, std::span<const MetricReport> reports);

}  // namespace vseg
