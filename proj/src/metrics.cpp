#include "vseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vseg/edt.hpp"
#include "vseg/errors.hpp"

namespace vseg {

namespace {

void check_binary_pair(const MaskVolume& s, const MaskVolume& gt) {
    if (!s.same_dims(gt)) throw InvalidArgument("mask dimensions differ");
    static constexpr uint8_t binary[] = {0, 1};
    s.validate_alphabet(binary);
    gt.validate_alphabet(binary);
}

void set_flag(bool* flagged) {
    if (flagged) *flagged = true;
}

}  // namespace

ConfusionMatrix confusion(const MaskVolume& s, const MaskVolume& gt) {
    check_binary_pair(s, gt);
    ConfusionMatrix cm;
    const size_t n = s.voxel_count();
    for (size_t i = 0; i < n; ++i) {
        const bool in_s = s.values[i] != 0;
        const bool in_gt = gt.values[i] != 0;
        if (in_s && in_gt)
            ++cm.tp;
        else if (in_s && !in_gt)
            ++cm.fp;
        else if (!in_s && in_gt)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

// DC = 2|S n GT| / (|S| + |GT|)
double dice(const ConfusionMatrix& cm, bool* flagged) {
    const double denom = double(2 * cm.tp + cm.fp + cm.fn);
    if (denom == 0.0) {
        set_flag(flagged);
        return 1.0;
    }
    return 2.0 * double(cm.tp) / denom;
}

// J = |S n GT| / |S u GT|
double jaccard(const ConfusionMatrix& cm, bool* flagged) {
    const double denom = double(cm.tp + cm.fp + cm.fn);
    if (denom == 0.0) {
        set_flag(flagged);
        return 1.0;
    }
    return double(cm.tp) / denom;
}

// VS = 1 - | |S| - |GT| | / (|S| + |GT|)
double volumetric_similarity(const ConfusionMatrix& cm, bool* flagged) {
    const double denom = double(2 * cm.tp + cm.fp + cm.fn);
    if (denom == 0.0) {
        set_flag(flagged);
        return 1.0;
    }
    const double diff = double(cm.fp > cm.fn ? cm.fp - cm.fn : cm.fn - cm.fp);
    return 1.0 - diff / denom;
}

double sensitivity(const ConfusionMatrix& cm, bool* flagged) {
    const double denom = double(cm.tp + cm.fn);
    if (denom == 0.0) {
        set_flag(flagged);
        return 0.0;
    }
    return double(cm.tp) / denom;
}

double specificity(const ConfusionMatrix& cm, bool* flagged) {
    const double denom = double(cm.tn + cm.fp);
    if (denom == 0.0) {
        set_flag(flagged);
        return 0.0;
    }
    return double(cm.tn) / denom;
}

// OS = 2|S n GT~| / (|S| + |GT|) * 100, US likewise with S~ n GT.
std::pair<double, double> over_under_segmentation(const ConfusionMatrix& cm, bool* flagged) {
    const double denom = double(2 * cm.tp + cm.fp + cm.fn);
    if (denom == 0.0) {
        set_flag(flagged);
        return {0.0, 0.0};
    }
    return {200.0 * double(cm.fp) / denom, 200.0 * double(cm.fn) / denom};
}

double accuracy(const ConfusionMatrix& cm) {
    const double n = double(cm.total());
    if (n == 0.0) throw InvalidArgument("accuracy of an empty volume");
    return 100.0 * double(cm.tp + cm.tn) / n;
}

double mcc(const ConfusionMatrix& cm, bool* flagged) {
    const double a = double(cm.tp + cm.fn);
    const double b = double(cm.tp + cm.fp);
    const double c = double(cm.tn + cm.fp);
    const double d = double(cm.tn + cm.fn);
    if (a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0) {
        set_flag(flagged);
        return 0.0;
    }
    const double num = double(cm.tp) * double(cm.tn) - double(cm.fp) * double(cm.fn);
    return num / std::sqrt(a * b * c * d);
}

MaskVolume surface_extract(const MaskVolume& mask) {
    MaskVolume out;
    out.width = mask.width;
    out.height = mask.height;
    out.depth = mask.depth;
    out.spacing = mask.spacing;
    out.values.assign(mask.voxel_count(), 0);

    auto bg_or_outside = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= mask.width || y >= mask.height || z >= mask.depth)
            return true;
        return mask.at(x, y, z) == 0;
    };
    for (int z = 0; z < mask.depth; ++z)
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x) {
                if (mask.at(x, y, z) == 0) continue;
                if (bg_or_outside(x - 1, y, z) || bg_or_outside(x + 1, y, z) ||
                    bg_or_outside(x, y - 1, z) || bg_or_outside(x, y + 1, z) ||
                    bg_or_outside(x, y, z - 1) || bg_or_outside(x, y, z + 1))
                    out.at(x, y, z) = 1;
            }
    return out;
}

DistanceField distance_transform(const MaskVolume& mask, const std::array<double, 3>& spacing) {
    const MaskVolume surf = surface_extract(mask);
    if (surf.count(1) == 0) throw InvalidArgument("distance transform of a mask with no surface");

    DistanceField field;
    field.width = mask.width;
    field.height = mask.height;
    field.depth = mask.depth;
    field.spacing = spacing;
    field.mm = squared_distance_field(surf.values, mask.width, mask.height, mask.depth, spacing);
    for (double& v : field.mm) v = std::sqrt(v);
    return field;
}

namespace {

// Sum of the GT-surface distance field over S's surface voxels.
std::pair<double, size_t> directed_surface_sum(const MaskVolume& s_surface,
                                               const DistanceField& to_gt) {
    double sum = 0.0;
    size_t count = 0;
    const size_t n = s_surface.voxel_count();
    for (size_t i = 0; i < n; ++i) {
        if (s_surface.values[i]) {
            sum += to_gt.mm[i];
            ++count;
        }
    }
    return {sum, count};
}

double directed_surface_max(const MaskVolume& s_surface, const DistanceField& to_gt) {
    double best = 0.0;
    const size_t n = s_surface.voxel_count();
    for (size_t i = 0; i < n; ++i)
        if (s_surface.values[i]) best = std::max(best, to_gt.mm[i]);
    return best;
}

}  // namespace

double mean_surface_distance(const MaskVolume& s, const MaskVolume& gt,
                             const std::array<double, 3>& spacing) {
    check_binary_pair(s, gt);
    const MaskVolume s_surf = surface_extract(s);
    if (s_surf.count(1) == 0) throw InvalidArgument("mean surface distance: S has no surface");
    const DistanceField d_gt = distance_transform(gt, spacing);
    auto [sum, count] = directed_surface_sum(s_surf, d_gt);
    return sum / double(count);
}

double mean_surface_distance_symmetric(const MaskVolume& s, const MaskVolume& gt,
                                       const std::array<double, 3>& spacing) {
    return 0.5 * (mean_surface_distance(s, gt, spacing) + mean_surface_distance(gt, s, spacing));
}

double hausdorff(const MaskVolume& s, const MaskVolume& gt,
                 const std::array<double, 3>& spacing) {
    check_binary_pair(s, gt);
    const MaskVolume s_surf = surface_extract(s);
    const MaskVolume gt_surf = surface_extract(gt);
    if (s_surf.count(1) == 0 || gt_surf.count(1) == 0)
        throw InvalidArgument("hausdorff: empty surface");
    const DistanceField d_gt = distance_transform(gt, spacing);
    const DistanceField d_s = distance_transform(s, spacing);
    return std::max(directed_surface_max(s_surf, d_gt), directed_surface_max(gt_surf, d_s));
}

double gce(const MaskVolume& s, const MaskVolume& gt) {
    check_binary_pair(s, gt);
    const ConfusionMatrix cm = confusion(s, gt);
    const double n = double(cm.total());
    if (n == 0.0) throw InvalidArgument("gce of an empty volume");

    // Summing E over voxels collapses to closed form per confusion cell;
    // a cell with an empty region contributes no voxels (0/0 -> 0).
    auto ratio = [](uint64_t num_product_a, uint64_t num_product_b, uint64_t denom) {
        if (denom == 0) return 0.0;
        return 2.0 * double(num_product_a) * double(num_product_b) / double(denom);
    };
    const double e_s_gt = ratio(cm.tp, cm.fp, cm.tp + cm.fp) + ratio(cm.tn, cm.fn, cm.tn + cm.fn);
    const double e_gt_s = ratio(cm.tp, cm.fn, cm.tp + cm.fn) + ratio(cm.tn, cm.fp, cm.tn + cm.fp);
    return std::min(e_s_gt, e_gt_s) / n;
}

MetricReport evaluate_all(const MaskVolume& s, const MaskVolume& gt,
                          const std::array<double, 3>& spacing) {
    check_binary_pair(s, gt);
    MetricReport r;
    r.cm = confusion(s, gt);

    auto note = [&](bool f, const char* name) {
        if (f) r.convention_flags.push_back(name);
    };
    bool f;
    f = false, r.dc = dice(r.cm, &f), note(f, "dc:empty-masks->1");
    f = false, r.jaccard = jaccard(r.cm, &f), note(f, "jaccard:empty-union->1");
    f = false, r.vs = volumetric_similarity(r.cm, &f), note(f, "vs:empty-masks->1");
    f = false, r.sensitivity = sensitivity(r.cm, &f), note(f, "sensitivity:no-positives->0");
    f = false, r.specificity = specificity(r.cm, &f), note(f, "specificity:no-negatives->0");
    f = false;
    std::tie(r.os_pct, r.us_pct) = over_under_segmentation(r.cm, &f);
    note(f, "os-us:empty-masks->0");
    r.accuracy_pct = accuracy(r.cm);
    f = false, r.mcc = mcc(r.cm, &f), note(f, "mcc:degenerate->0");

    r.msd_mm = mean_surface_distance(s, gt, spacing);
    r.msd_sym_mm = mean_surface_distance_symmetric(s, gt, spacing);
    r.hd_mm = hausdorff(s, gt, spacing);
    r.gce = gce(s, gt);
    return r;
}

const std::array<const char*, 12> kMetricNames = {
    "DC",     "Jaccard", "VS",  "Sens", "Spec", "OS",
    "US",     "Acc",     "MCC", "MSD",  "HD",   "GCE",
};

std::array<double, 12> metric_values(const MetricReport& r) {
    return {r.dc,     r.jaccard, r.vs,  r.sensitivity, r.specificity, r.os_pct,
            r.us_pct, r.accuracy_pct, r.mcc, r.msd_mm,      r.hd_mm,       r.gce};
}

MetricSummary summarize(std::span<const MetricReport> reports) {
    MetricSummary s;
    s.count = reports.size();
    if (reports.empty()) return s;
    for (const auto& r : reports) {
        const auto v = metric_values(r);
        for (size_t i = 0; i < v.size(); ++i) s.mean[i] += v[i];
    }
    for (double& m : s.mean) m /= double(reports.size());
    if (reports.size() > 1) {
        for (const auto& r : reports) {
            const auto v = metric_values(r);
            for (size_t i = 0; i < v.size(); ++i) {
                const double d = v[i] - s.mean[i];
                s.sd[i] += d * d;
            }
        }
        for (double& v : s.sd) v = std::sqrt(v / double(reports.size() - 1));
    }
    return s;
}

std::string report_table(std::span<const std::string> ids,
                         std::span<const MetricReport> reports) {
    std::ostringstream out;
    char buf[64];
    out << "volume      ";
    for (const char* name : kMetricNames) {
        std::snprintf(buf, sizeof buf, "%10s", name);
        out << buf;
    }
    out << "\n";
    auto row = [&](const std::string& id, const std::array<double, 12>& vals) {
        std::snprintf(buf, sizeof buf, "%-12s", id.c_str());
        out << buf;
        for (double v : vals) {
            std::snprintf(buf, sizeof buf, "%10.4f", v);
            out << buf;
        }
        out << "\n";
    };
    for (size_t i = 0; i < reports.size(); ++i) row(ids[i], metric_values(reports[i]));
    if (reports.size() > 1) {
        const MetricSummary s = summarize(reports);
        row("mean", s.mean);
        row("sd", s.sd);
    }
    return out.str();
}

std::string report_csv(std::span<const std::string> ids,
                       std::span<const MetricReport> reports) {
    std::ostringstream out;
    out << "volume";
    for (const char* name : kMetricNames) out << "," << name;
    out << "\n";
    out.precision(9);
    for (size_t i = 0; i < reports.size(); ++i) {
        out << ids[i];
        for (double v : metric_values(reports[i])) out << "," << v;
        out << "\n";
    }
    return out.str();
}

}  // namespace vseg
