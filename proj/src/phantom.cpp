#include "vseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vseg/edt.hpp"
#include "vseg/errors.hpp"
#include "vseg/kvfile.hpp"
#include "vseg/rng.hpp"

namespace vseg {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void PhantomConfig::validate() const {
    if (width < 1 || height < 1 || frames < 1) throw InvalidArgument("phantom dims must be >= 1");
    for (double s : spacing)
        if (!(s > 0.0)) throw InvalidArgument("phantom spacing must be > 0");
    if (!(spine_rx_min > 0 && spine_rx_max >= spine_rx_min && spine_ry_min > 0 &&
          spine_ry_max >= spine_ry_min))
        throw InvalidArgument("phantom spine radii ranges are invalid");
    if (lobe_count < 0 || rib_count < 0) throw InvalidArgument("phantom counts must be >= 0");
    if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
    if (edge_margin < 0) throw InvalidArgument("edge margin must be >= 0");
    if (center_jitter < 0 || drift_span < 0)
        throw InvalidArgument("center jitter and drift span must be >= 0");

    // Largest spine reach from its center: ellipse extent plus a full lobe.
    const double reach = std::max(spine_rx_max, spine_ry_max) + 2.0 * lobe_radius_max;
    const double bound = edge_margin + reach;
    if (2.0 * (bound + center_jitter + drift_span) + 1.0 > std::min(width, height))
        throw InvalidArgument("frame too small for the spine geometry and edge margin");
}

Phantom generate_phantom(const PhantomConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    const int w = cfg.width, h = cfg.height, d = cfg.frames;
    const size_t frame_len = size_t(w) * h;

    Phantom ph;
    ph.volume.width = w;
    ph.volume.height = h;
    ph.volume.depth = d;
    ph.volume.spacing = cfg.spacing;
    ph.volume.values = std::vector<float>(frame_len * d, 0.0f);
    auto& vox = ph.volume.data<float>();
    for (MaskVolume* m : {&ph.gt, &ph.rib}) {
        m->width = w;
        m->height = h;
        m->depth = d;
        m->spacing = cfg.spacing;
        m->values.assign(frame_len * d, 0);
    }

    // subject-level geometry: the cross section sits near the frame center
    // with a bounded subject offset, and its per-frame walk stays within
    // drift_span of where it started
    const double rx = cfg.spine_rx_min + rng.uniform() * (cfg.spine_rx_max - cfg.spine_rx_min);
    const double ry = cfg.spine_ry_min + rng.uniform() * (cfg.spine_ry_max - cfg.spine_ry_min);
    const double reach = std::max(rx, ry) + 2.0 * cfg.lobe_radius_max;

    double cx = (w - 1) / 2.0 + (rng.uniform() * 2.0 - 1.0) * cfg.center_jitter;
    double cy = (h - 1) / 2.0 + (rng.uniform() * 2.0 - 1.0) * cfg.center_jitter;
    auto walk_bounds = [&](double start, int size) {
        const double safe_lo = cfg.edge_margin + reach;
        const double safe_hi = size - 1 - cfg.edge_margin - reach;
        return std::pair<double, double>{std::max(safe_lo, start - cfg.drift_span),
                                         std::min(safe_hi, start + cfg.drift_span)};
    };
    const auto [lo_x, hi_x] = walk_bounds(cx, w);
    const auto [lo_y, hi_y] = walk_bounds(cy, h);

    std::vector<double> lobe_angle(cfg.lobe_count), lobe_r(cfg.lobe_count);
    for (int j = 0; j < cfg.lobe_count; ++j) {
        lobe_angle[j] = rng.uniform() * 2.0 * kPi;
        lobe_r[j] =
            cfg.lobe_radius_min + rng.uniform() * (cfg.lobe_radius_max - cfg.lobe_radius_min);
    }

    // background texture blobs, fixed per subject
    std::vector<std::array<double, 3>> blobs;  // x, y, amplitude
    for (int b = 0; b < cfg.texture_blobs; ++b)
        blobs.push_back({rng.uniform() * w, rng.uniform() * h,
                         (0.5 + rng.uniform()) * cfg.texture_amp});

    std::vector<uint8_t> spine(frame_len), rib(frame_len);
    for (int z = 0; z < d; ++z) {
        // drift the center, keeping the edge margin
        cx = std::clamp(cx + (rng.uniform() * 2.0 - 1.0) * cfg.drift_per_frame, lo_x, hi_x);
        cy = std::clamp(cy + (rng.uniform() * 2.0 - 1.0) * cfg.drift_per_frame, lo_y, hi_y);
        for (int j = 0; j < cfg.lobe_count; ++j)
            lobe_angle[j] += (rng.uniform() * 2.0 - 1.0) * 0.06;

        // rasterize the spine: ellipse plus boundary lobes
        std::fill(spine.begin(), spine.end(), 0);
        std::vector<std::array<double, 3>> lobes;  // x, y, radius
        for (int j = 0; j < cfg.lobe_count; ++j)
            lobes.push_back({cx + rx * std::cos(lobe_angle[j]),
                             cy + ry * std::sin(lobe_angle[j]), lobe_r[j]});
        const int x0 = int(std::floor(cx - reach)), x1 = int(std::ceil(cx + reach));
        const int y0 = int(std::floor(cy - reach)), y1 = int(std::ceil(cy + reach));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double ex = (x - cx) / rx, ey = (y - cy) / ry;
                bool inside = ex * ex + ey * ey <= 1.0;
                for (size_t j = 0; !inside && j < lobes.size(); ++j) {
                    const double dx = x - lobes[j][0], dy = y - lobes[j][1];
                    inside = dx * dx + dy * dy <= lobes[j][2] * lobes[j][2];
                }
                if (inside) spine[size_t(y) * w + x] = 1;
            }

        // rib arcs: annulus segments around the spine center, kept at least
        // rib_clearance away from the spine itself
        std::fill(rib.begin(), rib.end(), 0);
        if (cfg.rib_count > 0) {
            const std::vector<double> d2 = squared_distance_field_2d(spine, w, h);
            const double clearance2 = cfg.rib_clearance * cfg.rib_clearance;
            for (int a = 0; a < cfg.rib_count; ++a) {
                // lateral placement: arcs centered near +/-90 degrees
                const double side = (a % 2 == 0) ? 0.0 : kPi;
                const double mid = side + (rng.uniform() * 2.0 - 1.0) * (kPi / 4.0);
                const double span = cfg.rib_arc_deg * kPi / 180.0;
                const double radius =
                    std::max(rx, ry) + cfg.rib_clearance + cfg.rib_thickness / 2.0 + 1.0 +
                    rng.uniform() * (2.0 + 2.0 * a);
                const double half_th = cfg.rib_thickness / 2.0;
                const int bx0 = std::max(0, int(cx - radius - half_th - 1));
                const int bx1 = std::min(w - 1, int(cx + radius + half_th + 1));
                const int by0 = std::max(0, int(cy - radius - half_th - 1));
                const int by1 = std::min(h - 1, int(cy + radius + half_th + 1));
                for (int y = by0; y <= by1; ++y)
                    for (int x = bx0; x <= bx1; ++x) {
                        const double dx = x - cx, dy = y - cy;
                        const double r = std::sqrt(dx * dx + dy * dy);
                        if (std::abs(r - radius) > half_th) continue;
                        double ang = std::atan2(dy, dx) - mid;
                        while (ang > kPi) ang -= 2.0 * kPi;
                        while (ang < -kPi) ang += 2.0 * kPi;
                        if (std::abs(ang) > span / 2.0) continue;
                        const size_t at = size_t(y) * w + x;
                        if (d2[at] < clearance2) continue;  // keep disjoint from spine
                        rib[at] = 1;
                    }
            }
        }

        // intensities; noise drawn in fixed scan order
        float* frame_vox = vox.data() + size_t(z) * frame_len;
        uint8_t* frame_gt = ph.gt.values.data() + size_t(z) * frame_len;
        uint8_t* frame_rib = ph.rib.values.data() + size_t(z) * frame_len;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t at = size_t(y) * w + x;
                double base;
                if (spine[at] || rib[at]) {
                    base = cfg.spine_mean;
                } else {
                    base = cfg.background_mean;
                    for (const auto& b : blobs) {
                        const double dx = x - b[0], dy = y - b[1];
                        base += b[2] * std::exp(-(dx * dx + dy * dy) /
                                                (2.0 * cfg.texture_sigma * cfg.texture_sigma));
                    }
                }
                frame_vox[at] = float(base + rng.normal() * cfg.noise_sigma);
                frame_gt[at] = spine[at];
                frame_rib[at] = rib[at];
            }
    }
    return ph;
}

std::vector<const BenchmarkManifest::Subject*> BenchmarkManifest::train_subjects() const {
    std::vector<const Subject*> out;
    for (const auto& s : subjects)
        if (s.train) out.push_back(&s);
    return out;
}

std::vector<const BenchmarkManifest::Subject*> BenchmarkManifest::test_subjects() const {
    std::vector<const Subject*> out;
    for (const auto& s : subjects)
        if (!s.train) out.push_back(&s);
    return out;
}

BenchmarkManifest make_benchmark(const PhantomConfig& cfg, int n_subjects,
                                 const std::filesystem::path& out_dir) {
    if (n_subjects < 2) throw InvalidArgument("benchmark needs at least 2 subjects");
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    const int n_test = std::max(1, n_subjects / 4);
    BenchmarkManifest m;
    m.frames = cfg.frames;
    m.width = cfg.width;
    m.height = cfg.height;
    m.spacing = cfg.spacing;

    for (int k = 0; k < n_subjects; ++k) {
        PhantomConfig sub_cfg = cfg;
        sub_cfg.seed = derive_seed(cfg.seed, uint64_t(k));
        const Phantom ph = generate_phantom(sub_cfg);

        char stem[32];
        std::snprintf(stem, sizeof stem, "subj%02d", k);
        BenchmarkManifest::Subject s;
        s.index = k;
        s.train = k < n_subjects - n_test;
        s.seed = sub_cfg.seed;
        s.volume_path = std::string(stem) + "_vol.vhdr";
        s.gt_path = std::string(stem) + "_gt.vhdr";
        s.rib_path = std::string(stem) + "_rib.vhdr";
        save_volume(ph.volume, out_dir / s.volume_path);
        save_mask(ph.gt, out_dir / s.gt_path);
        save_mask(ph.rib, out_dir / s.rib_path);
        m.subjects.push_back(std::move(s));
    }
    save_manifest(m, out_dir / "benchmark.txt");
    return m;
}

void save_manifest(const BenchmarkManifest& m, const std::filesystem::path& path) {
    KvFile kv;
    kv.set_int("subjects", static_cast<long long>(m.subjects.size()));
    kv.set_int("frames", m.frames);
    kv.set("dims", std::to_string(m.width) + " " + std::to_string(m.height));
    {
        std::string s;
        for (int i = 0; i < 3; ++i) {
            KvFile tmp;
            tmp.set_double("x", m.spacing[i]);
            s += tmp.require("x");
            if (i < 2) s += " ";
        }
        kv.set("spacing_mm", s);
    }
    for (const auto& s : m.subjects) {
        kv.set("subject_" + std::to_string(s.index),
               std::string(s.train ? "train" : "test") + " " + std::to_string(s.seed) + " " +
                   s.volume_path + " " + s.gt_path + " " + s.rib_path);
    }
    kv.save(path);
}

BenchmarkManifest load_manifest(const std::filesystem::path& path) {
    const KvFile kv = KvFile::load(path);
    BenchmarkManifest m;
    const int n = static_cast<int>(kv.require_int("subjects"));
    m.frames = static_cast<int>(kv.require_int("frames"));
    const auto dims = kv.require_ints("dims", 2);
    m.width = static_cast<int>(dims[0]);
    m.height = static_cast<int>(dims[1]);
    const auto sp = kv.require_doubles("spacing_mm", 3);
    m.spacing = {sp[0], sp[1], sp[2]};
    for (int k = 0; k < n; ++k) {
        std::istringstream ss(kv.require("subject_" + std::to_string(k)));
        BenchmarkManifest::Subject s;
        s.index = k;
        std::string role;
        ss >> role >> s.seed >> s.volume_path >> s.gt_path >> s.rib_path;
        if (!ss || (role != "train" && role != "test"))
            throw FormatError("bad subject line in manifest " + path.string());
        s.train = role == "train";
        m.subjects.push_back(std::move(s));
    }
    return m;
}

}  // namespace vseg
