// Brute-force reference implementations used only by tests. These stay
// deliberately independent of the library's algorithms: direct definition
// chasing, nested loops, no shared helpers.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "vseg/nn.hpp"
#include "vseg/rng.hpp"
#include "vseg/volume.hpp"

namespace oracle {

// ------------------------------------------------------------- nn layers --

// Same-padding stride-1 convolution by quintuple loop.
template <typename T>
vseg::nn::Tensor<T> conv2d(const vseg::nn::Tensor<T>& in, const vseg::nn::ConvLayer<T>& l) {
    vseg::nn::Tensor<T> out(in.h, in.w, l.out_c);
    const int half = l.k / 2;
    for (int oy = 0; oy < in.h; ++oy)
        for (int ox = 0; ox < in.w; ++ox)
            for (int co = 0; co < l.out_c; ++co) {
                double acc = l.b[co];
                for (int ky = 0; ky < l.k; ++ky)
                    for (int kx = 0; kx < l.k; ++kx)
                        for (int ci = 0; ci < l.in_c; ++ci) {
                            const int iy = oy + ky - half, ix = ox + kx - half;
                            if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                            const T wv =
                                l.w[((size_t(ky) * l.k + kx) * l.in_c + ci) * l.out_c + co];
                            acc += double(in.at(iy, ix, ci)) * double(wv);
                        }
                out.at(oy, ox, co) = T(acc);
            }
    return out;
}

template <typename T>
vseg::nn::Tensor<T> maxpool2(const vseg::nn::Tensor<T>& in) {
    vseg::nn::Tensor<T> out(in.h / 2, in.w / 2, in.c);
    for (int oy = 0; oy < out.h; ++oy)
        for (int ox = 0; ox < out.w; ++ox)
            for (int ch = 0; ch < in.c; ++ch) {
                T best = in.at(2 * oy, 2 * ox, ch);
                for (int py = 0; py < 2; ++py)
                    for (int px = 0; px < 2; ++px)
                        best = std::max(best, in.at(2 * oy + py, 2 * ox + px, ch));
                out.at(oy, ox, ch) = best;
            }
    return out;
}

template <typename T>
std::vector<T> dense(const std::vector<T>& x, const vseg::nn::DenseLayer<T>& l) {
    std::vector<T> y(l.out_n);
    for (int o = 0; o < l.out_n; ++o) {
        double acc = l.b[o];
        for (int i = 0; i < l.in_n; ++i) acc += double(x[i]) * double(l.w[size_t(i) * l.out_n + o]);
        y[o] = T(acc);
    }
    return y;
}

// ------------------------------------------------------------------- edt --

// O(N * n_sites) squared distances, physical spacing.
inline std::vector<double> squared_edt(const std::vector<uint8_t>& sites, int w, int h, int d,
                                       const std::array<double, 3>& sp) {
    std::vector<std::array<int, 3>> coords;
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (sites[(size_t(z) * h + y) * w + x]) coords.push_back({x, y, z});
    std::vector<double> out(size_t(w) * h * d, std::numeric_limits<double>::infinity());
    for (int z = 0; z < d; ++z)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double best = std::numeric_limits<double>::infinity();
                for (const auto& c : coords) {
                    const double dx = (x - c[0]) * sp[0];
                    const double dy = (y - c[1]) * sp[1];
                    const double dz = (z - c[2]) * sp[2];
                    best = std::min(best, dx * dx + dy * dy + dz * dz);
                }
                out[(size_t(z) * h + y) * w + x] = best;
            }
    return out;
}

// --------------------------------------------------------------- metrics --

struct SetCounts {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    double n() const { return tp + fp + tn + fn; }
    double s() const { return tp + fp; }
    double gt() const { return tp + fn; }
};

inline SetCounts count_sets(const vseg::MaskVolume& s, const vseg::MaskVolume& gt) {
    SetCounts c;
    for (size_t i = 0; i < s.values.size(); ++i) {
        const bool a = s.values[i] != 0, b = gt.values[i] != 0;
        if (a && b) c.tp += 1;
        if (a && !b) c.fp += 1;
        if (!a && b) c.fn += 1;
        if (!a && !b) c.tn += 1;
    }
    return c;
}

inline double dice(const SetCounts& c) { return 2 * c.tp / (c.s() + c.gt()); }
inline double jaccard(const SetCounts& c) { return c.tp / (c.tp + c.fp + c.fn); }
inline double vs(const SetCounts& c) { return 1.0 - std::abs(c.s() - c.gt()) / (c.s() + c.gt()); }
inline double sensitivity(const SetCounts& c) { return c.tp / (c.tp + c.fn); }
inline double specificity(const SetCounts& c) { return c.tn / (c.tn + c.fp); }
inline double os_pct(const SetCounts& c) { return 200.0 * c.fp / (c.s() + c.gt()); }
inline double us_pct(const SetCounts& c) { return 200.0 * c.fn / (c.s() + c.gt()); }
inline double accuracy_pct(const SetCounts& c) { return 100.0 * (c.tp + c.tn) / c.n(); }
inline double mcc(const SetCounts& c) {
    return (c.tp * c.tn - c.fp * c.fn) /
           std::sqrt((c.tp + c.fn) * (c.tp + c.fp) * (c.tn + c.fp) * (c.tn + c.fn));
}

// Independent surface definition: foreground with a 6-neighbor that is
// background or out of bounds.
inline std::vector<std::array<int, 3>> surface_coords(const vseg::MaskVolume& m) {
    auto fg = [&](int x, int y, int z) {
        if (x < 0 || y < 0 || z < 0 || x >= m.width || y >= m.height || z >= m.depth)
            return false;
        return m.values[(size_t(z) * m.height + y) * m.width + x] != 0;
    };
    std::vector<std::array<int, 3>> out;
    for (int z = 0; z < m.depth; ++z)
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                if (!fg(x, y, z)) continue;
                if (!fg(x - 1, y, z) || !fg(x + 1, y, z) || !fg(x, y - 1, z) ||
                    !fg(x, y + 1, z) || !fg(x, y, z - 1) || !fg(x, y, z + 1))
                    out.push_back({x, y, z});
            }
    return out;
}

inline double min_dist(const std::array<int, 3>& a,
                       const std::vector<std::array<int, 3>>& set,
                       const std::array<double, 3>& sp) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : set) {
        const double dx = (a[0] - b[0]) * sp[0];
        const double dy = (a[1] - b[1]) * sp[1];
        const double dz = (a[2] - b[2]) * sp[2];
        best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return best;
}

inline double msd(const vseg::MaskVolume& s, const vseg::MaskVolume& gt,
                  const std::array<double, 3>& sp) {
    const auto ss = surface_coords(s), gs = surface_coords(gt);
    double sum = 0;
    for (const auto& a : ss) sum += min_dist(a, gs, sp);
    return sum / double(ss.size());
}

inline double hausdorff(const vseg::MaskVolume& s, const vseg::MaskVolume& gt,
                        const std::array<double, 3>& sp) {
    const auto ss = surface_coords(s), gs = surface_coords(gt);
    double h1 = 0, h2 = 0;
    for (const auto& a : ss) h1 = std::max(h1, min_dist(a, gs, sp));
    for (const auto& b : gs) h2 = std::max(h2, min_dist(b, ss, sp));
    return std::max(h1, h2);
}

// Literal per-voxel region computation of the global consistency error.
inline double gce(const vseg::MaskVolume& s, const vseg::MaskVolume& gt) {
    const size_t n = s.values.size();
    auto sum_direction = [&](const vseg::MaskVolume& a, const vseg::MaskVolume& b) {
        double total = 0;
        for (size_t x = 0; x < n; ++x) {
            const bool ax = a.values[x] != 0;
            const bool bx = b.values[x] != 0;
            double region = 0, diff = 0;
            for (size_t y = 0; y < n; ++y) {
                const bool ay = a.values[y] != 0;
                if (ay != ax) continue;
                region += 1;
                const bool by = b.values[y] != 0;
                if (by != bx) diff += 1;  // in R(a,x) but not in R(b,x)
            }
            total += diff / region;
        }
        return total;
    };
    return std::min(sum_direction(s, gt), sum_direction(gt, s)) / double(n);
}

// ------------------------------------------------------------ generators --

inline vseg::MaskVolume random_mask(vseg::Rng& rng, int w, int h, int d,
                                    const std::array<double, 3>& sp, double density,
                                    bool force_nondegenerate = true) {
    vseg::MaskVolume m;
    m.width = w;
    m.height = h;
    m.depth = d;
    m.spacing = sp;
    m.values.resize(size_t(w) * h * d);
    for (auto& v : m.values) v = rng.uniform() < density ? 1 : 0;
    if (force_nondegenerate && m.values.size() >= 2) {
        bool any1 = false, any0 = false;
        for (auto v : m.values) (v ? any1 : any0) = true;
        if (!any1) m.values.front() = 1;
        if (!any0) m.values.back() = 0;
    }
    return m;
}

}  // namespace oracle
