#include "vseg/edt.hpp"

#include <algorithm>

#include "vseg/errors.hpp"

namespace vseg {

namespace {

// 1D squared-distance transform along a line of n samples spaced h apart.
// f holds incoming squared distances (parabola heights, possibly +inf);
// d receives d[i] = min_j ((i-j)*h)^2 + f[j]. Lower envelope of parabolas;
// +inf parabolas are skipped at insertion, so intersection abscissae stay
// finite and the envelope stack never underflows.
void transform_line(const double* f, double* d, int n, double h, int* v, double* z) {
    int q0 = 0;
    while (q0 < n && f[q0] == kEdtInfinity) ++q0;
    if (q0 == n) {
        std::fill(d, d + n, kEdtInfinity);
        return;
    }

    const double h2 = h * h;
    int k = 0;
    v[0] = q0;
    z[0] = -kEdtInfinity;
    z[1] = kEdtInfinity;
    for (int q = q0 + 1; q < n; ++q) {
        if (f[q] == kEdtInfinity) continue;
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + double(q) * q * h2) - (f[p] + double(p) * p * h2)) /
                (2.0 * h2 * (q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kEdtInfinity;
    }

    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = (q - v[k]) * h;
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

std::vector<double> squared_distance_field(const std::vector<uint8_t>& sites, int width,
                                           int height, int depth,
                                           const std::array<double, 3>& spacing) {
    const size_t n = size_t(width) * height * depth;
    if (width < 1 || height < 1 || depth < 1)
        throw InvalidArgument("edt: dims must be >= 1");
    if (sites.size() != n) throw InvalidArgument("edt: site buffer length does not match dims");
    for (double s : spacing)
        if (!(s > 0.0)) throw InvalidArgument("edt: spacing must be > 0");

    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = sites[i] ? 0.0 : kEdtInfinity;

    const int max_dim = std::max(width, std::max(height, depth));
    std::vector<double> f(max_dim), out(max_dim), z(max_dim + 1);
    std::vector<int> v(max_dim);

    // pass along x
    for (int zed = 0; zed < depth; ++zed)
        for (int y = 0; y < height; ++y) {
            double* row = d.data() + size_t(zed) * height * width + size_t(y) * width;
            transform_line(row, out.data(), width, spacing[0], v.data(), z.data());
            std::copy(out.begin(), out.begin() + width, row);
        }
    // pass along y
    if (height > 1) {
        for (int zed = 0; zed < depth; ++zed)
            for (int x = 0; x < width; ++x) {
                double* plane = d.data() + size_t(zed) * height * width;
                for (int y = 0; y < height; ++y) f[y] = plane[size_t(y) * width + x];
                transform_line(f.data(), out.data(), height, spacing[1], v.data(), z.data());
                for (int y = 0; y < height; ++y) plane[size_t(y) * width + x] = out[y];
            }
    }
    // pass along z
    if (depth > 1) {
        const size_t stride = size_t(height) * width;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const size_t base = size_t(y) * width + x;
                for (int zed = 0; zed < depth; ++zed) f[zed] = d[base + stride * zed];
                transform_line(f.data(), out.data(), depth, spacing[2], v.data(), z.data());
                for (int zed = 0; zed < depth; ++zed) d[base + stride * zed] = out[zed];
            }
    }
    return d;
}

std::vector<double> squared_distance_field_2d(const std::vector<uint8_t>& sites, int width,
                                              int height) {
    return squared_distance_field(sites, width, height, 1, {1.0, 1.0, 1.0});
}

}  // namespace vseg
