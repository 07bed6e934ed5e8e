#include "vseg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#else
static inline int omp_in_parallel() { return 0; }
#endif

#include "vseg/errors.hpp"

namespace vseg::nn {

namespace {

// ------------------------------------------------------------------ gemm --
// C[M x N] += A[M x K] * B[K x N], all row-major. Each C row is produced by
// exactly one thread and its k-accumulation order is fixed, so results are
// bit-identical for any thread count. 2-row / 4-k blocking keeps the inner
// loop vectorizable without reassociation.

template <typename T>
void gemm_block_row(const T* a, const T* B, T* c, int N, int K) {
    int k = 0;
    for (; k + 4 <= K; k += 4) {
        const T* b0 = B + size_t(k) * N;
        const T* b1 = b0 + N;
        const T* b2 = b1 + N;
        const T* b3 = b2 + N;
        const T s0 = a[k], s1 = a[k + 1], s2 = a[k + 2], s3 = a[k + 3];
#pragma omp simd
        for (int j = 0; j < N; ++j) c[j] += s0 * b0[j] + s1 * b1[j] + s2 * b2[j] + s3 * b3[j];
    }
    for (; k < K; ++k) {
        const T* b0 = B + size_t(k) * N;
        const T s0 = a[k];
#pragma omp simd
        for (int j = 0; j < N; ++j) c[j] += s0 * b0[j];
    }
}

// Two-row block body; stronger when K is small (short k loops amortize
// poorly over four rows).
template <typename T>
inline void gemm_rows2_body(int i, int M, int N, int K, const T* A, const T* B, T* C) {
    const T* a0 = A + size_t(i) * K;
    T* c0 = C + size_t(i) * N;
    if (i + 1 < M) {
        const T* a1 = a0 + K;
        T* c1 = c0 + N;
        int k = 0;
        for (; k + 4 <= K; k += 4) {
            const T* b0 = B + size_t(k) * N;
            const T* b1 = b0 + N;
            const T* b2 = b1 + N;
            const T* b3 = b2 + N;
            const T s00 = a0[k], s01 = a0[k + 1], s02 = a0[k + 2], s03 = a0[k + 3];
            const T s10 = a1[k], s11 = a1[k + 1], s12 = a1[k + 2], s13 = a1[k + 3];
#pragma omp simd
            for (int j = 0; j < N; ++j) {
                c0[j] += s00 * b0[j] + s01 * b1[j] + s02 * b2[j] + s03 * b3[j];
                c1[j] += s10 * b0[j] + s11 * b1[j] + s12 * b2[j] + s13 * b3[j];
            }
        }
        for (; k < K; ++k) {
            const T* b0 = B + size_t(k) * N;
            const T s0 = a0[k], s1 = a1[k];
#pragma omp simd
            for (int j = 0; j < N; ++j) {
                c0[j] += s0 * b0[j];
                c1[j] += s1 * b0[j];
            }
        }
    } else {
        gemm_block_row(a0, B, c0, N, K);
    }
}

// Four-row block body; shares each B row across four C rows, which matters
// for the large-K conv and dense shapes.
template <typename T>
inline void gemm_rows4_body(int i, int M, int N, int K, const T* A, const T* B, T* C) {
    const int rows = std::min(4, M - i);
    if (rows == 4) {
        const T* a0 = A + size_t(i) * K;
        const T* a1 = a0 + K;
        const T* a2 = a1 + K;
        const T* a3 = a2 + K;
        T* c0 = C + size_t(i) * N;
        T* c1 = c0 + N;
        T* c2 = c1 + N;
        T* c3 = c2 + N;
        int k = 0;
        for (; k + 2 <= K; k += 2) {
            const T* b0 = B + size_t(k) * N;
            const T* b1 = b0 + N;
            const T s00 = a0[k], s01 = a0[k + 1], s10 = a1[k], s11 = a1[k + 1];
            const T s20 = a2[k], s21 = a2[k + 1], s30 = a3[k], s31 = a3[k + 1];
#pragma omp simd
            for (int j = 0; j < N; ++j) {
                const T b0j = b0[j], b1j = b1[j];
                c0[j] += s00 * b0j + s01 * b1j;
                c1[j] += s10 * b0j + s11 * b1j;
                c2[j] += s20 * b0j + s21 * b1j;
                c3[j] += s30 * b0j + s31 * b1j;
            }
        }
        for (; k < K; ++k) {
            const T* b0 = B + size_t(k) * N;
            const T s0 = a0[k], s1 = a1[k], s2 = a2[k], s3 = a3[k];
#pragma omp simd
            for (int j = 0; j < N; ++j) {
                const T b = b0[j];
                c0[j] += s0 * b;
                c1[j] += s1 * b;
                c2[j] += s2 * b;
                c3[j] += s3 * b;
            }
        }
    } else {
        for (int r = 0; r < rows; ++r)
            gemm_block_row(A + size_t(i + r) * K, B, C + size_t(i + r) * N, N, K);
    }
}

// Serial form for use inside already-parallel regions (no OpenMP runtime
// entry). Row grouping is identical to the parallel form, so a given
// multiply produces the same bits on every path and thread count.
template <typename T>
void gemm_serial(int M, int N, int K, const T* A, const T* B, T* C) {
    if (K <= 32) {
        for (int i = 0; i < M; i += 2) gemm_rows2_body(i, M, N, K, A, B, C);
    } else {
        for (int i = 0; i < M; i += 4) gemm_rows4_body(i, M, N, K, A, B, C);
    }
}

template <typename T>
void gemm(int M, int N, int K, const T* A, const T* B, T* C) {
    if (size_t(M) * N * K <= (1u << 16) || omp_in_parallel()) {
        gemm_serial(M, N, K, A, B, C);
        return;
    }
    if (K <= 32) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < M; i += 2) gemm_rows2_body(i, M, N, K, A, B, C);
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < M; i += 4) gemm_rows4_body(i, M, N, K, A, B, C);
    }
}

// C[M x N] += A^T * B where A is [K x M] row-major (i.e. A^T taken on the
// fly). Used for weight gradients dW = X^T dY, where K is the batch-row
// count and can be much larger than M and N. Processes K in blocks and
// transposes each A block into an L2-resident scratch so the inner loops
// touch contiguous memory; per-element accumulation order stays fixed.
template <typename T>
void gemm_at(int M, int N, int K, const T* A, const T* B, T* C) {
    constexpr int kBlock = 128;
    std::vector<T> at(size_t(M) * std::min(K, kBlock));
    for (int kb = 0; kb < K; kb += kBlock) {
        const int kn = std::min(kBlock, K - kb);
        // transpose the block: contiguous reads, scratch-resident writes
#pragma omp parallel for schedule(static) if (size_t(kn) * M > 1u << 16)
        for (int k = 0; k < kn; ++k) {
            const T* arow = A + size_t(kb + k) * M;
            for (int i = 0; i < M; ++i) at[size_t(i) * kn + k] = arow[i];
        }
        gemm(M, N, kn, at.data(), B + size_t(kb) * N, C);
    }
}

// Tiled transpose; both sides touch whole cache lines per tile.
template <typename T>
void transpose(int rows, int cols, const T* src, std::vector<T>& dst) {
    constexpr int kTile = 64;
    dst.resize(size_t(rows) * cols);
#pragma omp parallel for schedule(static) if (size_t(rows) * cols > 1u << 16)
    for (int rb = 0; rb < rows; rb += kTile) {
        const int rend = std::min(rows, rb + kTile);
        for (int cb = 0; cb < cols; cb += kTile) {
            const int cend = std::min(cols, cb + kTile);
            for (int r = rb; r < rend; ++r)
                for (int c = cb; c < cend; ++c)
                    dst[size_t(c) * rows + r] = src[size_t(r) * cols + c];
        }
    }
}

template <typename T>
void add_bias_rows(T* y, int rows, int cols, const T* b) {
#pragma omp parallel for schedule(static) if (size_t(rows) * cols > 1u << 16)
    for (int r = 0; r < rows; ++r) {
        T* row = y + size_t(r) * cols;
#pragma omp simd
        for (int j = 0; j < cols; ++j) row[j] += b[j];
    }
}

// Column sums (deterministic: one thread per column, fixed row order).
template <typename T>
void column_sums(const T* y, int rows, int cols, T* out) {
#pragma omp parallel for schedule(static) if (size_t(rows) * cols > 1u << 16)
    for (int j = 0; j < cols; ++j) {
        T s = 0;
        for (int r = 0; r < rows; ++r) s += y[size_t(r) * cols + j];
        out[j] = s;
    }
}

// --------------------------------------------------------------- conv ----
// Direct same-padding stride-1 convolution as k*k shifted row-GEMMs. The
// weight layout [ky][kx][in_c][out_c] makes each tap an in_c x out_c GEMM
// operand; inputs are small enough to stay cache-resident, so nothing is
// materialized. Serial per sample (the small GEMMs fall under the parallel
// threshold), parallel across samples; taps accumulate in fixed order.

template <typename T>
void conv_forward_direct(const T* x, int n, int h, int w, int cin, const ConvLayer<T>& l,
                         T* y) {
    const int half = l.k / 2, cout = l.out_c;
    const size_t frame = size_t(h) * w;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const T* xs = x + size_t(s) * frame * cin;
        T* ys = y + size_t(s) * frame * cout;
        for (size_t p = 0; p < frame; ++p)
            std::memcpy(ys + p * cout, l.b.data(), sizeof(T) * cout);
        for (int ky = 0; ky < l.k; ++ky) {
            const int dy = ky - half;
            const int oy0 = std::max(0, -dy), oy1 = std::min(h, h - dy);
            for (int kx = 0; kx < l.k; ++kx) {
                const int dx = kx - half;
                const int ox0 = std::max(0, -dx), ox1 = std::min(w, w - dx);
                const int wx = ox1 - ox0;
                if (wx <= 0 || oy0 >= oy1) continue;
                const T* wk = l.w.data() + size_t(size_t(ky) * l.k + kx) * cin * cout;
                for (int oy = oy0; oy < oy1; ++oy) {
                    const T* a = xs + (size_t(oy + dy) * w + (ox0 + dx)) * cin;
                    T* c = ys + (size_t(oy) * w + ox0) * cout;
                    gemm(wx, cout, cin, a, wk, c);
                }
            }
        }
    }
}

// dX = dY convolved with the flipped kernels; wt holds all k*k transposed
// tap matrices [out_c][in_c], precomputed by the caller.
template <typename T>
void conv_backward_input_direct(const T* dy, int n, int h, int w, int cin,
                                const ConvLayer<T>& l, const std::vector<T>& wt, T* dx) {
    const int half = l.k / 2, cout = l.out_c;
    const size_t frame = size_t(h) * w;
    std::fill(dx, dx + size_t(n) * frame * cin, T(0));
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const T* dys = dy + size_t(s) * frame * cout;
        T* dxs = dx + size_t(s) * frame * cin;
        for (int ky = 0; ky < l.k; ++ky) {
            const int dyo = ky - half;
            const int oy0 = std::max(0, -dyo), oy1 = std::min(h, h - dyo);
            for (int kx = 0; kx < l.k; ++kx) {
                const int dxo = kx - half;
                const int ox0 = std::max(0, -dxo), ox1 = std::min(w, w - dxo);
                const int wx = ox1 - ox0;
                if (wx <= 0 || oy0 >= oy1) continue;
                const T* wkt = wt.data() + size_t(size_t(ky) * l.k + kx) * cin * cout;
                for (int oy = oy0; oy < oy1; ++oy) {
                    const T* a = dys + (size_t(oy) * w + ox0) * cout;
                    T* c = dxs + (size_t(oy + dyo) * w + (ox0 + dxo)) * cin;
                    gemm(wx, cin, cout, a, wkt, c);
                }
            }
        }
    }
}

// dW[ky][kx] = sum over samples/rows of X_lineT * dY_line; parallel over
// taps (disjoint dW slices), serial inside for a fixed accumulation order.
template <typename T>
void conv_backward_weights_direct(const T* x, const T* dy, int n, int h, int w, int cin,
                                  const ConvLayer<T>& l, T* dw, T* db) {
    const int half = l.k / 2, cout = l.out_c;
    const size_t frame = size_t(h) * w;
    const int k2 = l.k * l.k;
#pragma omp parallel for schedule(dynamic, 1)
    for (int tap = 0; tap < k2; ++tap) {
        const int ky = tap / l.k, kx = tap % l.k;
        const int dyo = ky - half, dxo = kx - half;
        const int oy0 = std::max(0, -dyo), oy1 = std::min(h, h - dyo);
        const int ox0 = std::max(0, -dxo), ox1 = std::min(w, w - dxo);
        const int wx = ox1 - ox0;
        T* dwk = dw + size_t(tap) * cin * cout;
        if (wx <= 0 || oy0 >= oy1) continue;
        for (int s = 0; s < n; ++s) {
            const T* xs = x + size_t(s) * frame * cin;
            const T* dys = dy + size_t(s) * frame * cout;
            for (int oy = oy0; oy < oy1; ++oy) {
                const T* a = xs + (size_t(oy + dyo) * w + (ox0 + dxo)) * cin;
                const T* b = dys + (size_t(oy) * w + ox0) * cout;
                for (int r = 0; r < wx; ++r) {
                    const T* ar = a + size_t(r) * cin;
                    const T* br = b + size_t(r) * cout;
                    for (int ci = 0; ci < cin; ++ci) {
                        const T sv = ar[ci];
                        T* dst = dwk + size_t(ci) * cout;
#pragma omp simd
                        for (int co = 0; co < cout; ++co) dst[co] += sv * br[co];
                    }
                }
            }
        }
    }
    column_sums(dy, n * h * w, cout, db);
}

// Transposes every k*k tap matrix from [in_c][out_c] to [out_c][in_c].
template <typename T>
void transpose_taps(const ConvLayer<T>& l, std::vector<T>& wt) {
    const int k2 = l.k * l.k;
    wt.resize(l.w.size());
    for (int tap = 0; tap < k2; ++tap) {
        const T* src = l.w.data() + size_t(tap) * l.in_c * l.out_c;
        T* dst = wt.data() + size_t(tap) * l.in_c * l.out_c;
        for (int ci = 0; ci < l.in_c; ++ci)
            for (int co = 0; co < l.out_c; ++co)
                dst[size_t(co) * l.in_c + ci] = src[size_t(ci) * l.out_c + co];
    }
}

template <typename T>
void relu_inplace(T* x, size_t n) {
#pragma omp parallel for schedule(static) if (n > 1u << 16)
    for (ptrdiff_t i = 0; i < ptrdiff_t(n); ++i)
        if (x[i] < T(0)) x[i] = T(0);
}

// 2x2 max pool; ties go to the scan-first (top-left-most) element.
template <typename T>
void maxpool_batch(const T* x, int n, int h, int w, int c, T* out, int32_t* argmax) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const T* img = x + size_t(s) * h * w * c;
        T* o = out + size_t(s) * oh * ow * c;
        int32_t* am = argmax + size_t(s) * oh * ow * c;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox)
                for (int ch = 0; ch < c; ++ch) {
                    T best{};
                    int32_t best_idx = -1;
                    for (int py = 0; py < 2; ++py)
                        for (int px = 0; px < 2; ++px) {
                            const int iy = 2 * oy + py, ix = 2 * ox + px;
                            const int32_t idx = int32_t((size_t(iy) * w + ix) * c + ch);
                            const T v = img[idx];
                            if (best_idx < 0 || v > best) {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    o[(size_t(oy) * ow + ox) * c + ch] = best;
                    am[(size_t(oy) * ow + ox) * c + ch] = best_idx;
                }
    }
}

template <typename T>
void maxpool_backward_batch(const T* dout, const int32_t* argmax, int n, int oh, int ow,
                            int c, int in_h, int in_w, T* dx) {
    std::fill(dx, dx + size_t(n) * in_h * in_w * c, T(0));
#pragma omp parallel for schedule(static)
    for (int s = 0; s < n; ++s) {
        const T* d = dout + size_t(s) * oh * ow * c;
        const int32_t* am = argmax + size_t(s) * oh * ow * c;
        T* g = dx + size_t(s) * in_h * in_w * c;
        for (size_t i = 0; i < size_t(oh) * ow * c; ++i) g[am[i]] += d[i];
    }
}

// Softmax row with max-shift; loss/probs in the row's own precision.
template <typename T>
void softmax_row(const T* logits, int c, T* probs) {
    T mx = logits[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits[j]);
    T sum = 0;
    for (int j = 0; j < c; ++j) {
        probs[j] = std::exp(logits[j] - mx);
        sum += probs[j];
    }
    for (int j = 0; j < c; ++j) probs[j] /= sum;
}

template <typename T>
void check_finite(const T* x, size_t n, const char* stage) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(double(x[i])))
            throw ValidationError(std::string("non-finite value after ") + stage);
}

}  // namespace

// ----------------------------------------------------------------- config --

void NetConfig::validate() const {
    if (input_h < 4 || input_w < 4 || input_c < 1)
        throw InvalidArgument("network input must be at least 4x4x1");
    if (input_h % 4 != 0 || input_w % 4 != 0)
        throw InvalidArgument("input sides must be divisible by 4 (two 2x2 pools)");
    if (kernel < 1 || kernel % 2 == 0)
        throw InvalidArgument("kernel size must be odd");
    if (conv1_channels < 1 || conv2_channels < 1 || fc1_units < 1 || fc2_units < 1)
        throw InvalidArgument("layer widths must be >= 1");
    if (classes < 2) throw InvalidArgument("need at least 2 classes");
    if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f))
        throw InvalidArgument("dropout rate must lie in [0,1)");
}

std::string NetConfig::shape_chain() const {
    std::ostringstream ss;
    ss << input_h << "x" << input_w << "x" << input_c << " -> " << input_h << "x" << input_w
       << "x" << conv1_channels << " -> " << pool1_h() << "x" << pool1_w() << "x"
       << conv1_channels << " -> " << pool1_h() << "x" << pool1_w() << "x" << conv2_channels
       << " -> " << pool2_h() << "x" << pool2_w() << "x" << conv2_channels << " -> "
       << flatten_len() << " -> " << fc1_units << " -> " << fc2_units << " -> " << classes;
    return ss.str();
}

// ---------------------------------------------------------------- network --

template <typename T>
Network<T> Network<T>::he_init(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    Network<T> net;
    net.cfg = cfg;
    auto init_conv = [&](ConvLayer<T>& l, int in_c, int out_c) {
        l.in_c = in_c;
        l.out_c = out_c;
        l.k = cfg.kernel;
        l.w.resize(size_t(cfg.kernel) * cfg.kernel * in_c * out_c);
        l.b.assign(out_c, T(0));
        const double std = std::sqrt(2.0 / (double(cfg.kernel) * cfg.kernel * in_c));
        for (T& v : l.w) v = T(rng.normal(0.0, std));
    };
    auto init_dense = [&](DenseLayer<T>& l, int in_n, int out_n) {
        l.in_n = in_n;
        l.out_n = out_n;
        l.w.resize(size_t(in_n) * out_n);
        l.b.assign(out_n, T(0));
        const double std = std::sqrt(2.0 / double(in_n));
        for (T& v : l.w) v = T(rng.normal(0.0, std));
    };
    init_conv(net.conv1, cfg.input_c, cfg.conv1_channels);
    init_conv(net.conv2, cfg.conv1_channels, cfg.conv2_channels);
    init_dense(net.fc1, cfg.flatten_len(), cfg.fc1_units);
    init_dense(net.fc2, cfg.fc1_units, cfg.fc2_units);
    init_dense(net.fc3, cfg.fc2_units, cfg.classes);
    net.validate_shapes();
    return net;
}

template <typename T>
void Network<T>::validate_shapes() const {
    cfg.validate();
    auto expect = [](bool ok, const char* what) {
        if (!ok) throw InvalidArgument(std::string("network shape mismatch: ") + what);
    };
    expect(conv1.in_c == cfg.input_c && conv1.out_c == cfg.conv1_channels &&
               conv1.k == cfg.kernel &&
               conv1.w.size() == size_t(cfg.kernel) * cfg.kernel * conv1.in_c * conv1.out_c &&
               conv1.b.size() == size_t(conv1.out_c),
           "conv1");
    expect(conv2.in_c == cfg.conv1_channels && conv2.out_c == cfg.conv2_channels &&
               conv2.k == cfg.kernel &&
               conv2.w.size() == size_t(cfg.kernel) * cfg.kernel * conv2.in_c * conv2.out_c &&
               conv2.b.size() == size_t(conv2.out_c),
           "conv2");
    expect(fc1.in_n == cfg.flatten_len() && fc1.out_n == cfg.fc1_units &&
               fc1.w.size() == size_t(fc1.in_n) * fc1.out_n && fc1.b.size() == size_t(fc1.out_n),
           "fc1");
    expect(fc2.in_n == cfg.fc1_units && fc2.out_n == cfg.fc2_units &&
               fc2.w.size() == size_t(fc2.in_n) * fc2.out_n && fc2.b.size() == size_t(fc2.out_n),
           "fc2");
    expect(fc3.in_n == cfg.fc2_units && fc3.out_n == cfg.classes &&
               fc3.w.size() == size_t(fc3.in_n) * fc3.out_n && fc3.b.size() == size_t(fc3.out_n),
           "fc3");
}

template <typename T>
size_t Network<T>::param_count() const {
    return conv1.w.size() + conv1.b.size() + conv2.w.size() + conv2.b.size() + fc1.w.size() +
           fc1.b.size() + fc2.w.size() + fc2.b.size() + fc3.w.size() + fc3.b.size();
}

template <typename T>
std::vector<std::span<T>> param_views(Network<T>& net) {
    return {net.conv1.w, net.conv1.b, net.conv2.w, net.conv2.b, net.fc1.w,
            net.fc1.b,   net.fc2.w,   net.fc2.b,   net.fc3.w,   net.fc3.b};
}

template <typename T>
std::vector<std::span<const T>> param_views(const Network<T>& net) {
    return {net.conv1.w, net.conv1.b, net.conv2.w, net.conv2.b, net.fc1.w,
            net.fc1.b,   net.fc2.w,   net.fc2.b,   net.fc3.w,   net.fc3.b};
}

template <typename T>
Gradients<T> Gradients<T>::like(const Network<T>& net) {
    Gradients<T> g;
    for (auto view : param_views(net)) g.g.emplace_back(view.size(), T(0));
    return g;
}

template <typename T>
void Gradients<T>::fill_zero() {
    for (auto& buf : g) std::fill(buf.begin(), buf.end(), T(0));
}

// ------------------------------------------------------------ full passes --

template <typename T>
void forward_batch(const Network<T>& net, const T* x, int n, Mode mode, Rng* rng,
                   BatchWork<T>& work) {
    const NetConfig& c = net.cfg;
    if (n < 1) throw InvalidArgument("batch size must be >= 1");
    work.n = n;

    const int h = c.input_h, w = c.input_w;
    const int h2 = c.pool1_h(), w2 = c.pool1_w();
    const int h4 = c.pool2_h(), w4 = c.pool2_w();
    const int c1 = c.conv1_channels, c2 = c.conv2_channels;

    // conv1 + relu; the input is kept for the weight-gradient pass
    work.x0.assign(x, x + size_t(n) * h * w * c.input_c);
    work.a1.resize(size_t(n) * h * w * c1);
    conv_forward_direct(x, n, h, w, c.input_c, net.conv1, work.a1.data());
    relu_inplace(work.a1.data(), work.a1.size());
    if (net.debug_checks) check_finite(work.a1.data(), work.a1.size(), "conv1");

    // pool1
    work.p1.resize(size_t(n) * h2 * w2 * c1);
    work.idx1.resize(work.p1.size());
    maxpool_batch(work.a1.data(), n, h, w, c1, work.p1.data(), work.idx1.data());

    // conv2 + relu
    work.a2.resize(size_t(n) * h2 * w2 * c2);
    conv_forward_direct(work.p1.data(), n, h2, w2, c1, net.conv2, work.a2.data());
    relu_inplace(work.a2.data(), work.a2.size());
    if (net.debug_checks) check_finite(work.a2.data(), work.a2.size(), "conv2");

    // pool2 -> flatten
    work.p2.resize(size_t(n) * h4 * w4 * c2);
    work.idx2.resize(work.p2.size());
    maxpool_batch(work.a2.data(), n, h2, w2, c2, work.p2.data(), work.idx2.data());

    const bool drop = mode == Mode::train && c.dropout_rate > 0.0f;
    if (drop && !rng) throw InvalidArgument("train-mode forward with dropout needs an RNG");
    const T keep_scale = drop ? T(1.0 / (1.0 - double(c.dropout_rate))) : T(1);

    auto dense_stage = [&](const std::vector<T>& in, int in_n, const DenseLayer<T>& l,
                           std::vector<T>& out) {
        out.assign(size_t(n) * l.out_n, T(0));
        gemm(n, l.out_n, in_n, in.data(), l.w.data(), out.data());
        add_bias_rows(out.data(), n, l.out_n, l.b.data());
    };
    auto dropout_stage = [&](std::vector<T>& a, std::vector<uint8_t>& mask) {
        mask.assign(a.size(), 1);
        if (!drop) return;
        for (size_t i = 0; i < a.size(); ++i) {
            if (rng->uniform() < double(c.dropout_rate)) {
                mask[i] = 0;
                a[i] = T(0);
            } else {
                a[i] *= keep_scale;
            }
        }
    };

    // fc1 + relu + dropout
    dense_stage(work.p2, c.flatten_len(), net.fc1, work.f1);
    relu_inplace(work.f1.data(), work.f1.size());
    dropout_stage(work.f1, work.m1);
    if (net.debug_checks) check_finite(work.f1.data(), work.f1.size(), "fc1");

    // fc2 + relu + dropout
    dense_stage(work.f1, c.fc1_units, net.fc2, work.f2);
    relu_inplace(work.f2.data(), work.f2.size());
    dropout_stage(work.f2, work.m2);
    if (net.debug_checks) check_finite(work.f2.data(), work.f2.size(), "fc2");

    // fc3 + softmax
    dense_stage(work.f2, c.fc2_units, net.fc3, work.logits);
    work.probs.resize(work.logits.size());
    for (int s = 0; s < n; ++s)
        softmax_row(work.logits.data() + size_t(s) * c.classes, c.classes,
                    work.probs.data() + size_t(s) * c.classes);
    if (net.debug_checks) check_finite(work.probs.data(), work.probs.size(), "softmax");
}

template <typename T>
double backward_batch(const Network<T>& net, BatchWork<T>& work, const uint8_t* labels,
                      Gradients<T>& grads) {
    const NetConfig& c = net.cfg;
    const int n = work.n;
    if (n < 1) throw InvalidArgument("backward before forward");
    const int h = c.input_h, w = c.input_w;
    const int h2 = c.pool1_h(), w2 = c.pool1_w();
    const int c1 = c.conv1_channels, c2 = c.conv2_channels;

    if (grads.g.size() != 10) grads = Gradients<T>::like(net);
    grads.fill_zero();
    std::span<T> d_conv1_w{grads.g[0]}, d_conv1_b{grads.g[1]};
    std::span<T> d_conv2_w{grads.g[2]}, d_conv2_b{grads.g[3]};
    std::span<T> d_fc1_w{grads.g[4]}, d_fc1_b{grads.g[5]};
    std::span<T> d_fc2_w{grads.g[6]}, d_fc2_b{grads.g[7]};
    std::span<T> d_fc3_w{grads.g[8]}, d_fc3_b{grads.g[9]};

    BatchWork<T>& scratch = work;

    // softmax cross-entropy: dlogits = (p - onehot)/n, loss = -mean ln p[y]
    double loss = 0.0;
    std::vector<T>& dlogits = scratch.d_fc;
    dlogits.assign(size_t(n) * c.classes, T(0));
    const double inv_n = 1.0 / double(n);
    for (int s = 0; s < n; ++s) {
        const int y = labels[s];
        if (y < 0 || y >= c.classes) throw InvalidArgument("label out of range");
        const T* p = work.probs.data() + size_t(s) * c.classes;
        loss -= std::log(std::max(double(p[y]), 1e-300)) * inv_n;
        T* d = dlogits.data() + size_t(s) * c.classes;
        for (int j = 0; j < c.classes; ++j) d[j] = (p[j] - T(j == y)) * T(inv_n);
    }

    // fc3
    gemm_at(c.fc2_units, c.classes, n, work.f2.data(), dlogits.data(), d_fc3_w.data());
    column_sums(dlogits.data(), n, c.classes, d_fc3_b.data());
    std::vector<T>& df2 = scratch.d_fc2;
    df2.assign(size_t(n) * c.fc2_units, T(0));
    transpose(c.fc2_units, c.classes, net.fc3.w.data(), scratch.wt);
    gemm(n, c.fc2_units, c.classes, dlogits.data(), scratch.wt.data(), df2.data());

    // dropout2 + relu2 gate: kept positive units pass scaled gradient
    const bool drop = c.dropout_rate > 0.0f;
    const T keep_scale = drop ? T(1.0 / (1.0 - double(c.dropout_rate))) : T(1);
    for (size_t i = 0; i < df2.size(); ++i) {
        const T gate = (work.f2[i] > T(0)) ? (work.m2[i] ? keep_scale : T(0)) : T(0);
        df2[i] *= gate;
    }

    // fc2
    gemm_at(c.fc1_units, c.fc2_units, n, work.f1.data(), df2.data(), d_fc2_w.data());
    column_sums(df2.data(), n, c.fc2_units, d_fc2_b.data());
    std::vector<T>& df1 = scratch.d_fc;  // reuse, dlogits no longer needed
    df1.assign(size_t(n) * c.fc1_units, T(0));
    transpose(c.fc1_units, c.fc2_units, net.fc2.w.data(), scratch.wt);
    gemm(n, c.fc1_units, c.fc2_units, df2.data(), scratch.wt.data(), df1.data());

    for (size_t i = 0; i < df1.size(); ++i) {
        const T gate = (work.f1[i] > T(0)) ? (work.m1[i] ? keep_scale : T(0)) : T(0);
        df1[i] *= gate;
    }

    // fc1
    gemm_at(c.flatten_len(), c.fc1_units, n, work.p2.data(), df1.data(), d_fc1_w.data());
    column_sums(df1.data(), n, c.fc1_units, d_fc1_b.data());
    std::vector<T>& dflat = scratch.d_flat;
    dflat.assign(size_t(n) * c.flatten_len(), T(0));
    transpose(c.flatten_len(), c.fc1_units, net.fc1.w.data(), scratch.wt);
    gemm(n, c.flatten_len(), c.fc1_units, df1.data(), scratch.wt.data(), dflat.data());

    // pool2 backward into conv2 activations, relu gate on a2
    std::vector<T>& da2 = scratch.d_conv;
    da2.resize(size_t(n) * h2 * w2 * c2);
    maxpool_backward_batch(dflat.data(), work.idx2.data(), n, c.pool2_h(), c.pool2_w(), c2, h2,
                           w2, da2.data());
    for (size_t i = 0; i < da2.size(); ++i)
        if (!(work.a2[i] > T(0))) da2[i] = T(0);

    // conv2
    conv_backward_weights_direct(work.p1.data(), da2.data(), n, h2, w2, c1, net.conv2,
                                 d_conv2_w.data(), d_conv2_b.data());
    std::vector<T>& dp1 = scratch.d_conv2;
    dp1.resize(size_t(n) * h2 * w2 * c1);
    transpose_taps(net.conv2, scratch.wt);
    conv_backward_input_direct(da2.data(), n, h2, w2, c1, net.conv2, scratch.wt, dp1.data());

    // pool1 backward, relu gate on a1
    std::vector<T>& da1 = scratch.d_conv;  // reuse after conv2 grads done
    da1.resize(size_t(n) * h * w * c1);
    maxpool_backward_batch(dp1.data(), work.idx1.data(), n, h2, w2, c1, h, w, da1.data());
    for (size_t i = 0; i < da1.size(); ++i)
        if (!(work.a1[i] > T(0))) da1[i] = T(0);

    // conv1 (input gradient not needed)
    conv_backward_weights_direct(work.x0.data(), da1.data(), n, h, w, c.input_c, net.conv1,
                                 d_conv1_w.data(), d_conv1_b.data());

    return loss;
}

template <typename T>
std::vector<T> forward(const Network<T>& net, const Tensor<T>& patch, Mode mode, Rng* rng) {
    const NetConfig& c = net.cfg;
    if (patch.h != c.input_h || patch.w != c.input_w || patch.c != c.input_c ||
        patch.v.size() != c.input_len())
        throw InvalidArgument("input tensor shape does not match network");
    BatchWork<T> work;
    forward_batch(net, patch.v.data(), 1, mode, rng, work);
    return work.probs;
}

template <typename T>
BackwardResult<T> backward(const Network<T>& net, const Tensor<T>& patch, int label,
                           Rng& rng) {
    const NetConfig& c = net.cfg;
    if (patch.h != c.input_h || patch.w != c.input_w || patch.c != c.input_c)
        throw InvalidArgument("input tensor shape does not match network");
    if (label < 0 || label >= c.classes) throw InvalidArgument("label out of range");
    BatchWork<T> work;
    forward_batch(net, patch.v.data(), 1, Mode::train, &rng, work);
    BackwardResult<T> res{0.0, Gradients<T>::like(net)};
    const uint8_t y = static_cast<uint8_t>(label);
    res.loss = backward_batch(net, work, &y, res.grads);
    return res;
}

// --------------------------------------------------------- single-sample --

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const ConvLayer<T>& layer) {
    if (in.c != layer.in_c) throw InvalidArgument("conv input channels mismatch");
    if (in.v.size() != size_t(in.h) * in.w * in.c) throw InvalidArgument("conv input buffer size");
    Tensor<T> out(in.h, in.w, layer.out_c);
    conv_forward_direct(in.v.data(), 1, in.h, in.w, in.c, layer, out.v.data());
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& in, const ConvLayer<T>& layer,
                             const Tensor<T>& dout) {
    if (dout.h != in.h || dout.w != in.w || dout.c != layer.out_c)
        throw InvalidArgument("conv output gradient shape mismatch");
    ConvGrads<T> g;
    g.dw.assign(layer.w.size(), T(0));
    g.db.assign(layer.b.size(), T(0));
    conv_backward_weights_direct(in.v.data(), dout.v.data(), 1, in.h, in.w, in.c, layer,
                                 g.dw.data(), g.db.data());
    std::vector<T> wt;
    transpose_taps(layer, wt);
    g.dinput = Tensor<T>(in.h, in.w, in.c);
    conv_backward_input_direct(dout.v.data(), 1, in.h, in.w, in.c, layer, wt,
                               g.dinput.v.data());
    return g;
}

template <typename T>
PoolResult<T> maxpool2_forward(const Tensor<T>& in) {
    if (in.h % 2 != 0 || in.w % 2 != 0)
        throw InvalidArgument("max pool needs even spatial dims");
    PoolResult<T> r;
    r.out = Tensor<T>(in.h / 2, in.w / 2, in.c);
    r.argmax.resize(r.out.size());
    maxpool_batch(in.v.data(), 1, in.h, in.w, in.c, r.out.v.data(), r.argmax.data());
    return r;
}

template <typename T>
Tensor<T> maxpool2_backward(int in_h, int in_w, int channels,
                            const std::vector<int32_t>& argmax, const Tensor<T>& dout) {
    if (dout.h != in_h / 2 || dout.w != in_w / 2 || dout.c != channels ||
        argmax.size() != dout.size())
        throw InvalidArgument("max pool backward shape mismatch");
    Tensor<T> dx(in_h, in_w, channels);
    maxpool_backward_batch(dout.v.data(), argmax.data(), 1, dout.h, dout.w, channels, in_h,
                           in_w, dx.v.data());
    return dx;
}

template <typename T>
std::vector<T> dense_forward(std::span<const T> x, const DenseLayer<T>& layer) {
    if (x.size() != size_t(layer.in_n)) throw InvalidArgument("dense input length mismatch");
    std::vector<T> y(layer.out_n, T(0));
    gemm(1, layer.out_n, layer.in_n, x.data(), layer.w.data(), y.data());
    for (int j = 0; j < layer.out_n; ++j) y[j] += layer.b[j];
    return y;
}

template <typename T>
DenseGrads<T> dense_backward(std::span<const T> x, const DenseLayer<T>& layer,
                             std::span<const T> dy) {
    if (x.size() != size_t(layer.in_n) || dy.size() != size_t(layer.out_n))
        throw InvalidArgument("dense backward shape mismatch");
    DenseGrads<T> g;
    g.dw.assign(layer.w.size(), T(0));
    gemm_at(layer.in_n, layer.out_n, 1, x.data(), dy.data(), g.dw.data());
    g.db.assign(dy.begin(), dy.end());
    g.dx.assign(layer.in_n, T(0));
    std::vector<T> wt;
    transpose(layer.in_n, layer.out_n, layer.w.data(), wt);
    gemm(1, layer.in_n, layer.out_n, dy.data(), wt.data(), g.dx.data());
    return g;
}

template <typename T>
std::vector<T> relu_forward(std::span<const T> x) {
    std::vector<T> y(x.begin(), x.end());
    relu_inplace(y.data(), y.size());
    return y;
}

template <typename T>
std::vector<T> relu_backward(std::span<const T> x, std::span<const T> dy) {
    if (x.size() != dy.size()) throw InvalidArgument("relu backward length mismatch");
    std::vector<T> dx(x.size());
    for (size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
    return dx;
}

template <typename T>
DropoutResult<T> dropout_forward(std::span<const T> x, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0,1)");
    DropoutResult<T> r;
    r.out.assign(x.begin(), x.end());
    r.mask.assign(x.size(), 1);
    if (mode == Mode::infer || rate == 0.0) return r;
    const T scale = T(1.0 / (1.0 - rate));
    for (size_t i = 0; i < x.size(); ++i) {
        if (rng.uniform() < rate) {
            r.mask[i] = 0;
            r.out[i] = T(0);
        } else {
            r.out[i] *= scale;
        }
    }
    return r;
}

template <typename T>
SoftmaxXent<T> softmax_xent(std::span<const T> logits, int label) {
    const int c = static_cast<int>(logits.size());
    if (label < 0 || label >= c) throw InvalidArgument("label out of range");
    SoftmaxXent<T> r;
    r.probs.resize(c);
    softmax_row(logits.data(), c, r.probs.data());
    r.loss = T(-std::log(std::max(double(r.probs[label]), 1e-300)));
    r.dlogits.assign(r.probs.begin(), r.probs.end());
    r.dlogits[label] -= T(1);
    return r;
}

// ---------------------------------------------------------- grad checking --

double gradient_check(Network<double>& net, const Tensor<double>& patch, int label,
                      double eps) {
    if (!(eps > 0.0)) throw InvalidArgument("gradient check epsilon must be > 0");
    if (net.cfg.dropout_rate != 0.0f)
        throw InvalidArgument("gradient check requires dropout disabled");

    Rng rng(0);  // unused: dropout off
    const BackwardResult<double> analytic = backward(net, patch, label, rng);

    auto loss_at = [&]() {
        const std::vector<double> probs = forward(net, patch, Mode::train, &rng);
        return -std::log(std::max(probs[label], 1e-300));
    };

    double max_err = 0.0;
    auto params = param_views(net);
    for (size_t b = 0; b < params.size(); ++b) {
        for (size_t i = 0; i < params[b].size(); ++i) {
            double& p = params[b][i];
            const double saved = p;
            p = saved + eps;
            const double lp = loss_at();
            p = saved - eps;
            const double lm = loss_at();
            p = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double analytic_g = analytic.grads.g[b][i];
            const double denom = std::max({1.0, std::abs(analytic_g), std::abs(numeric)});
            max_err = std::max(max_err, std::abs(analytic_g - numeric) / denom);
        }
    }
    return max_err;
}

// -------------------------------------------------------------- optimizer --

template <typename T>
OptimizerState<T> OptimizerState<T>::like(const Network<T>& net) {
    OptimizerState<T> s;
    for (auto view : param_views(net)) {
        s.m.emplace_back(view.size(), T(0));
        s.v.emplace_back(view.size(), T(0));
    }
    return s;
}

template <typename T>
void optimizer_step(Network<T>& net, const Gradients<T>& grads, const OptimizerConfig& cfg,
                    OptimizerState<T>& state) {
    if (cfg.lr < 0.0) throw InvalidArgument("learning rate must be >= 0");
    auto params = param_views(net);
    if (grads.g.size() != params.size()) throw InvalidArgument("gradient/parameter mismatch");
    if (state.m.size() != params.size()) state = OptimizerState<T>::like(net);

    if (cfg.kind == OptKind::sgd_momentum) {
        for (size_t b = 0; b < params.size(); ++b) {
            auto p = params[b];
            const auto& g = grads.g[b];
            auto& m = state.m[b];
            for (size_t i = 0; i < p.size(); ++i) {
                m[i] = T(cfg.momentum) * m[i] + g[i];
                p[i] -= T(cfg.lr) * m[i];
            }
        }
        ++state.t;
        return;
    }

    // Adam with bias correction
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
    for (size_t b = 0; b < params.size(); ++b) {
        auto p = params[b];
        const auto& g = grads.g[b];
        auto& m = state.m[b];
        auto& v = state.v[b];
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = T(cfg.beta1) * m[i] + T(1.0 - cfg.beta1) * g[i];
            v[i] = T(cfg.beta2) * v[i] + T(1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = double(m[i]) / bc1;
            const double vhat = double(v[i]) / bc2;
            p[i] -= T(cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

// ----------------------------------------------------------- instantiation --

#define VSEG_NN_INSTANTIATE(T)                                                              \
    template struct Network<T>;                                                             \
    template struct Gradients<T>;                                                           \
    template struct OptimizerState<T>;                                                      \
    template std::vector<std::span<T>> param_views<T>(Network<T>&);                         \
    template std::vector<std::span<const T>> param_views<T>(const Network<T>&);             \
    template void forward_batch<T>(const Network<T>&, const T*, int, Mode, Rng*,            \
                                   BatchWork<T>&);                                          \
    template double backward_batch<T>(const Network<T>&, BatchWork<T>&, const uint8_t*,    \
                                      Gradients<T>&);                                       \
    template std::vector<T> forward<T>(const Network<T>&, const Tensor<T>&, Mode, Rng*);    \
    template BackwardResult<T> backward<T>(const Network<T>&, const Tensor<T>&, int, Rng&); \
    template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const ConvLayer<T>&);            \
    template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const ConvLayer<T>&,         \
                                             const Tensor<T>&);                             \
    template PoolResult<T> maxpool2_forward<T>(const Tensor<T>&);                           \
    template Tensor<T> maxpool2_backward<T>(int, int, int, const std::vector<int32_t>&,     \
                                            const Tensor<T>&);                              \
    template std::vector<T> dense_forward<T>(std::span<const T>, const DenseLayer<T>&);     \
    template DenseGrads<T> dense_backward<T>(std::span<const T>, const DenseLayer<T>&,      \
                                             std::span<const T>);                           \
    template std::vector<T> relu_forward<T>(std::span<const T>);                            \
    template std::vector<T> relu_backward<T>(std::span<const T>, std::span<const T>);       \
    template DropoutResult<T> dropout_forward<T>(std::span<const T>, double, Mode, Rng&);   \
    template SoftmaxXent<T> softmax_xent<T>(std::span<const T>, int);                       \
    template void optimizer_step<T>(Network<T>&, const Gradients<T>&,                       \
                                    const OptimizerConfig&, OptimizerState<T>&);

VSEG_NN_INSTANTIATE(float)
VSEG_NN_INSTANTIATE(double)

#undef VSEG_NN_INSTANTIATE

}  // namespace vseg::nn
