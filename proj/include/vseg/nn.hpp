#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vseg/rng.hpp"

namespace vseg::nn {

enum class Mode { train, infer };

// Architecture descriptor. The default is the production stack for 32x32
// patches: conv 5x5 (1->32), relu, pool 2x2, conv 5x5 (32->64), relu,
// pool 2x2, flatten 4096, dense 1024, relu, dropout, dense 2048, relu,
// dropout, dense C, softmax. Reduced variants (smaller input/widths) are
// used by the gradient-check harness.
struct NetConfig {
    int input_h = 32;
    int input_w = 32;
    int input_c = 1;
    int conv1_channels = 32;
    int conv2_channels = 64;
    int fc1_units = 1024;
    int fc2_units = 2048;
    int classes = 4;
    int kernel = 5;
    float dropout_rate = 0.5f;

    int pool1_h() const { return input_h / 2; }
    int pool1_w() const { return input_w / 2; }
    int pool2_h() const { return input_h / 4; }
    int pool2_w() const { return input_w / 4; }
    int flatten_len() const { return pool2_h() * pool2_w() * conv2_channels; }
    size_t input_len() const { return size_t(input_h) * input_w * input_c; }

    void validate() const;
    std::string shape_chain() const;  // human-readable stage sizes
    bool operator==(const NetConfig&) const = default;
};

// Height x width x channels, channels fastest.
template <typename T>
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(size_t(h_) * w_ * c_) {}
    T& at(int y, int x, int ch) { return v[(size_t(y) * w + x) * c + ch]; }
    T at(int y, int x, int ch) const { return v[(size_t(y) * w + x) * c + ch]; }
    size_t size() const { return v.size(); }
};

// Same-padding stride-1 convolution weights, stored so that the kernel
// tensor [ky][kx][in_c][out_c] is also the GEMM matrix [k*k*in_c][out_c].
template <typename T>
struct ConvLayer {
    int in_c = 0, out_c = 0, k = 5;
    std::vector<T> w;
    std::vector<T> b;
};

// y = W x + b with W stored [in_n][out_n] (row per input).
template <typename T>
struct DenseLayer {
    int in_n = 0, out_n = 0;
    std::vector<T> w;
    std::vector<T> b;
};

template <typename T>
struct Network {
    NetConfig cfg;
    ConvLayer<T> conv1, conv2;
    DenseLayer<T> fc1, fc2, fc3;
    bool debug_checks = false;  // scan stage outputs for NaN/Inf

    static Network he_init(const NetConfig& cfg, Rng& rng);
    void validate_shapes() const;
    size_t param_count() const;
};

// Parameter buffers in fixed traversal order (conv1 w/b, conv2 w/b, fc1..fc3
// w/b); checkpoints, optimizers and the gradient check all share it.
template <typename T>
std::vector<std::span<T>> param_views(Network<T>& net);
template <typename T>
std::vector<std::span<const T>> param_views(const Network<T>& net);

// Gradient buffers, shape-congruent with param_views order.
template <typename T>
struct Gradients {
    std::vector<std::vector<T>> g;
    static Gradients like(const Network<T>& net);
    void fill_zero();
};

// ---------------------------------------------------------------- layers --
// Single-sample operations; each delegates to the batched kernels used by
// training so tests exercise the production path.

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& in, const ConvLayer<T>& layer);

template <typename T>
struct ConvGrads {
    Tensor<T> dinput;
    std::vector<T> dw, db;
};
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& in, const ConvLayer<T>& layer,
                             const Tensor<T>& dout);

template <typename T>
struct PoolResult {
    Tensor<T> out;
    std::vector<int32_t> argmax;  // flat input index per output element
};
template <typename T>
PoolResult<T> maxpool2_forward(const Tensor<T>& in);
template <typename T>
Tensor<T> maxpool2_backward(int in_h, int in_w, int channels,
                            const std::vector<int32_t>& argmax, const Tensor<T>& dout);

template <typename T>
std::vector<T> dense_forward(std::span<const T> x, const DenseLayer<T>& layer);
template <typename T>
struct DenseGrads {
    std::vector<T> dx, dw, db;
};
template <typename T>
DenseGrads<T> dense_backward(std::span<const T> x, const DenseLayer<T>& layer,
                             std::span<const T> dy);

template <typename T>
std::vector<T> relu_forward(std::span<const T> x);
// Gate = indicator(x > 0); zero subgradient at exactly 0.
template <typename T>
std::vector<T> relu_backward(std::span<const T> x, std::span<const T> dy);

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); infer mode is the identity.
template <typename T>
struct DropoutResult {
    std::vector<T> out;
    std::vector<uint8_t> mask;  // 1 = kept
};
template <typename T>
DropoutResult<T> dropout_forward(std::span<const T> x, double rate, Mode mode, Rng& rng);

template <typename T>
struct SoftmaxXent {
    T loss;
    std::vector<T> probs;
    std::vector<T> dlogits;  // probs - onehot(label)
};
template <typename T>
SoftmaxXent<T> softmax_xent(std::span<const T> logits, int label);

// ------------------------------------------------------------- full net --

// Per-batch activations and scratch; reused across steps to avoid churn.
template <typename T>
struct BatchWork {
    int n = 0;
    std::vector<T> x0, a1, p1, a2, p2, f1, f2, logits, probs;
    std::vector<int32_t> idx1, idx2;
    std::vector<uint8_t> m1, m2;
    std::vector<T> d_fc, d_fc2, d_flat, d_conv, d_conv2, wt;
};

// x is [n][input_h][input_w][input_c]. Dropout masks are drawn from `rng`
// in a fixed order (required in train mode when dropout_rate > 0).
template <typename T>
void forward_batch(const Network<T>& net, const T* x, int n, Mode mode, Rng* rng,
                   BatchWork<T>& work);

// Mean softmax cross-entropy loss over the batch; fills `grads` with the
// mean gradients. Must follow a train-mode forward_batch on `work`, whose
// scratch buffers it reuses.
template <typename T>
double backward_batch(const Network<T>& net, BatchWork<T>& work, const uint8_t* labels,
                      Gradients<T>& grads);

template <typename T>
std::vector<T> forward(const Network<T>& net, const Tensor<T>& patch, Mode mode,
                       Rng* rng = nullptr);

template <typename T>
struct BackwardResult {
    double loss;
    Gradients<T> grads;
};
template <typename T>
BackwardResult<T> backward(const Network<T>& net, const Tensor<T>& patch, int label,
                           Rng& rng);

// Central-difference check of every parameter gradient on a 64-bit network
// with dropout disabled. Returns the max of |analytic - numeric| /
// max(1, |analytic|, |numeric|).
double gradient_check(Network<double>& net, const Tensor<double>& patch, int label,
                      double eps);

// -------------------------------------------------------------- training --

enum class OptKind { adam, sgd_momentum };

struct OptimizerConfig {
    OptKind kind = OptKind::adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.9;
};

template <typename T>
struct OptimizerState {
    std::vector<std::vector<T>> m, v;
    int64_t t = 0;
    static OptimizerState like(const Network<T>& net);
};

// Applies one update in the fixed param_views order.
template <typename T>
void optimizer_step(Network<T>& net, const Gradients<T>& grads, const OptimizerConfig& cfg,
                    OptimizerState<T>& state);

}  // namespace vseg::nn
