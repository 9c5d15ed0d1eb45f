#pragma once

#include <cstddef>
#include <vector>

#include "specx/tensor.hpp"

namespace specx {

// Row-major C[M,N] (+)= A[M,K] * B[K,N]. The workhorse behind conv/linear.
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, bool accumulate);

struct ConvParams {
    Tensor weight;  // [Cout, Cin/groups, K, K]
    Tensor bias;    // [Cout], empty means no bias
    int stride = 1;
    int padding = 0;
    int groups = 1;
};

// 2-D cross-correlation (no kernel flip), zero padding, square kernel.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding,
              int groups);
Tensor conv2d(const Tensor& x, const ConvParams& p);
// Any of gx/gw/gb may be null; gradients accumulate into the given tensors.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int stride,
                     int padding, int groups, Tensor* gx, Tensor* gw, Tensor* gb);
void conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& gout, Tensor* gx,
                     Tensor* gw, Tensor* gb);

struct BnParams {
    Tensor gamma, beta;                // [C]
    Tensor running_mean, running_var;  // [C], biased variance
    double eps = 1e-5;
    double momentum = 0.1;
};

struct BnSaved {
    std::vector<double> mean, inv_std;  // statistics actually used by the forward
    bool training = true;
};

// training=true normalizes with batch statistics over (N,H,W) per channel;
// update_running folds them into the running estimates (skippable so repeated
// finite-difference evaluations stay side-effect free).
Tensor batch_norm(const Tensor& x, BnParams& p, bool training, bool update_running,
                  BnSaved* saved = nullptr);
void batch_norm_backward(const Tensor& x, const BnParams& p, const BnSaved& s, const Tensor& gout,
                         Tensor* gx, Tensor* ggamma, Tensor* gbeta);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);

struct PoolSaved {
    std::vector<std::size_t> argmax;  // flat (h*W+w) source index per output cell
};

// Non-overlapping when stride==window; ties resolve to the first maximum in
// row-major scan order.
Tensor max_pool2d(const Tensor& x, int window, int stride, PoolSaved* saved = nullptr);

// Output cell (i,j) averages input rows [floor(i*H/oh), ceil((i+1)*H/oh)) etc.
Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t oh, std::size_t ow);
void adaptive_avg_pool2d_backward(const Tensor& gout, std::size_t h, std::size_t w, Tensor* gx);

// Half-pixel sampling (align_corners=false) with edge clamping.
Tensor bilinear_resize(const Tensor& x, std::size_t oh, std::size_t ow);
void bilinear_resize_backward(const Tensor& gout, std::size_t h, std::size_t w, Tensor* gx);

// Crop offsets use floor((in-out)/2) per axis.
Tensor center_crop(const Tensor& x, std::size_t oh, std::size_t ow);
void center_crop_backward(const Tensor& gout, std::size_t h, std::size_t w, Tensor* gx);

// y[n,o] = sum_i x[n,i] w[o,i] + b[o]; w is [Dout, Din], b [Dout] or empty.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx, Tensor* gw,
                     Tensor* gb);

// Global average pool [N,C,H,W] -> [N,C].
Tensor global_avg_pool(const Tensor& x);

}  // namespace specx
