#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "specx/nn.hpp"
#include "specx/tensor.hpp"

namespace specx {

enum class ParamKind { conv_weight, linear_weight, bias, bn_gamma, bn_beta, bn_stat };

inline bool is_trainable(ParamKind k) { return k != ParamKind::bn_stat; }
inline bool is_weight(ParamKind k) {
    return k == ParamKind::conv_weight || k == ParamKind::linear_weight;
}

struct ParamRef {
    std::string name;
    Tensor* tensor;
    ParamKind kind;
};
using ParamList = std::vector<ParamRef>;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Dynamically recorded operation graph. Creation order is a topological order,
// so backward() walks nodes in reverse creation order exactly once. A tape is
// single use: record, backward, discard.
class Tape {
  public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf bound to a parameter; gradients accumulate into param->grad.
    Var leaf(Tensor* param);
    // Untracked constant (inputs, labels-as-data, ...).
    Var input(Tensor value);

    const Tensor& val(Var v) const;
    const Tensor& grad_of(Var v) const;

    // Seeds d(loss)/d(loss)=1, zeroes the grads of every registered leaf
    // parameter, then accumulates exact reverse-mode gradients into them.
    // Requires a scalar loss; a consumed tape refuses a second backward.
    void backward(Var loss);

    bool grad_enabled() const { return grad_enabled_; }
    void set_check_finite(bool on) { check_finite_ = on; }

    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var sum(Var a);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var softmax(Var a, std::size_t axis);
    Var linear(Var x, Var w, Var b = {});
    Var conv2d(Var x, Var w, Var b, int stride, int padding, int groups);
    Var batch_norm(Var x, Var gamma, Var beta, BnParams* state, bool training, bool update_running);
    Var max_pool2d(Var x, int window, int stride);
    Var adaptive_avg_pool2d(Var x, std::size_t oh, std::size_t ow);
    Var bilinear_resize(Var x, std::size_t oh, std::size_t ow);
    Var center_crop(Var x, std::size_t oh, std::size_t ow);
    Var global_avg_pool(Var x);
    Var concat_cols(Var a, Var b);
    Var concat_channels(Var a, Var b);
    Var slice_channels(Var x, std::size_t c0, std::size_t c1);
    // [N,C,H,W] -> [N,2C,H,W]: channels [0,C) real, [C,2C) imaginary parts of
    // the unnormalized per-channel 2-D DFT.
    Var fft2_stack(Var x);
    // [N,2C,H,W] stacked spectrum -> [N,C,H,W] real part of the 1/(HW) inverse.
    Var ifft2_real(Var x);
    Var fft_shift(Var x, bool inverse);
    // y[N,C,H,W] * a[N,C], broadcast over the spatial grid.
    Var channel_scale(Var y, Var a);
    // x[N,C,H,W] * w[C,H,W], broadcast over the batch (per-bin spectral weight).
    Var mul_bcast_chw(Var x, Var w);
    // gamma[N,2]: out = gamma[:,0]*a + gamma[:,1]*b.
    Var convex_fuse(Var a, Var b, Var gamma);
    // Mean negative log-likelihood over the batch via log-sum-exp.
    Var cross_entropy(Var logits, std::vector<int> labels);

  private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated during backward for needs_grad nodes
        std::function<void(Tape&)> bwd;  // adds into input node grads / leaf params
        Tensor* param = nullptr;
        const char* op = "";
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::vector<int> leaves_;
    bool grad_enabled_;
    bool consumed_ = false;
    bool check_finite_ = false;

    Var make(const char* op, Tensor value, std::initializer_list<Var> inputs,
             std::function<void(Tape&)> bwd);
    Node& node(Var v);
    const Node& node(Var v) const;
    bool needs(Var v) const { return v.valid() && node(v).needs_grad; }
    // Gradient buffer of a node, or null when that node does not track grads.
    Tensor* gbuf(Var v) { return needs(v) ? &node(v).grad : nullptr; }
};

struct GradcheckOptions {
    double step = 1e-5;
    std::size_t samples_per_param = 200;
    double tolerance = 1e-4;
    // Retry steps tried when the base-step reading disagrees: smaller steps
    // move a stencil off a ReLU/argmax boundary; larger steps lift a
    // vanishing-gradient reading above the 64-bit resolution of the loss
    // difference (|eps·loss/2h| can exceed tol·|grad| when |grad| ~ 1e-7).
    std::size_t refinements = 7;
};

struct GradcheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t coords_checked = 0;
    // Coordinates where only a retried step size gave a valid reading. A
    // wrong analytic gradient disagrees at every step size, so retries never
    // mask a backward error.
    std::size_t coords_refined = 0;
    bool pass = false;
};

// eval(true) must rebuild the graph, run backward and return the loss with
// parameter gradients populated; eval(false) only needs the loss value. The
// evaluation must be deterministic (fixed batch, update_running=false).
// Central differences: (f(t+h)-f(t-h))/(2h); relative error uses
// max(|analytic|,|numeric|,1e-8) as denominator.
GradcheckReport gradcheck(const std::function<double(bool with_grad)>& eval,
                          const ParamList& params, std::uint64_t seed,
                          const GradcheckOptions& opt = {});

}  // namespace specx
