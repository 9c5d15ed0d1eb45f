#pragma once

#include <optional>
#include <string>

#include "specx/autograd.hpp"
#include "specx/nn.hpp"
#include "specx/rng.hpp"
#include "specx/tensor.hpp"

namespace specx {

struct DfaOptions {
    int reduction = 4;   // hidden width = max(min_hidden, descriptor_width / reduction)
    int min_hidden = 8;
};

// Test hooks. force_attention replaces both attention maps with a constant;
// residual=false drops the identity term so the modulated branch is y*A alone.
// The capture pointers, when set, receive copies of the attention maps and
// fusion weights actually used.
struct DfaHooks {
    std::optional<double> force_attention;
    bool residual = true;
    Tensor* capture_a_g = nullptr;  // [N, c_l], scales the local branch
    Tensor* capture_a_l = nullptr;  // [N, c_g], scales the global branch
    Tensor* capture_gamma = nullptr;  // [N, 2]
};

// Cross-branch channel attention plus softmax-gated convex fusion. Each branch
// is modulated by a map computed from the *other* branch's pooled descriptor,
// then both are projected to c_out and blended with per-example weights that
// sum to one. When one branch has zero width the module is a passthrough and
// owns no parameters.
struct Dfa {
    int c_l = 0, c_g = 0, c_out = 0;
    int h_a = 0, h_b = 0;  // hidden widths of the two attention stacks
    DfaOptions opt;

    Tensor wa1, ba1, wa2, ba2;  // z_g -> A_g (c_l outputs)
    Tensor wb1, bb1, wb2, bb2;  // z_l -> A_l (c_g outputs)
    Tensor wf, bf;              // [z_l;z_g] -> 2 fusion logits
    ConvParams proj_l, proj_g;  // 1x1 projections to c_out before fusion

    Dfa() = default;
    Dfa(int c_l, int c_g, int c_out, const DfaOptions& opt, Rng& rng);

    bool active() const { return c_l > 0 && c_g > 0; }

    // y_l: [N,c_l,H,W] or invalid when c_l==0; y_g likewise. Branches may have
    // different spatial grids; the smaller is bilinear-resized before fusion.
    Var forward(Tape& t, Var y_l, Var y_g, const DfaHooks* hooks = nullptr);

    void collect(const std::string& prefix, ParamList& out);
    long long param_count() const;
};

}  // namespace specx
