#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specx/autograd.hpp"
#include "specx/ddfc.hpp"
#include "specx/dfa.hpp"
#include "specx/nn.hpp"
#include "specx/rng.hpp"
#include "specx/tensor.hpp"

namespace specx {

// Depthwise k*k followed by pointwise 1x1, both bias-free.
// Parameter count: c_in*k^2 + c_in*c_out.
struct SeparableConv {
    int c_in = 0, c_out = 0, kernel = 3;
    ConvParams depthwise, pointwise;

    SeparableConv() = default;
    SeparableConv(int c_in, int c_out, int kernel, Rng& rng);
    Var forward(Tape& t, Var x) const;
    void collect(const std::string& prefix, ParamList& out);
    long long param_count() const;
};

struct BlockConfig {
    int c_in = 0, c_out = 0;
    int kernel = 3;
    int pool = 2;  // max-pool window == stride; 1 disables pooling
    double alpha = 0.5;
};

// One backbone stage: separable conv (width-preserving), max-pool, dual-domain
// coupler, attention fusion. Output width c_out, spatial dims floor-divided by
// the pool stride.
struct SfBlock {
    BlockConfig cfg;
    SeparableConv sep;
    Ddfc ddfc;
    Dfa dfa;

    SfBlock(const BlockConfig& cfg, const DdfcOptions& dopt, const DfaOptions& fopt, Rng& rng);
    Var forward(Tape& t, Var x, bool training, bool update_running,
                const SpectralHooks* shooks = nullptr, const DfaHooks* fhooks = nullptr);
    void collect(const std::string& prefix, ParamList& out);
};

// Plain comparison stage: separable conv, max-pool, dense conv + BN + ReLU.
// from_block() shares an alpha=0 SfBlock's weights so the two paths can be
// compared bit-for-bit.
struct BaselineBlock {
    BlockConfig cfg;
    SeparableConv sep;
    ConvParams conv;
    BnParams bn;

    BaselineBlock(const BlockConfig& cfg, Rng& rng);
    static BaselineBlock from_block(const SfBlock& b);
    Var forward(Tape& t, Var x, bool training, bool update_running);
    void collect(const std::string& prefix, ParamList& out);

  private:
    BaselineBlock() = default;
};

struct ModelConfig {
    int in_channels = 3, in_h = 64, in_w = 64;
    int stem_channels = 16;
    int classes = 2;
    std::vector<BlockConfig> blocks;
    DdfcOptions ddfc;  // per-block kernel overrides ddfc.kernel
    DfaOptions dfa;
    std::string dtype = "f64";  // checkpoint payload width: f64 | f32
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument on the first violation
    void set_alpha(double a);  // applies one split ratio to every block
};

ModelConfig preset_model(const std::string& name);  // desk | desk-small | xception-full

struct SpecXNet {
    ModelConfig cfg;
    ConvParams stem;
    BnParams stem_bn;
    std::vector<SfBlock> blocks;
    Tensor fc_w, fc_b;

    explicit SpecXNet(const ModelConfig& cfg);

    // images: [N,C,H,W] matching cfg input dims. Returns logits [N,classes].
    Var forward(Tape& t, Var images, bool training, bool update_running,
                const SpectralHooks* shooks = nullptr, const DfaHooks* fhooks = nullptr);

    ParamList params();
    long long param_count();
};

}  // namespace specx
