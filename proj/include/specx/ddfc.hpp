#pragma once

#include <optional>
#include <string>
#include <utility>

#include "specx/autograd.hpp"
#include "specx/rng.hpp"

namespace specx {

// Channel split: trailing floor(alpha*C) channels feed the global (spectral)
// branch, the leading remainder stays local.
int global_channels(int c, double alpha);
int local_channels(int c, double alpha);

std::pair<Tensor, Tensor> split_channels(const Tensor& x, double alpha);
Tensor merge_channels(const Tensor& local, const Tensor& global);

struct SpectralOptions {
    int stride = 1;          // pre-stage downsampling; output is resized back
    double pool_ratio = 0.5; // AAP target of the low-frequency residual stream
    double crop_ratio = 0.5; // retained fraction of the shifted residual spectrum
    bool per_bin = false;    // per-frequency-bin modulation weight instead of 1x1 mixing
    std::size_t per_bin_h = 0, per_bin_w = 0;  // spectrum dims, required when per_bin
};

struct SpectralHooks {
    bool identity_modulation = false;  // bypass W_g/BN/ReLU between the transforms
    bool skip_residual = false;        // drop the low-frequency residual stream
};

// Global-branch transform: 1x1 pre-stage to c_out/2 channels, frequency-domain
// modulation on the stacked re/im representation, low-frequency residual, and a
// 1x1 post-stage back to c_out. Weight count is c_in*c_out/2 + c_out^2 + c_out^2/2,
// which is what the analytic accounting expects of the spectral path.
struct SpectralTransform {
    int c_in = 0, c_out = 0, mid = 0;
    SpectralOptions opt;
    ConvParams pre, wg, post;
    Tensor wg_bin;  // [2*mid, per_bin_h, per_bin_w] when opt.per_bin
    BnParams pre_bn, wg_bn;

    SpectralTransform() = default;
    SpectralTransform(int c_in, int c_out, const SpectralOptions& o, Rng& rng);

    Var forward(Tape& t, Var x, bool training, bool update_running,
                const SpectralHooks* hooks = nullptr);
    void collect(const std::string& prefix, ParamList& out);
    long long weight_count() const;  // conv/modulation weights only
};

struct DdfcOptions {
    int kernel = 3;  // odd; padding preserves spatial dims
    bool cross_paths = true;
    SpectralOptions spectral;
};

// Dual-domain convolution: four paths between the local and global channel
// groups. Either output branch may be absent for degenerate alpha.
struct Ddfc {
    int c_in = 0, c_out = 0;
    double alpha = 0.5;
    int c_li = 0, c_gi = 0, c_lo = 0, c_go = 0;
    DdfcOptions opt;
    ConvParams ll, lg, gl;  // weight tensors empty when a path is absent
    std::optional<SpectralTransform> spec;
    BnParams bn_l, bn_g;

    Ddfc() = default;
    Ddfc(int c_in, int c_out, double alpha, const DdfcOptions& o, Rng& rng);

    struct Out {
        Var local;   // invalid when c_lo == 0
        Var global;  // invalid when c_go == 0
    };
    Out forward(Tape& t, Var x, bool training, bool update_running,
                const SpectralHooks* hooks = nullptr);
    void collect(const std::string& prefix, ParamList& out);
    long long weight_count() const;
};

}  // namespace specx
