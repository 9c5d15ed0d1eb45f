#pragma once

#include <functional>
#include <string>

#include "specx/autograd.hpp"
#include "specx/backbone.hpp"

namespace specx {

struct ComplexityRow {
    std::string name;
    double params = 0.0;
    double flops = 0.0;  // 1 MAC = 1 FLOP
};

// Closed-form per-path costs of one dual-domain block plus its fusion stage,
// for a C1 -> C2 transform on an HxW grid with spatial kernel K and split
// ratio alpha. `total_*` evaluate the standalone total formulas; residuals
// record any gap between those and the row sums instead of assuming zero.
struct ComplexityReport {
    int c1 = 0, c2 = 0, h = 0, w = 0, k = 0;
    double alpha = 0.0;
    ComplexityRow baseline, local_local, local_global, global_local, spectral, dfa;
    double total_params = 0.0, total_flops = 0.0;
    double params_residual = 0.0, flops_residual = 0.0;

    double ddfc_params() const {
        return local_local.params + local_global.params + global_local.params + spectral.params;
    }
    double ddfc_flops() const {
        return local_local.flops + local_global.flops + global_local.flops + spectral.flops;
    }
};

ComplexityReport analytic_complexity(int c1, int c2, int h, int w, int k, double alpha);

std::string format_report(const ComplexityReport& r, bool csv);

struct ParamBreakdown {
    long long weights = 0;    // conv + linear kernels
    long long biases = 0;
    long long bn_affine = 0;  // gamma + beta
    long long bn_stats = 0;   // running mean/var, not trainable

    long long trainable() const { return weights + biases + bn_affine; }
};

ParamBreakdown walk_params(const ParamList& params);

// Closed-form trainable parameter count of a full model, computed from the
// config alone (an independent check against the constructed tensors).
long long expected_model_params(const ModelConfig& cfg);

// Median wall-clock nanoseconds of fn over `repeats` timed runs after
// `warmup` discarded ones (warmup is clamped up to 3).
double median_ns(const std::function<void()>& fn, int warmup, int repeats);

}  // namespace specx
