#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specx/autograd.hpp"
#include "specx/tensor.hpp"

namespace specx {

// Warmup ramps linearly to base_lr, cosine decays toward zero over the
// remaining horizon, and each passed decay epoch multiplies by decay_factor.
struct ScheduleSpec {
    double base_lr = 0.1;
    int warmup_epochs = 5;
    int horizon = 90;
    std::vector<int> decay_epochs = {30, 60, 80};
    double decay_factor = 0.1;

    void validate() const;
};

double lr_at(int epoch, const ScheduleSpec& spec);

// Sum of lambda*|w|^2 over conv/linear weights only; biases and norm affine
// terms are exempt.
double l2_penalty(const ParamList& params, double lambda);
// Adds the matching gradient 2*lambda*w into each weight's grad buffer.
void add_l2_gradient(const ParamList& params, double lambda);

class SgdMomentum {
  public:
    SgdMomentum(const ParamList& params, double momentum);
    // v = momentum*v - lr*grad; param += v. Throws if a trainable parameter
    // has no populated gradient.
    void step(const ParamList& params, double lr);

  private:
    double momentum_;
    std::vector<Tensor> velocity_;
    std::vector<std::size_t> sizes_;  // shape guard against list drift
};

class Adam {
  public:
    Adam(const ParamList& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const ParamList& params, double lr);

  private:
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Tensor> m_, v_;
    std::vector<std::size_t> sizes_;
};

}  // namespace specx
