#include "specx/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace specx {

void ScheduleSpec::validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("schedule: base_lr must be positive");
    if (warmup_epochs < 0 || horizon <= warmup_epochs)
        throw std::invalid_argument("schedule: need 0 <= warmup < horizon");
    if (!(decay_factor > 0.0 && decay_factor < 1.0))
        throw std::invalid_argument("schedule: decay factor must be in (0,1)");
}

double lr_at(int epoch, const ScheduleSpec& spec) {
    spec.validate();
    if (epoch < 0) throw std::invalid_argument("schedule: negative epoch");
    double lr;
    if (epoch < spec.warmup_epochs) {
        lr = spec.base_lr * static_cast<double>(epoch + 1) / static_cast<double>(spec.warmup_epochs);
    } else {
        double p = static_cast<double>(epoch - spec.warmup_epochs) /
                   static_cast<double>(spec.horizon - spec.warmup_epochs);
        if (p > 1.0) p = 1.0;
        lr = spec.base_lr * 0.5 * (1.0 + std::cos(M_PI * p));
    }
    for (int d : spec.decay_epochs)
        if (epoch >= d) lr *= spec.decay_factor;
    return lr;
}

double l2_penalty(const ParamList& params, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("l2_penalty: negative lambda");
    if (lambda == 0.0) return 0.0;
    double s = 0.0;
    for (const ParamRef& p : params) {
        if (!is_weight(p.kind)) continue;
        for (double v : p.tensor->data) s += v * v;
    }
    return lambda * s;
}

void add_l2_gradient(const ParamList& params, double lambda) {
    if (lambda <= 0.0) return;
    for (const ParamRef& p : params) {
        if (!is_weight(p.kind)) continue;
        p.tensor->ensure_grad();
        for (std::size_t i = 0; i < p.tensor->data.size(); ++i)
            p.tensor->grad[i] += 2.0 * lambda * p.tensor->data[i];
    }
}

namespace {

void require_grads(const ParamRef& p, std::size_t expect) {
    if (!is_trainable(p.kind)) return;
    if (p.tensor->grad.size() != expect)
        throw std::runtime_error("optimizer: parameter " + p.name + " has no gradient");
}

}  // namespace

SgdMomentum::SgdMomentum(const ParamList& params, double momentum) : momentum_(momentum) {
    if (!(momentum >= 0.0 && momentum <= 1.0))
        throw std::invalid_argument("sgd: momentum outside [0,1]");
    for (const ParamRef& p : params) {
        velocity_.emplace_back(p.tensor->shape);
        sizes_.push_back(p.tensor->numel());
    }
}

void SgdMomentum::step(const ParamList& params, double lr) {
    if (params.size() != sizes_.size())
        throw std::invalid_argument("sgd: parameter list changed since construction");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        if (!is_trainable(p.kind)) continue;
        if (p.tensor->numel() != sizes_[i])
            throw std::invalid_argument("sgd: parameter " + p.name + " changed shape");
        require_grads(p, sizes_[i]);
        Tensor& v = velocity_[i];
        for (std::size_t j = 0; j < sizes_[i]; ++j) {
            v.data[j] = momentum_ * v.data[j] - lr * p.tensor->grad[j];
            p.tensor->data[j] += v.data[j];
        }
    }
}

Adam::Adam(const ParamList& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
        throw std::invalid_argument("adam: bad hyperparameters");
    for (const ParamRef& p : params) {
        m_.emplace_back(p.tensor->shape);
        v_.emplace_back(p.tensor->shape);
        sizes_.push_back(p.tensor->numel());
    }
}

void Adam::step(const ParamList& params, double lr) {
    if (params.size() != sizes_.size())
        throw std::invalid_argument("adam: parameter list changed since construction");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParamRef& p = params[i];
        if (!is_trainable(p.kind)) continue;
        require_grads(p, sizes_[i]);
        for (std::size_t j = 0; j < sizes_[i]; ++j) {
            const double g = p.tensor->grad[j];
            m_[i].data[j] = beta1_ * m_[i].data[j] + (1.0 - beta1_) * g;
            v_[i].data[j] = beta2_ * v_[i].data[j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i].data[j] / c1;
            const double vhat = v_[i].data[j] / c2;
            p.tensor->data[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace specx
