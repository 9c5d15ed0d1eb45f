#include "specx/gradcheck_targets.hpp"

#include <stdexcept>

#include "specx/backbone.hpp"
#include "specx/ddfc.hpp"
#include "specx/dfa.hpp"
#include "specx/rng.hpp"

namespace specx {

namespace {

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double lo, double hi) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

ParamList trainable(const ParamList& all) {
    ParamList out;
    for (const ParamRef& p : all)
        if (is_trainable(p.kind)) out.push_back(p);
    return out;
}

// Probe-weighted sum keeps the scalar loss sensitive to every output element.
Var probed_sum(Tape& t, Var out, const Tensor& probe) {
    return t.sum(t.mul(out, t.input(probe)));
}

NamedGradcheck check_ddfc(std::uint64_t seed) {
    Rng rng(hash_mix(seed, 1, 0));
    Ddfc ddfc(8, 8, 0.5, {}, rng);
    Tensor x = random_tensor({2, 8, 8, 8}, rng, 0.0, 1.0);
    Tensor probe_l = random_tensor({2, 4, 8, 8}, rng, -1.0, 1.0);
    Tensor probe_g = random_tensor({2, 4, 8, 8}, rng, -1.0, 1.0);
    ParamList params;
    ddfc.collect("ddfc", params);
    auto eval = [&](bool with_grad) {
        Tape t(with_grad);
        Ddfc::Out out = ddfc.forward(t, t.input(x), true, false);
        Var loss = t.add(probed_sum(t, out.local, probe_l), probed_sum(t, out.global, probe_g));
        if (with_grad) t.backward(loss);
        return t.val(loss).data[0];
    };
    return {"ddfc", gradcheck(eval, trainable(params), hash_mix(seed, 1, 1))};
}

NamedGradcheck check_dfa(std::uint64_t seed) {
    Rng rng(hash_mix(seed, 2, 0));
    Dfa dfa(4, 4, 8, {}, rng);
    Tensor y_l = random_tensor({2, 4, 8, 8}, rng, 0.0, 1.0);
    Tensor y_g = random_tensor({2, 4, 8, 8}, rng, 0.0, 1.0);
    Tensor probe = random_tensor({2, 8, 8, 8}, rng, -1.0, 1.0);
    ParamList params;
    dfa.collect("dfa", params);
    auto eval = [&](bool with_grad) {
        Tape t(with_grad);
        Var out = dfa.forward(t, t.input(y_l), t.input(y_g));
        Var loss = probed_sum(t, out, probe);
        if (with_grad) t.backward(loss);
        return t.val(loss).data[0];
    };
    return {"dfa", gradcheck(eval, trainable(params), hash_mix(seed, 2, 1))};
}

NamedGradcheck check_sfblock(std::uint64_t seed) {
    Rng rng(hash_mix(seed, 3, 0));
    SfBlock block({8, 8, 3, 2, 0.5}, {}, {}, rng);
    Tensor x = random_tensor({2, 8, 16, 16}, rng, 0.0, 1.0);
    Tensor probe = random_tensor({2, 8, 8, 8}, rng, -1.0, 1.0);
    ParamList params;
    block.collect("block", params);
    auto eval = [&](bool with_grad) {
        Tape t(with_grad);
        Var out = block.forward(t, t.input(x), true, false);
        Var loss = probed_sum(t, out, probe);
        if (with_grad) t.backward(loss);
        return t.val(loss).data[0];
    };
    return {"sfblock", gradcheck(eval, trainable(params), hash_mix(seed, 3, 1))};
}

NamedGradcheck check_model(std::uint64_t seed) {
    ModelConfig cfg = preset_model("desk");
    cfg.seed = hash_mix(seed, 4, 0);
    SpecXNet model(cfg);
    Rng rng(hash_mix(seed, 4, 2));
    Tensor x = random_tensor({1, 3, 64, 64}, rng, 0.0, 1.0);
    std::vector<int> labels = {1};
    ParamList params = model.params();
    auto eval = [&](bool with_grad) {
        Tape t(with_grad);
        Var logits = model.forward(t, t.input(x), true, false);
        Var loss = t.cross_entropy(logits, labels);
        if (with_grad) t.backward(loss);
        return t.val(loss).data[0];
    };
    return {"model", gradcheck(eval, trainable(params), hash_mix(seed, 4, 1))};
}

}  // namespace

std::vector<NamedGradcheck> run_gradcheck_targets(const std::string& group, std::uint64_t seed) {
    std::vector<NamedGradcheck> out;
    if (group == "ddfc" || group == "all") out.push_back(check_ddfc(seed));
    if (group == "dfa" || group == "all") out.push_back(check_dfa(seed));
    if (group == "backbone" || group == "all") {
        out.push_back(check_sfblock(seed));
        out.push_back(check_model(seed));
    }
    if (out.empty())
        throw std::invalid_argument("gradcheck: unknown module group " + group +
                                    " (use all|ddfc|dfa|backbone)");
    return out;
}

}  // namespace specx
