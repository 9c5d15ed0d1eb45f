#include "specx/backbone.hpp"

#include <stdexcept>

namespace specx {

namespace {

ConvParams make_conv(int c_in, int c_out, int k, int pad, int groups, Rng& rng) {
    ConvParams p;
    p.weight = Tensor({static_cast<std::size_t>(c_out), static_cast<std::size_t>(c_in / groups),
                       static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
    kaiming_uniform_fill(p.weight, static_cast<std::size_t>((c_in / groups) * k * k), rng);
    p.stride = 1;
    p.padding = pad;
    p.groups = groups;
    return p;
}

BnParams make_bn(int c) {
    BnParams p;
    p.gamma = Tensor::full({static_cast<std::size_t>(c)}, 1.0);
    p.beta = Tensor({static_cast<std::size_t>(c)});
    p.running_mean = Tensor({static_cast<std::size_t>(c)});
    p.running_var = Tensor::full({static_cast<std::size_t>(c)}, 1.0);
    return p;
}

void collect_conv(const std::string& prefix, ConvParams& p, ParamList& out) {
    out.push_back({prefix + ".weight", &p.weight, ParamKind::conv_weight});
    if (!p.bias.data.empty()) out.push_back({prefix + ".bias", &p.bias, ParamKind::bias});
}

void collect_bn(const std::string& prefix, BnParams& p, ParamList& out) {
    out.push_back({prefix + ".gamma", &p.gamma, ParamKind::bn_gamma});
    out.push_back({prefix + ".beta", &p.beta, ParamKind::bn_beta});
    out.push_back({prefix + ".running_mean", &p.running_mean, ParamKind::bn_stat});
    out.push_back({prefix + ".running_var", &p.running_var, ParamKind::bn_stat});
}

}  // namespace

SeparableConv::SeparableConv(int ci, int co, int k, Rng& rng) : c_in(ci), c_out(co), kernel(k) {
    if (ci <= 0 || co <= 0) throw std::invalid_argument("separable_conv: bad channel widths");
    if (k < 1 || k % 2 == 0)
        throw std::invalid_argument("separable_conv: kernel must be odd, got " + std::to_string(k));
    depthwise = make_conv(ci, ci, k, (k - 1) / 2, ci, rng);
    pointwise = make_conv(ci, co, 1, 0, 1, rng);
}

Var SeparableConv::forward(Tape& t, Var x) const {
    Var y = t.conv2d(x, t.leaf(const_cast<Tensor*>(&depthwise.weight)), {}, 1, depthwise.padding,
                     depthwise.groups);
    return t.conv2d(y, t.leaf(const_cast<Tensor*>(&pointwise.weight)), {}, 1, 0, 1);
}

void SeparableConv::collect(const std::string& prefix, ParamList& out) {
    collect_conv(prefix + ".depthwise", depthwise, out);
    collect_conv(prefix + ".pointwise", pointwise, out);
}

long long SeparableConv::param_count() const {
    return static_cast<long long>(depthwise.weight.numel()) +
           static_cast<long long>(pointwise.weight.numel());
}

SfBlock::SfBlock(const BlockConfig& c, const DdfcOptions& dopt, const DfaOptions& fopt, Rng& rng)
    : cfg(c),
      sep(c.c_in, c.c_in, c.kernel, rng),
      ddfc(c.c_in, c.c_out,
           c.alpha, [&] { DdfcOptions d = dopt; d.kernel = c.kernel; return d; }(), rng),
      dfa(local_channels(c.c_out, c.alpha), global_channels(c.c_out, c.alpha), c.c_out, fopt, rng) {
    if (c.pool < 1) throw std::invalid_argument("sfblock: pool stride must be >= 1");
}

Var SfBlock::forward(Tape& t, Var x, bool training, bool update_running,
                     const SpectralHooks* shooks, const DfaHooks* fhooks) {
    Var y = sep.forward(t, x);
    if (cfg.pool > 1) y = t.max_pool2d(y, cfg.pool, cfg.pool);
    Ddfc::Out branches = ddfc.forward(t, y, training, update_running, shooks);
    return dfa.forward(t, branches.local, branches.global, fhooks);
}

void SfBlock::collect(const std::string& prefix, ParamList& out) {
    sep.collect(prefix + ".sep", out);
    ddfc.collect(prefix + ".ddfc", out);
    dfa.collect(prefix + ".dfa", out);
}

BaselineBlock::BaselineBlock(const BlockConfig& c, Rng& rng)
    : cfg(c), sep(c.c_in, c.c_in, c.kernel, rng) {
    conv = make_conv(c.c_in, c.c_out, c.kernel, (c.kernel - 1) / 2, 1, rng);
    bn = make_bn(c.c_out);
}

BaselineBlock BaselineBlock::from_block(const SfBlock& b) {
    if (b.ddfc.c_gi != 0 || b.ddfc.c_go != 0)
        throw std::invalid_argument("baseline_block: source block has a global branch");
    BaselineBlock out;
    out.cfg = b.cfg;
    out.sep = b.sep;
    out.conv = b.ddfc.ll;
    out.bn = b.ddfc.bn_l;
    return out;
}

Var BaselineBlock::forward(Tape& t, Var x, bool training, bool update_running) {
    Var y = sep.forward(t, x);
    if (cfg.pool > 1) y = t.max_pool2d(y, cfg.pool, cfg.pool);
    y = t.conv2d(y, t.leaf(&conv.weight), {}, conv.stride, conv.padding, conv.groups);
    y = t.batch_norm(y, t.leaf(&bn.gamma), t.leaf(&bn.beta), &bn, training, update_running);
    return t.relu(y);
}

void BaselineBlock::collect(const std::string& prefix, ParamList& out) {
    sep.collect(prefix + ".sep", out);
    collect_conv(prefix + ".conv", conv, out);
    collect_bn(prefix + ".bn", bn, out);
}

void ModelConfig::validate() const {
    if (in_channels < 1 || in_h < 1 || in_w < 1)
        throw std::invalid_argument("model: bad input dims");
    if (stem_channels < 1) throw std::invalid_argument("model: bad stem width");
    if (classes < 2) throw std::invalid_argument("model: need at least 2 classes");
    if (blocks.empty()) throw std::invalid_argument("model: no blocks");
    if (dtype != "f64" && dtype != "f32")
        throw std::invalid_argument("model: dtype must be f64 or f32, got " + dtype);
    int h = in_h, w = in_w;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const BlockConfig& b = blocks[i];
        const std::string at = "model: block " + std::to_string(i);
        int expect = i == 0 ? stem_channels : blocks[i - 1].c_out;
        if (b.c_in != expect)
            throw std::invalid_argument(at + " input width " + std::to_string(b.c_in) +
                                        " breaks the chain (expected " + std::to_string(expect) +
                                        ")");
        if (b.c_out < 1) throw std::invalid_argument(at + ": bad output width");
        if (b.kernel < 1 || b.kernel % 2 == 0)
            throw std::invalid_argument(at + ": kernel must be odd");
        if (b.pool < 1) throw std::invalid_argument(at + ": bad pool stride");
        if (!(b.alpha >= 0.0 && b.alpha <= 1.0))
            throw std::invalid_argument(at + ": alpha outside [0,1]");
        h /= b.pool;
        w /= b.pool;
        if (h < 1 || w < 1)
            throw std::invalid_argument(at + " pools the feature map away (input " +
                                        std::to_string(in_h) + "x" + std::to_string(in_w) + ")");
    }
}

void ModelConfig::set_alpha(double a) {
    for (BlockConfig& b : blocks) b.alpha = a;
}

ModelConfig preset_model(const std::string& name) {
    ModelConfig m;
    if (name == "desk") {
        m.stem_channels = 16;
        m.blocks = {{16, 32, 3, 2, 0.5}, {32, 64, 3, 2, 0.5}, {64, 64, 3, 2, 0.5},
                    {64, 64, 3, 2, 0.5}};
    } else if (name == "desk-small") {
        m.stem_channels = 8;
        m.blocks = {{8, 16, 3, 2, 0.5}, {16, 32, 3, 2, 0.5}, {32, 32, 3, 2, 0.5}};
    } else if (name == "xception-full") {
        m.in_h = m.in_w = 224;
        m.stem_channels = 64;
        m.blocks = {{64, 128, 3, 2, 0.5},  {128, 256, 3, 2, 0.5}, {256, 728, 3, 2, 0.5},
                    {728, 728, 3, 1, 0.5}, {728, 728, 3, 1, 0.5}, {728, 728, 3, 1, 0.5},
                    {728, 728, 3, 1, 0.5}, {728, 728, 3, 1, 0.5}, {728, 728, 3, 1, 0.5},
                    {728, 728, 3, 1, 0.5}, {728, 728, 3, 1, 0.5}, {728, 1024, 3, 2, 0.5},
                    {1024, 2048, 3, 1, 0.5}};
    } else {
        throw std::invalid_argument("unknown model preset: " + name);
    }
    return m;
}

SpecXNet::SpecXNet(const ModelConfig& c) : cfg(c) {
    cfg.validate();
    Rng rng(hash_mix(cfg.seed, 0x6d6f64656c, 0));  // init stream, decoupled from data order
    stem = make_conv(cfg.in_channels, cfg.stem_channels, 3, 1, 1, rng);
    stem_bn = make_bn(cfg.stem_channels);
    blocks.reserve(cfg.blocks.size());
    int h = cfg.in_h, w = cfg.in_w;  // stem is stride-1, padding-preserving
    for (const BlockConfig& b : cfg.blocks) {
        h /= b.pool;
        w /= b.pool;
        DdfcOptions dopt = cfg.ddfc;
        if (dopt.spectral.per_bin) {
            // bin-resolved modulation weights are sized to this block's spectrum
            const int s = dopt.spectral.stride;
            dopt.spectral.per_bin_h = static_cast<std::size_t>((h - 1) / s + 1);
            dopt.spectral.per_bin_w = static_cast<std::size_t>((w - 1) / s + 1);
        }
        blocks.emplace_back(b, dopt, cfg.dfa, rng);
    }
    const int last = cfg.blocks.back().c_out;
    fc_w = Tensor({static_cast<std::size_t>(cfg.classes), static_cast<std::size_t>(last)});
    kaiming_uniform_fill(fc_w, static_cast<std::size_t>(last), rng);
    fc_b = Tensor({static_cast<std::size_t>(cfg.classes)});
}

Var SpecXNet::forward(Tape& t, Var images, bool training, bool update_running,
                      const SpectralHooks* shooks, const DfaHooks* fhooks) {
    const Tensor& x = t.val(images);
    require_rank(x, 4, "model");
    if (x.shape[1] != static_cast<std::size_t>(cfg.in_channels) ||
        x.shape[2] != static_cast<std::size_t>(cfg.in_h) ||
        x.shape[3] != static_cast<std::size_t>(cfg.in_w))
        throw std::invalid_argument("model: input " + shape_str(x.shape) + " does not match [" +
                                    std::to_string(cfg.in_channels) + "," +
                                    std::to_string(cfg.in_h) + "," + std::to_string(cfg.in_w) +
                                    "]");
    Var y = t.conv2d(images, t.leaf(&stem.weight), {}, 1, stem.padding, 1);
    y = t.batch_norm(y, t.leaf(&stem_bn.gamma), t.leaf(&stem_bn.beta), &stem_bn, training,
                     update_running);
    y = t.relu(y);
    for (SfBlock& b : blocks) y = b.forward(t, y, training, update_running, shooks, fhooks);
    Var z = t.global_avg_pool(y);
    return t.linear(z, t.leaf(&fc_w), t.leaf(&fc_b));
}

ParamList SpecXNet::params() {
    ParamList out;
    collect_conv("stem", stem, out);
    collect_bn("stem_bn", stem_bn, out);
    for (std::size_t i = 0; i < blocks.size(); ++i)
        blocks[i].collect("block" + std::to_string(i), out);
    out.push_back({"fc.weight", &fc_w, ParamKind::linear_weight});
    out.push_back({"fc.bias", &fc_b, ParamKind::bias});
    return out;
}

long long SpecXNet::param_count() {
    long long n = 0;
    for (const ParamRef& p : params())
        if (is_trainable(p.kind)) n += static_cast<long long>(p.tensor->numel());
    return n;
}

}  // namespace specx
