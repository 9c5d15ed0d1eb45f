#include "specx/ddfc.hpp"

#include <cmath>
#include <stdexcept>

namespace specx {

namespace {

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("split: alpha " + std::to_string(alpha) + " outside [0,1]");
}

ConvParams make_conv(int c_in, int c_out, int k, int stride, int pad, int groups, bool bias,
                     Rng& rng) {
    ConvParams p;
    p.weight = Tensor({static_cast<std::size_t>(c_out), static_cast<std::size_t>(c_in / groups),
                       static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
    kaiming_uniform_fill(p.weight, static_cast<std::size_t>((c_in / groups) * k * k), rng);
    if (bias) p.bias = Tensor({static_cast<std::size_t>(c_out)});
    p.stride = stride;
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

int global_channels(int c, double alpha) {
    check_alpha(alpha);
    if (c < 0) throw std::invalid_argument("split: negative channel count");
    return static_cast<int>(std::floor(alpha * static_cast<double>(c)));
}

int local_channels(int c, double alpha) { return c - global_channels(c, alpha); }

std::pair<Tensor, Tensor> split_channels(const Tensor& x, double alpha) {
    require_rank(x, 4, "split");
    const int c = static_cast<int>(x.shape[1]);
    const int cg = global_channels(c, alpha), cl = c - cg;
    const std::size_t n = x.shape[0], hw = x.shape[2] * x.shape[3];
    Tensor xl({n, static_cast<std::size_t>(cl), x.shape[2], x.shape[3]});
    Tensor xg({n, static_cast<std::size_t>(cg), x.shape[2], x.shape[3]});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(x.data.begin() + (i * c) * hw, x.data.begin() + (i * c + cl) * hw,
                  xl.data.begin() + i * cl * hw);
        std::copy(x.data.begin() + (i * c + cl) * hw, x.data.begin() + (i + 1) * c * hw,
                  xg.data.begin() + i * cg * hw);
    }
    return {std::move(xl), std::move(xg)};
}

Tensor merge_channels(const Tensor& local, const Tensor& global) {
    require_rank(local, 4, "merge_channels");
    require_rank(global, 4, "merge_channels");
    if (local.shape[0] != global.shape[0] || local.shape[2] != global.shape[2] ||
        local.shape[3] != global.shape[3])
        throw std::invalid_argument("merge_channels: incompatible " + shape_str(local.shape) +
                                    " vs " + shape_str(global.shape));
    const std::size_t n = local.shape[0], cl = local.shape[1], cg = global.shape[1],
                      hw = local.shape[2] * local.shape[3];
    Tensor out({n, cl + cg, local.shape[2], local.shape[3]});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(local.data.begin() + i * cl * hw, local.data.begin() + (i + 1) * cl * hw,
                  out.data.begin() + i * (cl + cg) * hw);
        std::copy(global.data.begin() + i * cg * hw, global.data.begin() + (i + 1) * cg * hw,
                  out.data.begin() + (i * (cl + cg) + cl) * hw);
    }
    return out;
}

SpectralTransform::SpectralTransform(int ci, int co, const SpectralOptions& o, Rng& rng)
    : c_in(ci), c_out(co), mid(std::max(1, co / 2)), opt(o) {
    if (ci <= 0 || co <= 0)
        throw std::invalid_argument("spectral_transform: non-positive channel count");
    if (o.stride < 1) throw std::invalid_argument("spectral_transform: bad stride");
    if (!(o.pool_ratio > 0.0 && o.pool_ratio <= 1.0) || !(o.crop_ratio > 0.0 && o.crop_ratio <= 1.0))
        throw std::invalid_argument("spectral_transform: pool/crop ratios must be in (0,1]");
    pre = make_conv(c_in, mid, 1, o.stride, 0, 1, false, rng);
    pre_bn = make_bn(mid);
    if (o.per_bin) {
        if (o.per_bin_h == 0 || o.per_bin_w == 0)
            throw std::invalid_argument("spectral_transform: per_bin needs spectrum dims");
        wg_bin = Tensor({static_cast<std::size_t>(2 * mid), o.per_bin_h, o.per_bin_w});
        kaiming_uniform_fill(wg_bin, o.per_bin_h * o.per_bin_w, rng);
    } else {
        wg = make_conv(2 * mid, 2 * mid, 1, 1, 0, 1, false, rng);
    }
    wg_bn = make_bn(2 * mid);
    post = make_conv(mid, c_out, 1, 1, 0, 1, false, rng);
}

Var SpectralTransform::forward(Tape& t, Var x, bool training, bool update_running,
                               const SpectralHooks* hooks) {
    const std::size_t in_h = t.val(x).shape[2], in_w = t.val(x).shape[3];
    Var y = t.conv2d(x, t.leaf(&pre.weight), {}, pre.stride, pre.padding, pre.groups);
    y = t.batch_norm(y, t.leaf(&pre_bn.gamma), t.leaf(&pre_bn.beta), &pre_bn, training,
                     update_running);
    y = t.relu(y);
    const std::size_t h = t.val(y).shape[2], w = t.val(y).shape[3];

    Var f = t.fft2_stack(y);
    if (!(hooks && hooks->identity_modulation)) {
        if (opt.per_bin) {
            if (t.val(f).shape[2] != opt.per_bin_h || t.val(f).shape[3] != opt.per_bin_w)
                throw std::invalid_argument("spectral_transform: per_bin weight sized for " +
                                            std::to_string(opt.per_bin_h) + "x" +
                                            std::to_string(opt.per_bin_w) + ", spectrum is " +
                                            shape_str(t.val(f).shape));
            f = t.mul_bcast_chw(f, t.leaf(&wg_bin));
        } else {
            f = t.conv2d(f, t.leaf(&wg.weight), {}, 1, 0, 1);
        }
        f = t.batch_norm(f, t.leaf(&wg_bn.gamma), t.leaf(&wg_bn.beta), &wg_bn, training,
                         update_running);
        f = t.relu(f);
    }
    Var z = t.ifft2_real(f);

    if (!(hooks && hooks->skip_residual)) {
        const std::size_t ph = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                            std::floor(opt.pool_ratio * static_cast<double>(h))));
        const std::size_t pw = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                            std::floor(opt.pool_ratio * static_cast<double>(w))));
        const std::size_t ch = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                            std::floor(opt.crop_ratio * static_cast<double>(ph))));
        const std::size_t cw = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                            std::floor(opt.crop_ratio * static_cast<double>(pw))));
        Var r = t.adaptive_avg_pool2d(y, ph, pw);
        r = t.fft2_stack(r);
        r = t.fft_shift(r, false);
        r = t.center_crop(r, ch, cw);
        r = t.fft_shift(r, true);
        r = t.ifft2_real(r);
        r = t.bilinear_resize(r, h, w);
        z = t.add(z, r);
    }

    Var out = t.conv2d(z, t.leaf(&post.weight), {}, 1, 0, 1);
    if (opt.stride > 1) out = t.bilinear_resize(out, in_h, in_w);
    return out;
}

void SpectralTransform::collect(const std::string& prefix, ParamList& out) {
    collect_conv(prefix + ".pre", pre, out);
    collect_bn(prefix + ".pre_bn", pre_bn, out);
    if (opt.per_bin)
        out.push_back({prefix + ".wg_bin", &wg_bin, ParamKind::conv_weight});
    else
        collect_conv(prefix + ".wg", wg, out);
    collect_bn(prefix + ".wg_bn", wg_bn, out);
    collect_conv(prefix + ".post", post, out);
}

long long SpectralTransform::weight_count() const {
    long long n = static_cast<long long>(pre.weight.numel()) + static_cast<long long>(post.weight.numel());
    n += static_cast<long long>(opt.per_bin ? wg_bin.numel() : wg.weight.numel());
    return n;
}

Ddfc::Ddfc(int ci, int co, double a, const DdfcOptions& o, Rng& rng)
    : c_in(ci), c_out(co), alpha(a), opt(o) {
    if (ci <= 0 || co <= 0) throw std::invalid_argument("ddfc: non-positive channel count");
    if (o.kernel < 1 || o.kernel % 2 == 0)
        throw std::invalid_argument("ddfc: kernel must be odd, got " + std::to_string(o.kernel));
    check_alpha(a);
    c_gi = global_channels(ci, a);
    c_li = ci - c_gi;
    c_go = global_channels(co, a);
    c_lo = co - c_go;
    if (c_lo > 0 && c_li == 0 && !(opt.cross_paths && c_gi > 0))
        throw std::invalid_argument("ddfc: local output has no feeding path");
    if (c_go > 0 && c_gi == 0 && !(opt.cross_paths && c_li > 0))
        throw std::invalid_argument("ddfc: global output has no feeding path");
    const int k = o.kernel, pad = (o.kernel - 1) / 2;
    if (c_li > 0 && c_lo > 0) ll = make_conv(c_li, c_lo, k, 1, pad, 1, false, rng);
    if (opt.cross_paths && c_li > 0 && c_go > 0) lg = make_conv(c_li, c_go, k, 1, pad, 1, false, rng);
    if (opt.cross_paths && c_gi > 0 && c_lo > 0) gl = make_conv(c_gi, c_lo, k, 1, pad, 1, false, rng);
    if (c_gi > 0 && c_go > 0) spec.emplace(c_gi, c_go, o.spectral, rng);
    if (c_lo > 0) bn_l = make_bn(c_lo);
    if (c_go > 0) bn_g = make_bn(c_go);
}

Ddfc::Out Ddfc::forward(Tape& t, Var x, bool training, bool update_running,
                        const SpectralHooks* hooks) {
    const Tensor& xv = t.val(x);
    require_rank(xv, 4, "ddfc");
    if (xv.shape[1] != static_cast<std::size_t>(c_in))
        throw std::invalid_argument("ddfc: expected " + std::to_string(c_in) + " channels, got " +
                                    shape_str(xv.shape));
    Var x_l, x_g;
    if (c_li > 0) x_l = t.slice_channels(x, 0, static_cast<std::size_t>(c_li));
    if (c_gi > 0)
        x_g = t.slice_channels(x, static_cast<std::size_t>(c_li), static_cast<std::size_t>(c_in));

    Out out;
    if (c_lo > 0) {
        Var pre;
        if (!ll.weight.data.empty())
            pre = t.conv2d(x_l, t.leaf(&ll.weight), {}, ll.stride, ll.padding, ll.groups);
        if (!gl.weight.data.empty()) {
            Var cross = t.conv2d(x_g, t.leaf(&gl.weight), {}, gl.stride, gl.padding, gl.groups);
            pre = pre.valid() ? t.add(pre, cross) : cross;
        }
        pre = t.batch_norm(pre, t.leaf(&bn_l.gamma), t.leaf(&bn_l.beta), &bn_l, training,
                           update_running);
        out.local = t.relu(pre);
    }
    if (c_go > 0) {
        Var pre;
        if (spec) pre = spec->forward(t, x_g, training, update_running, hooks);
        if (!lg.weight.data.empty()) {
            Var cross = t.conv2d(x_l, t.leaf(&lg.weight), {}, lg.stride, lg.padding, lg.groups);
            pre = pre.valid() ? t.add(pre, cross) : cross;
        }
        pre = t.batch_norm(pre, t.leaf(&bn_g.gamma), t.leaf(&bn_g.beta), &bn_g, training,
                           update_running);
        out.global = t.relu(pre);
    }
    return out;
}

void Ddfc::collect(const std::string& prefix, ParamList& out) {
    if (!ll.weight.data.empty()) collect_conv(prefix + ".ll", ll, out);
    if (!lg.weight.data.empty()) collect_conv(prefix + ".lg", lg, out);
    if (!gl.weight.data.empty()) collect_conv(prefix + ".gl", gl, out);
    if (spec) spec->collect(prefix + ".spectral", out);
    if (c_lo > 0) collect_bn(prefix + ".bn_l", bn_l, out);
    if (c_go > 0) collect_bn(prefix + ".bn_g", bn_g, out);
}

long long Ddfc::weight_count() const {
    long long n = 0;
    n += static_cast<long long>(ll.weight.numel());
    n += static_cast<long long>(lg.weight.numel());
    n += static_cast<long long>(gl.weight.numel());
    if (spec) n += spec->weight_count();
    return n;
}

}  // namespace specx
