#include "specx/dfa.hpp"

#include <algorithm>
#include <stdexcept>

namespace specx {

namespace {

Tensor make_linear_weight(int out_dim, int in_dim, Rng& rng) {
    Tensor w({static_cast<std::size_t>(out_dim), static_cast<std::size_t>(in_dim)});
    kaiming_uniform_fill(w, static_cast<std::size_t>(in_dim), rng);
    return w;
}

ConvParams make_proj(int c_in, int c_out, Rng& rng) {
    ConvParams p;
    p.weight = Tensor({static_cast<std::size_t>(c_out), static_cast<std::size_t>(c_in), 1, 1});
    kaiming_uniform_fill(p.weight, static_cast<std::size_t>(c_in), rng);
    return p;
}

}  // namespace

Dfa::Dfa(int cl, int cg, int co, const DfaOptions& o, Rng& rng)
    : c_l(cl), c_g(cg), c_out(co), opt(o) {
    if (cl < 0 || cg < 0 || co <= 0) throw std::invalid_argument("dfa: bad channel widths");
    if (cl + cg != co)
        throw std::invalid_argument("dfa: branch widths " + std::to_string(cl) + "+" +
                                    std::to_string(cg) + " != output " + std::to_string(co));
    if (o.reduction < 1 || o.min_hidden < 1) throw std::invalid_argument("dfa: bad options");
    if (!active()) return;
    h_a = std::max(o.min_hidden, c_g / o.reduction);
    h_b = std::max(o.min_hidden, c_l / o.reduction);
    wa1 = make_linear_weight(h_a, c_g, rng);
    ba1 = Tensor({static_cast<std::size_t>(h_a)});
    wa2 = make_linear_weight(c_l, h_a, rng);
    ba2 = Tensor({static_cast<std::size_t>(c_l)});
    wb1 = make_linear_weight(h_b, c_l, rng);
    bb1 = Tensor({static_cast<std::size_t>(h_b)});
    wb2 = make_linear_weight(c_g, h_b, rng);
    bb2 = Tensor({static_cast<std::size_t>(c_g)});
    wf = make_linear_weight(2, c_l + c_g, rng);
    bf = Tensor({2});
    proj_l = make_proj(c_l, c_out, rng);
    proj_g = make_proj(c_g, c_out, rng);
}

Var Dfa::forward(Tape& t, Var y_l, Var y_g, const DfaHooks* hooks) {
    if (!active()) {
        Var only = c_l > 0 ? y_l : y_g;
        if (!only.valid()) throw std::invalid_argument("dfa: passthrough branch missing");
        return only;
    }
    if (!y_l.valid() || !y_g.valid()) throw std::invalid_argument("dfa: branch missing");
    // copy the dims up front: recording ops below reallocates the tape's node
    // storage, so references returned by val() must not be kept across them
    require_rank(t.val(y_l), 4, "dfa");
    require_rank(t.val(y_g), 4, "dfa");
    const std::vector<std::size_t> sl = t.val(y_l).shape, sg = t.val(y_g).shape;
    if (sl[1] != static_cast<std::size_t>(c_l) || sg[1] != static_cast<std::size_t>(c_g))
        throw std::invalid_argument("dfa: branch channels " + shape_str(sl) + " / " +
                                    shape_str(sg) + " do not match widths " +
                                    std::to_string(c_l) + "/" + std::to_string(c_g));
    const std::size_t n = sl[0];

    Var z_l = t.global_avg_pool(y_l);
    Var z_g = t.global_avg_pool(y_g);

    Var a_g, a_l;  // a_g scales the local branch, a_l the global one
    if (hooks && hooks->force_attention) {
        const double v = *hooks->force_attention;
        a_g = t.input(Tensor::full({n, static_cast<std::size_t>(c_l)}, v));
        a_l = t.input(Tensor::full({n, static_cast<std::size_t>(c_g)}, v));
    } else {
        a_g = t.sigmoid(t.linear(t.relu(t.linear(z_g, t.leaf(&wa1), t.leaf(&ba1))),
                                 t.leaf(&wa2), t.leaf(&ba2)));
        a_l = t.sigmoid(t.linear(t.relu(t.linear(z_l, t.leaf(&wb1), t.leaf(&bb1))),
                                 t.leaf(&wb2), t.leaf(&bb2)));
    }

    if (hooks && hooks->capture_a_g) *hooks->capture_a_g = t.val(a_g);
    if (hooks && hooks->capture_a_l) *hooks->capture_a_l = t.val(a_l);

    Var m_l = t.channel_scale(y_l, a_g);
    Var m_g = t.channel_scale(y_g, a_l);
    const bool residual = !(hooks && !hooks->residual);
    if (residual) {
        m_l = t.add(y_l, m_l);
        m_g = t.add(y_g, m_g);
    }

    const std::size_t th = std::max(sl[2], sg[2]);
    const std::size_t tw = std::max(sl[3], sg[3]);
    if (t.val(m_l).shape[2] != th || t.val(m_l).shape[3] != tw)
        m_l = t.bilinear_resize(m_l, th, tw);
    if (t.val(m_g).shape[2] != th || t.val(m_g).shape[3] != tw)
        m_g = t.bilinear_resize(m_g, th, tw);

    Var p_l = t.conv2d(m_l, t.leaf(&proj_l.weight), {}, 1, 0, 1);
    Var p_g = t.conv2d(m_g, t.leaf(&proj_g.weight), {}, 1, 0, 1);

    Var gamma = t.softmax(t.linear(t.concat_cols(z_l, z_g), t.leaf(&wf), t.leaf(&bf)), 1);
    if (hooks && hooks->capture_gamma) *hooks->capture_gamma = t.val(gamma);
    return t.convex_fuse(p_l, p_g, gamma);
}

void Dfa::collect(const std::string& prefix, ParamList& out) {
    if (!active()) return;
    out.push_back({prefix + ".attn_lg.w1", &wa1, ParamKind::linear_weight});
    out.push_back({prefix + ".attn_lg.b1", &ba1, ParamKind::bias});
    out.push_back({prefix + ".attn_lg.w2", &wa2, ParamKind::linear_weight});
    out.push_back({prefix + ".attn_lg.b2", &ba2, ParamKind::bias});
    out.push_back({prefix + ".attn_gl.w1", &wb1, ParamKind::linear_weight});
    out.push_back({prefix + ".attn_gl.b1", &bb1, ParamKind::bias});
    out.push_back({prefix + ".attn_gl.w2", &wb2, ParamKind::linear_weight});
    out.push_back({prefix + ".attn_gl.b2", &bb2, ParamKind::bias});
    out.push_back({prefix + ".fusion.w", &wf, ParamKind::linear_weight});
    out.push_back({prefix + ".fusion.b", &bf, ParamKind::bias});
    out.push_back({prefix + ".proj_l.weight", &proj_l.weight, ParamKind::conv_weight});
    out.push_back({prefix + ".proj_g.weight", &proj_g.weight, ParamKind::conv_weight});
}

long long Dfa::param_count() const {
    if (!active()) return 0;
    long long s = 0;
    for (const Tensor* p : {&wa1, &ba1, &wa2, &ba2, &wb1, &bb1, &wb2, &bb2, &wf, &bf,
                            &proj_l.weight, &proj_g.weight})
        s += static_cast<long long>(p->numel());
    return s;
}

}  // namespace specx
