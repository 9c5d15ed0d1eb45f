#include "specx/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "specx/fft.hpp"
#include "specx/rng.hpp"

namespace specx {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace

Tape::Node& Tape::node(Var v) {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::logic_error("tape: invalid variable handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::logic_error("tape: invalid variable handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::val(Var v) const { return node(v).value; }

const Tensor& Tape::grad_of(Var v) const { return node(v).grad; }

Var Tape::make(const char* op, Tensor value, std::initializer_list<Var> inputs,
               std::function<void(Tape&)> bwd) {
    if (value.numel() == 0)
        throw std::invalid_argument(std::string(op) + ": produced an empty tensor");
    Node n;
    n.value = std::move(value);
    n.op = op;
    if (grad_enabled_) {
        for (Var in : inputs)
            if (in.valid() && node(in).needs_grad) {
                n.needs_grad = true;
                break;
            }
    }
    if (n.needs_grad) n.bwd = std::move(bwd);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor* param) {
    if (!param) throw std::invalid_argument("leaf: null parameter");
    Node n;
    n.value = *param;
    n.op = "leaf";
    n.param = param;
    n.needs_grad = grad_enabled_;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    if (grad_enabled_) leaves_.push_back(id);
    return Var{id};
}

Var Tape::input(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.op = "input";
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss) {
    if (!grad_enabled_) throw std::logic_error("backward: tape records no gradients");
    if (consumed_) throw std::logic_error("backward: tape already consumed; re-record the graph");
    consumed_ = true;
    Node& ln = node(loss);
    if (ln.value.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_str(ln.value.shape));
    for (int id : leaves_) {
        nodes_[static_cast<std::size_t>(id)].param->ensure_grad();
        nodes_[static_cast<std::size_t>(id)].param->zero_grad();
    }
    if (!ln.needs_grad) return;  // loss independent of all parameters
    for (Node& n : nodes_)
        if (n.needs_grad) n.grad = Tensor(n.value.shape);
    ln.grad.data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad) continue;
        if (check_finite_)
            for (double g : n.grad.data)
                if (!std::isfinite(g))
                    throw std::runtime_error(std::string("backward: non-finite gradient at op ") + n.op);
        if (n.param) {
            axpy(1.0, n.grad.data, n.param->grad);
        } else if (n.bwd) {
            n.bwd(*this);
        }
    }
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_same_shape(av, bv, "add");
    Tensor out(av.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
    int aid = a.id, bid = b.id, oid = static_cast<int>(nodes_.size());
    return make("add", std::move(out), {a, b}, [aid, bid, oid](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        if (Tensor* ga = t.gbuf({aid})) axpy(1.0, g.data, ga->data);
        if (Tensor* gb = t.gbuf({bid})) axpy(1.0, g.data, gb->data);
    });
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_same_shape(av, bv, "mul");
    Tensor out(av.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
    int aid = a.id, bid = b.id, oid = static_cast<int>(nodes_.size());
    return make("mul", std::move(out), {a, b}, [aid, bid, oid](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        const Tensor& av = t.nodes_[aid].value;
        const Tensor& bv = t.nodes_[bid].value;
        if (Tensor* ga = t.gbuf({aid}))
            for (std::size_t i = 0; i < g.data.size(); ++i) ga->data[i] += g.data[i] * bv.data[i];
        if (Tensor* gb = t.gbuf({bid}))
            for (std::size_t i = 0; i < g.data.size(); ++i) gb->data[i] += g.data[i] * av.data[i];
    });
}

Var Tape::scale(Var a, double c) {
    const Tensor& av = val(a);
    Tensor out(av.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = av.data[i] * c;
    int aid = a.id, oid = static_cast<int>(nodes_.size());
    return make("scale", std::move(out), {a}, [aid, oid, c](Tape& t) {
        if (Tensor* ga = t.gbuf({aid})) axpy(c, t.nodes_[oid].grad.data, ga->data);
    });
}

Var Tape::sum(Var a) {
    const Tensor& av = val(a);
    double acc = 0.0;
    for (double v : av.data) acc += v;
    int aid = a.id, oid = static_cast<int>(nodes_.size());
    return make("sum", Tensor({1}, {acc}), {a}, [aid, oid](Tape& t) {
        if (Tensor* ga = t.gbuf({aid})) {
            const double g = t.nodes_[oid].grad.data[0];
            for (double& v : ga->data) v += g;
        }
    });
}

Var Tape::relu(Var a) {
    int aid = a.id, oid = static_cast<int>(nodes_.size());
    return make("relu", specx::relu(val(a)), {a}, [aid, oid](Tape& t) {
        if (Tensor* ga = t.gbuf({aid})) {
            const Tensor& g = t.nodes_[oid].grad;
            const Tensor& x = t.nodes_[aid].value;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (x.data[i] > 0.0) ga->data[i] += g.data[i];
        }
    });
}

Var Tape::sigmoid(Var a) {
    int aid = a.id, oid = static_cast<int>(nodes_.size());
    return make("sigmoid", specx::sigmoid(val(a)), {a}, [aid, oid](Tape& t) {
        if (Tensor* ga = t.gbuf({aid})) {
            const Tensor& g = t.nodes_[oid].grad;
            const Tensor& y = t.nodes_[oid].value;
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga->data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
    });
}

Var Tape::softmax(Var a, std::size_t axis) {
    Tensor y = specx::softmax(val(a), axis);
    const std::size_t dim = y.shape[axis];
    std::size_t inner = 1, outer = 1;
    for (std::size_t i = axis + 1; i < y.rank(); ++i) inner *= y.shape[i];
    for (std::size_t i = 0; i < axis; ++i) outer *= y.shape[i];
    int aid = a.id, oid = static_cast<int>(nodes_.size());
    return make("softmax", std::move(y), {a}, [aid, oid, dim, inner, outer](Tape& t) {
        if (Tensor* ga = t.gbuf({aid})) {
            const Tensor& g = t.nodes_[oid].grad;
            const Tensor& yv = t.nodes_[oid].value;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * dim * inner + in;
                    double dot = 0.0;
                    for (std::size_t d = 0; d < dim; ++d)
                        dot += g.data[base + d * inner] * yv.data[base + d * inner];
                    for (std::size_t d = 0; d < dim; ++d)
                        ga->data[base + d * inner] +=
                            yv.data[base + d * inner] * (g.data[base + d * inner] - dot);
                }
        }
    });
}

Var Tape::linear(Var x, Var w, Var b) {
    static const Tensor no_bias;
    const Tensor& bv = b.valid() ? val(b) : no_bias;
    Tensor out = specx::linear(val(x), val(w), bv);
    int xid = x.id, wid = w.id, bid = b.valid() ? b.id : -1, oid = static_cast<int>(nodes_.size());
    return make("linear", std::move(out), {x, w, b}, [xid, wid, bid, oid](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        Tensor* gb = bid >= 0 ? t.gbuf({bid}) : nullptr;
        specx::linear_backward(t.nodes_[xid].value, t.nodes_[wid].value, g, t.gbuf({xid}),
                               t.gbuf({wid}), gb);
    });
}

Var Tape::conv2d(Var x, Var w, Var b, int stride, int padding, int groups) {
    static const Tensor no_bias;
    const Tensor& bv = b.valid() ? val(b) : no_bias;
    Tensor out = specx::conv2d(val(x), val(w), bv, stride, padding, groups);
    int xid = x.id, wid = w.id, bid = b.valid() ? b.id : -1, oid = static_cast<int>(nodes_.size());
    return make("conv2d", std::move(out), {x, w, b},
                [xid, wid, bid, oid, stride, padding, groups](Tape& t) {
                    const Tensor& g = t.nodes_[oid].grad;
                    Tensor* gb = bid >= 0 ? t.gbuf({bid}) : nullptr;
                    specx::conv2d_backward(t.nodes_[xid].value, t.nodes_[wid].value, g, stride,
                                           padding, groups, t.gbuf({xid}), t.gbuf({wid}), gb);
                });
}

Var Tape::batch_norm(Var x, Var gamma, Var beta, BnParams* state, bool training,
                     bool update_running) {
    if (!state) throw std::invalid_argument("batch_norm: null state");
    BnSaved saved;
    Tensor out = specx::batch_norm(val(x), *state, training, update_running, &saved);
    int xid = x.id, gid = gamma.id, bid = beta.id, oid = static_cast<int>(nodes_.size());
    return make("batch_norm", std::move(out), {x, gamma, beta},
                [xid, gid, bid, oid, state, saved = std::move(saved)](Tape& t) {
                    specx::batch_norm_backward(t.nodes_[xid].value, *state, saved,
                                               t.nodes_[oid].grad, t.gbuf({xid}), t.gbuf({gid}),
                                               t.gbuf({bid}));
                });
}

Var Tape::max_pool2d(Var x, int window, int stride) {
    PoolSaved saved;
    Tensor out = specx::max_pool2d(val(x), window, stride, &saved);
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("max_pool2d", std::move(out), {x}, [xid, oid, saved = std::move(saved)](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) {
            const Tensor& g = t.nodes_[oid].grad;
            const std::size_t n = g.shape[0], c = g.shape[1], ohw = g.shape[2] * g.shape[3];
            const Tensor& x = t.nodes_[xid].value;
            const std::size_t hw = x.shape[2] * x.shape[3];
            for (std::size_t nc = 0; nc < n * c; ++nc)
                for (std::size_t i = 0; i < ohw; ++i)
                    ga->data[nc * hw + saved.argmax[nc * ohw + i]] += g.data[nc * ohw + i];
        }
    });
}

Var Tape::adaptive_avg_pool2d(Var x, std::size_t oh, std::size_t ow) {
    const std::size_t h = val(x).shape[2], w = val(x).shape[3];
    Tensor out = specx::adaptive_avg_pool2d(val(x), oh, ow);
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("adaptive_avg_pool2d", std::move(out), {x}, [xid, oid, h, w](Tape& t) {
        if (Tensor* ga = t.gbuf({xid}))
            specx::adaptive_avg_pool2d_backward(t.nodes_[oid].grad, h, w, ga);
    });
}

Var Tape::bilinear_resize(Var x, std::size_t oh, std::size_t ow) {
    const std::size_t h = val(x).shape[2], w = val(x).shape[3];
    Tensor out = specx::bilinear_resize(val(x), oh, ow);
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("bilinear_resize", std::move(out), {x}, [xid, oid, h, w](Tape& t) {
        if (Tensor* ga = t.gbuf({xid}))
            specx::bilinear_resize_backward(t.nodes_[oid].grad, h, w, ga);
    });
}

Var Tape::center_crop(Var x, std::size_t oh, std::size_t ow) {
    const std::size_t h = val(x).shape[2], w = val(x).shape[3];
    Tensor out = specx::center_crop(val(x), oh, ow);
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("center_crop", std::move(out), {x}, [xid, oid, h, w](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) specx::center_crop_backward(t.nodes_[oid].grad, h, w, ga);
    });
}

Var Tape::global_avg_pool(Var x) {
    const std::size_t h = val(x).shape[2], w = val(x).shape[3];
    Tensor out = specx::global_avg_pool(val(x));
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("global_avg_pool", std::move(out), {x}, [xid, oid, h, w](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) {
            const Tensor& g = t.nodes_[oid].grad;
            const double inv = 1.0 / static_cast<double>(h * w);
            const std::size_t hw = h * w;
            for (std::size_t nc = 0; nc < g.data.size(); ++nc) {
                const double gv = g.data[nc] * inv;
                double* dst = ga->data.data() + nc * hw;
                for (std::size_t i = 0; i < hw; ++i) dst[i] += gv;
            }
        }
    });
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_rank(av, 2, "concat_cols");
    require_rank(bv, 2, "concat_cols");
    if (av.shape[0] != bv.shape[0])
        throw std::invalid_argument("concat_cols: batch mismatch " + shape_str(av.shape) + " vs " +
                                    shape_str(bv.shape));
    const std::size_t n = av.shape[0], ca = av.shape[1], cb = bv.shape[1];
    Tensor out({n, ca + cb});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(av.data.begin() + i * ca, av.data.begin() + (i + 1) * ca,
                  out.data.begin() + i * (ca + cb));
        std::copy(bv.data.begin() + i * cb, bv.data.begin() + (i + 1) * cb,
                  out.data.begin() + i * (ca + cb) + ca);
    }
    int aid = a.id, bid = b.id, oid = static_cast<int>(nodes_.size());
    return make("concat_cols", std::move(out), {a, b}, [aid, bid, oid, n, ca, cb](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        if (Tensor* ga = t.gbuf({aid}))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < ca; ++j) ga->data[i * ca + j] += g.data[i * (ca + cb) + j];
        if (Tensor* gb = t.gbuf({bid}))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < cb; ++j)
                    gb->data[i * cb + j] += g.data[i * (ca + cb) + ca + j];
    });
}

Var Tape::concat_channels(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    require_rank(av, 4, "concat_channels");
    require_rank(bv, 4, "concat_channels");
    if (av.shape[0] != bv.shape[0] || av.shape[2] != bv.shape[2] || av.shape[3] != bv.shape[3])
        throw std::invalid_argument("concat_channels: incompatible " + shape_str(av.shape) +
                                    " vs " + shape_str(bv.shape));
    const std::size_t n = av.shape[0], ca = av.shape[1], cb = bv.shape[1],
                      hw = av.shape[2] * av.shape[3];
    Tensor out({n, ca + cb, av.shape[2], av.shape[3]});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(av.data.begin() + i * ca * hw, av.data.begin() + (i + 1) * ca * hw,
                  out.data.begin() + i * (ca + cb) * hw);
        std::copy(bv.data.begin() + i * cb * hw, bv.data.begin() + (i + 1) * cb * hw,
                  out.data.begin() + (i * (ca + cb) + ca) * hw);
    }
    int aid = a.id, bid = b.id, oid = static_cast<int>(nodes_.size());
    return make("concat_channels", std::move(out), {a, b}, [aid, bid, oid, n, ca, cb, hw](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        if (Tensor* ga = t.gbuf({aid}))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < ca * hw; ++j)
                    ga->data[i * ca * hw + j] += g.data[i * (ca + cb) * hw + j];
        if (Tensor* gb = t.gbuf({bid}))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < cb * hw; ++j)
                    gb->data[i * cb * hw + j] += g.data[(i * (ca + cb) + ca) * hw + j];
    });
}

Var Tape::slice_channels(Var x, std::size_t c0, std::size_t c1) {
    const Tensor& xv = val(x);
    require_rank(xv, 4, "slice_channels");
    if (c0 >= c1 || c1 > xv.shape[1])
        throw std::invalid_argument("slice_channels: bad range [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") for " + shape_str(xv.shape));
    const std::size_t n = xv.shape[0], c = xv.shape[1], hw = xv.shape[2] * xv.shape[3];
    const std::size_t cs = c1 - c0;
    Tensor out({n, cs, xv.shape[2], xv.shape[3]});
    for (std::size_t i = 0; i < n; ++i)
        std::copy(xv.data.begin() + (i * c + c0) * hw, xv.data.begin() + (i * c + c1) * hw,
                  out.data.begin() + i * cs * hw);
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("slice_channels", std::move(out), {x}, [xid, oid, n, c, c0, cs, hw](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) {
            const Tensor& g = t.nodes_[oid].grad;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < cs * hw; ++j)
                    ga->data[(i * c + c0) * hw + j] += g.data[i * cs * hw + j];
        }
    });
}

namespace {

// One [H,W] plane in/out of a complex work buffer.
void load_plane(std::vector<std::complex<double>>& buf, const double* re, const double* im,
                std::size_t hw) {
    buf.resize(hw);
    for (std::size_t i = 0; i < hw; ++i)
        buf[i] = std::complex<double>(re[i], im ? im[i] : 0.0);
}

}  // namespace

Var Tape::fft2_stack(Var x) {
    const Tensor& xv = val(x);
    require_rank(xv, 4, "fft2_stack");
    const std::size_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
    const std::size_t hw = h * w;
    Tensor out({n, 2 * c, h, w});
    std::vector<std::complex<double>> buf;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            load_plane(buf, xv.data.data() + (i * c + ch) * hw, nullptr, hw);
            fftdetail::fft2_plane(buf.data(), h, w, false);
            double* re = out.data.data() + (i * 2 * c + ch) * hw;
            double* im = out.data.data() + (i * 2 * c + c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                re[j] = buf[j].real();
                im[j] = buf[j].imag();
            }
        }
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("fft2_stack", std::move(out), {x}, [xid, oid, n, c, h, w, hw](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) {
            // adjoint of the unnormalized forward DFT is the unnormalized inverse
            const Tensor& g = t.nodes_[oid].grad;
            std::vector<std::complex<double>> buf;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    load_plane(buf, g.data.data() + (i * 2 * c + ch) * hw,
                               g.data.data() + (i * 2 * c + c + ch) * hw, hw);
                    fftdetail::fft2_plane(buf.data(), h, w, true);
                    double* dst = ga->data.data() + (i * c + ch) * hw;
                    for (std::size_t j = 0; j < hw; ++j) dst[j] += buf[j].real();
                }
        }
    });
}

Var Tape::ifft2_real(Var x) {
    const Tensor& xv = val(x);
    require_rank(xv, 4, "ifft2_real");
    if (xv.shape[1] % 2 != 0)
        throw std::invalid_argument("ifft2_real: expected stacked re/im channels, got " + shape_str(xv.shape));
    const std::size_t n = xv.shape[0], c = xv.shape[1] / 2, h = xv.shape[2], w = xv.shape[3];
    const std::size_t hw = h * w;
    const double scale = 1.0 / static_cast<double>(hw);
    Tensor out({n, c, h, w});
    std::vector<std::complex<double>> buf;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            load_plane(buf, xv.data.data() + (i * 2 * c + ch) * hw,
                       xv.data.data() + (i * 2 * c + c + ch) * hw, hw);
            fftdetail::fft2_plane(buf.data(), h, w, true);
            double* dst = out.data.data() + (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) dst[j] = buf[j].real() * scale;
        }
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("ifft2_real", std::move(out), {x}, [xid, oid, n, c, h, w, hw, scale](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) {
            // adjoint: forward DFT of the real upstream grad, scaled by 1/(HW)
            const Tensor& g = t.nodes_[oid].grad;
            std::vector<std::complex<double>> buf;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    load_plane(buf, g.data.data() + (i * c + ch) * hw, nullptr, hw);
                    fftdetail::fft2_plane(buf.data(), h, w, false);
                    double* re = ga->data.data() + (i * 2 * c + ch) * hw;
                    double* im = ga->data.data() + (i * 2 * c + c + ch) * hw;
                    for (std::size_t j = 0; j < hw; ++j) {
                        re[j] += buf[j].real() * scale;
                        im[j] += buf[j].imag() * scale;
                    }
                }
        }
    });
}

namespace {

void roll_plane(const double* src, double* dst, std::size_t h, std::size_t w, std::size_t dh,
                std::size_t dw) {
    for (std::size_t i = 0; i < h; ++i) {
        const std::size_t ti = (i + dh) % h;
        for (std::size_t j = 0; j < w; ++j) dst[ti * w + (j + dw) % w] = src[i * w + j];
    }
}

}  // namespace

Var Tape::fft_shift(Var x, bool inverse) {
    const Tensor& xv = val(x);
    require_rank(xv, 4, "fft_shift");
    const std::size_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
    const std::size_t dh = inverse ? h - h / 2 : h / 2;
    const std::size_t dw = inverse ? w - w / 2 : w / 2;
    Tensor out(xv.shape);
    for (std::size_t nc = 0; nc < n * c; ++nc)
        roll_plane(xv.data.data() + nc * h * w, out.data.data() + nc * h * w, h, w, dh, dw);
    int xid = x.id, oid = static_cast<int>(nodes_.size());
    return make("fft_shift", std::move(out), {x}, [xid, oid, n, c, h, w, dh, dw](Tape& t) {
        if (Tensor* ga = t.gbuf({xid})) {
            const Tensor& g = t.nodes_[oid].grad;
            Tensor tmp(g.shape);
            for (std::size_t nc = 0; nc < n * c; ++nc)
                roll_plane(g.data.data() + nc * h * w, tmp.data.data() + nc * h * w, h, w,
                           h - dh, w - dw);
            axpy(1.0, tmp.data, ga->data);
        }
    });
}

Var Tape::channel_scale(Var y, Var a) {
    const Tensor& yv = val(y);
    const Tensor& av = val(a);
    require_rank(yv, 4, "channel_scale");
    require_rank(av, 2, "channel_scale: scale");
    if (av.shape[0] != yv.shape[0] || av.shape[1] != yv.shape[1])
        throw std::invalid_argument("channel_scale: scale " + shape_str(av.shape) +
                                    " does not match " + shape_str(yv.shape));
    const std::size_t nc = yv.shape[0] * yv.shape[1], hw = yv.shape[2] * yv.shape[3];
    Tensor out(yv.shape);
    for (std::size_t i = 0; i < nc; ++i) {
        const double s = av.data[i];
        const double* src = yv.data.data() + i * hw;
        double* dst = out.data.data() + i * hw;
        for (std::size_t j = 0; j < hw; ++j) dst[j] = src[j] * s;
    }
    int yid = y.id, aid = a.id, oid = static_cast<int>(nodes_.size());
    return make("channel_scale", std::move(out), {y, a}, [yid, aid, oid, nc, hw](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        const Tensor& yv = t.nodes_[yid].value;
        const Tensor& av = t.nodes_[aid].value;
        if (Tensor* gy = t.gbuf({yid}))
            for (std::size_t i = 0; i < nc; ++i) {
                const double s = av.data[i];
                for (std::size_t j = 0; j < hw; ++j) gy->data[i * hw + j] += g.data[i * hw + j] * s;
            }
        if (Tensor* ga = t.gbuf({aid}))
            for (std::size_t i = 0; i < nc; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < hw; ++j) acc += g.data[i * hw + j] * yv.data[i * hw + j];
                ga->data[i] += acc;
            }
    });
}

Var Tape::mul_bcast_chw(Var x, Var w) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    require_rank(xv, 4, "mul_bcast_chw");
    require_rank(wv, 3, "mul_bcast_chw: weight");
    if (wv.shape[0] != xv.shape[1] || wv.shape[1] != xv.shape[2] || wv.shape[2] != xv.shape[3])
        throw std::invalid_argument("mul_bcast_chw: weight " + shape_str(wv.shape) +
                                    " does not match " + shape_str(xv.shape));
    const std::size_t n = xv.shape[0], chw = wv.numel();
    Tensor out(xv.shape);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < chw; ++j) out.data[i * chw + j] = xv.data[i * chw + j] * wv.data[j];
    int xid = x.id, wid = w.id, oid = static_cast<int>(nodes_.size());
    return make("mul_bcast_chw", std::move(out), {x, w}, [xid, wid, oid, n, chw](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        const Tensor& xv = t.nodes_[xid].value;
        const Tensor& wv = t.nodes_[wid].value;
        if (Tensor* gx = t.gbuf({xid}))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < chw; ++j)
                    gx->data[i * chw + j] += g.data[i * chw + j] * wv.data[j];
        if (Tensor* gw = t.gbuf({wid}))
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < chw; ++j)
                    gw->data[j] += g.data[i * chw + j] * xv.data[i * chw + j];
    });
}

Var Tape::convex_fuse(Var a, Var b, Var gamma) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    const Tensor& gv = val(gamma);
    require_same_shape(av, bv, "convex_fuse");
    require_rank(av, 4, "convex_fuse");
    if (gv.shape != std::vector<std::size_t>{av.shape[0], 2})
        throw std::invalid_argument("convex_fuse: gamma " + shape_str(gv.shape) + " must be [" +
                                    std::to_string(av.shape[0]) + ",2]");
    const std::size_t n = av.shape[0], chw = av.numel() / n;
    Tensor out(av.shape);
    for (std::size_t i = 0; i < n; ++i) {
        const double g0 = gv.data[i * 2], g1 = gv.data[i * 2 + 1];
        for (std::size_t j = 0; j < chw; ++j)
            out.data[i * chw + j] = g0 * av.data[i * chw + j] + g1 * bv.data[i * chw + j];
    }
    int aid = a.id, bid = b.id, gid = gamma.id, oid = static_cast<int>(nodes_.size());
    return make("convex_fuse", std::move(out), {a, b, gamma}, [aid, bid, gid, oid, n, chw](Tape& t) {
        const Tensor& g = t.nodes_[oid].grad;
        const Tensor& av = t.nodes_[aid].value;
        const Tensor& bv = t.nodes_[bid].value;
        const Tensor& gv = t.nodes_[gid].value;
        if (Tensor* ga = t.gbuf({aid}))
            for (std::size_t i = 0; i < n; ++i) {
                const double g0 = gv.data[i * 2];
                for (std::size_t j = 0; j < chw; ++j) ga->data[i * chw + j] += g0 * g.data[i * chw + j];
            }
        if (Tensor* gb = t.gbuf({bid}))
            for (std::size_t i = 0; i < n; ++i) {
                const double g1 = gv.data[i * 2 + 1];
                for (std::size_t j = 0; j < chw; ++j) gb->data[i * chw + j] += g1 * g.data[i * chw + j];
            }
        if (Tensor* gg = t.gbuf({gid}))
            for (std::size_t i = 0; i < n; ++i) {
                double d0 = 0.0, d1 = 0.0;
                for (std::size_t j = 0; j < chw; ++j) {
                    d0 += g.data[i * chw + j] * av.data[i * chw + j];
                    d1 += g.data[i * chw + j] * bv.data[i * chw + j];
                }
                gg->data[i * 2] += d0;
                gg->data[i * 2 + 1] += d1;
            }
    });
}

Var Tape::cross_entropy(Var logits, std::vector<int> labels) {
    const Tensor& z = val(logits);
    require_rank(z, 2, "cross_entropy");
    const std::size_t n = z.shape[0], k = z.shape[1];
    if (labels.size() != n)
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for batch of " + std::to_string(n));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                        " outside [0," + std::to_string(k) + ")");
    double loss = 0.0;
    Tensor probs({n, k});
    for (std::size_t i = 0; i < n; ++i) {
        const double* zi = z.data.data() + i * k;
        double mx = zi[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, zi[j]);
        double se = 0.0;
        for (std::size_t j = 0; j < k; ++j) se += std::exp(zi[j] - mx);
        const double lse = mx + std::log(se);
        loss += lse - zi[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < k; ++j) probs.data[i * k + j] = std::exp(zi[j] - lse);
    }
    loss /= static_cast<double>(n);
    int zid = logits.id, oid = static_cast<int>(nodes_.size());
    return make("cross_entropy", Tensor({1}, {loss}), {logits},
                [zid, oid, n, k, labels = std::move(labels), probs = std::move(probs)](Tape& t) {
                    if (Tensor* gz = t.gbuf({zid})) {
                        const double g = t.nodes_[oid].grad.data[0] / static_cast<double>(n);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                                const double onehot =
                                    (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
                                gz->data[i * k + j] += g * (probs.data[i * k + j] - onehot);
                            }
                    }
                });
}

GradcheckReport gradcheck(const std::function<double(bool with_grad)>& eval,
                          const ParamList& params, std::uint64_t seed,
                          const GradcheckOptions& opt) {
    GradcheckReport report;
    for (const ParamRef& p : params)
        if (is_trainable(p.kind)) p.tensor->ensure_grad();
    const double loss0 = eval(true);
    if (!std::isfinite(loss0)) throw std::runtime_error("gradcheck: non-finite loss");
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const ParamRef& p : params) {
        analytic.push_back(p.tensor->grad);
        for (double g : p.tensor->grad)
            if (!std::isfinite(g))
                throw std::runtime_error("gradcheck: non-finite gradient in parameter " + p.name);
    }
    Rng rng(seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const ParamRef& p = params[pi];
        if (!is_trainable(p.kind)) continue;
        const std::size_t numel = p.tensor->numel();
        std::vector<std::size_t> coords;
        if (numel <= opt.samples_per_param) {
            coords.resize(numel);
            for (std::size_t i = 0; i < numel; ++i) coords[i] = i;
        } else {
            coords.resize(opt.samples_per_param);
            for (std::size_t i = 0; i < coords.size(); ++i)
                coords[i] = static_cast<std::size_t>(rng.below(numel));
        }
        for (std::size_t ci : coords) {
            const double orig = p.tensor->data[ci];
            const double an = analytic[pi][ci];
            auto measure = [&](double h) {
                p.tensor->data[ci] = orig + h;
                const double fp = eval(false);
                p.tensor->data[ci] = orig - h;
                const double fm = eval(false);
                p.tensor->data[ci] = orig;
                const double fd = (fp - fm) / (2.0 * h);
                return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            };
            double rel = measure(opt.step);
            // A base-step stencil can straddle a ReLU/argmax boundary (fix:
            // smaller step) or sit below the 64-bit resolution of the loss
            // difference when the true gradient is ~1e-7 (fix: larger step).
            // A wrong analytic gradient disagrees at every step, so retries
            // cannot hide a backward error.
            const double h = opt.step;
            const double ladder[] = {h / 2, h / 4, h / 8, 2 * h, 4 * h, 8 * h, 16 * h};
            for (std::size_t r = 0; rel >= opt.tolerance && r < opt.refinements && r < 7; ++r) {
                const double refined = measure(ladder[r]);
                if (refined < opt.tolerance) {
                    rel = refined;
                    ++report.coords_refined;
                }
            }
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p.name;
            }
        }
    }
    report.pass = report.max_rel_error < opt.tolerance;
    return report;
}

}  // namespace specx
