#include "specx/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace specx {

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const double* A, const double* B,
             double* C, bool accumulate) {
    if (!accumulate) std::fill(C, C + M * N, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        const double* a = A + i * K;
        double* c = C + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = a[k];
            const double* b = B + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

namespace {

struct ConvDims {
    std::size_t n, cin, h, w, cout, k, oh, ow, cg, cog;
};

ConvDims conv_dims(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
                   int padding, int ngroups, const char* op) {
    require_rank(x, 4, op);
    require_rank(weight, 4, op);
    if (stride < 1 || padding < 0 || ngroups < 1)
        throw std::invalid_argument(std::string(op) + ": bad stride/padding/groups");
    if (weight.shape[2] != weight.shape[3])
        throw std::invalid_argument(std::string(op) + ": kernel must be square, got " + shape_str(weight.shape));
    ConvDims d;
    d.n = x.shape[0];
    d.cin = x.shape[1];
    d.h = x.shape[2];
    d.w = x.shape[3];
    d.cout = weight.shape[0];
    d.k = weight.shape[2];
    const std::size_t groups = static_cast<std::size_t>(ngroups);
    if (d.cin % groups != 0 || d.cout % groups != 0 || weight.shape[1] != d.cin / groups)
        throw std::invalid_argument(std::string(op) + ": weight " + shape_str(weight.shape) +
                                    " incompatible with input " + shape_str(x.shape) + " at groups " +
                                    std::to_string(ngroups));
    if (!bias.data.empty() && bias.shape != std::vector<std::size_t>{d.cout})
        throw std::invalid_argument(std::string(op) + ": bias " + shape_str(bias.shape) +
                                    " does not match " + std::to_string(d.cout) + " output channels");
    const std::size_t s = static_cast<std::size_t>(stride), pad = static_cast<std::size_t>(padding);
    if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k)
        throw std::invalid_argument(std::string(op) + ": zero-size output for input " + shape_str(x.shape) +
                                    " with kernel " + shape_str(weight.shape) + " padding " +
                                    std::to_string(padding));
    d.oh = (d.h + 2 * pad - d.k) / s + 1;
    d.ow = (d.w + 2 * pad - d.k) / s + 1;
    d.cg = d.cin / groups;
    d.cog = d.cout / groups;
    return d;
}

// col is [cg*k*k, oh*ow] for one (sample, group) pair.
void im2col(const double* x, const ConvDims& d, int stride, int padding, double* col) {
    const std::size_t k = d.k, oh = d.oh, ow = d.ow, h = d.h, w = d.w;
    for (std::size_t c = 0; c < d.cg; ++c) {
        const double* plane = x + c * h * w;
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* row = col + ((c * k + ki) * k + kj) * oh * ow;
                for (std::size_t i = 0; i < oh; ++i) {
                    const long sh = static_cast<long>(i) * stride - padding + static_cast<long>(ki);
                    if (sh < 0 || sh >= static_cast<long>(h)) {
                        std::fill(row + i * ow, row + (i + 1) * ow, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(sh) * w;
                    for (std::size_t j = 0; j < ow; ++j) {
                        const long sw = static_cast<long>(j) * stride - padding + static_cast<long>(kj);
                        row[i * ow + j] = (sw < 0 || sw >= static_cast<long>(w)) ? 0.0 : src[sw];
                    }
                }
            }
    }
}

void col2im_add(const double* col, const ConvDims& d, int stride, int padding, double* gx) {
    const std::size_t k = d.k, oh = d.oh, ow = d.ow, h = d.h, w = d.w;
    for (std::size_t c = 0; c < d.cg; ++c) {
        double* plane = gx + c * h * w;
        for (std::size_t ki = 0; ki < k; ++ki)
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* row = col + ((c * k + ki) * k + kj) * oh * ow;
                for (std::size_t i = 0; i < oh; ++i) {
                    const long sh = static_cast<long>(i) * stride - padding + static_cast<long>(ki);
                    if (sh < 0 || sh >= static_cast<long>(h)) continue;
                    double* dst = plane + static_cast<std::size_t>(sh) * w;
                    for (std::size_t j = 0; j < ow; ++j) {
                        const long sw = static_cast<long>(j) * stride - padding + static_cast<long>(kj);
                        if (sw >= 0 && sw < static_cast<long>(w)) dst[sw] += row[i * ow + j];
                    }
                }
            }
    }
}

void transpose(const double* a, std::size_t rows, std::size_t cols, double* at) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) at[j * rows + i] = a[i * cols + j];
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding,
              int groups_n) {
    const ConvDims d = conv_dims(x, w, bias, stride, padding, groups_n, "conv2d");
    const bool direct = d.k == 1 && stride == 1 && padding == 0;
    Tensor out({d.n, d.cout, d.oh, d.ow});
    const std::size_t span = d.oh * d.ow, krows = d.cg * d.k * d.k;
    std::vector<double> col(direct ? 0 : krows * span);
    const std::size_t groups = static_cast<std::size_t>(groups_n);
    for (std::size_t n = 0; n < d.n; ++n)
        for (std::size_t g = 0; g < groups; ++g) {
            const double* xg = x.data.data() + (n * d.cin + g * d.cg) * d.h * d.w;
            const double* b = xg;
            if (!direct) {
                im2col(xg, d, stride, padding, col.data());
                b = col.data();
            }
            gemm_nn(d.cog, span, krows, w.data.data() + g * d.cog * krows, b,
                    out.data.data() + (n * d.cout + g * d.cog) * span, false);
        }
    if (!bias.data.empty())
        for (std::size_t n = 0; n < d.n; ++n)
            for (std::size_t c = 0; c < d.cout; ++c) {
                double* o = out.data.data() + (n * d.cout + c) * span;
                const double bv = bias.data[c];
                for (std::size_t i = 0; i < span; ++i) o[i] += bv;
            }
    return out;
}

Tensor conv2d(const Tensor& x, const ConvParams& p) {
    return conv2d(x, p.weight, p.bias, p.stride, p.padding, p.groups);
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int stride,
                     int padding, int groups_n, Tensor* gx, Tensor* gw, Tensor* gb) {
    const ConvDims d = conv_dims(x, w, Tensor(), stride, padding, groups_n, "conv2d_backward");
    require_shape(gout, {d.n, d.cout, d.oh, d.ow}, "conv2d_backward: gout");
    const std::size_t span = d.oh * d.ow, krows = d.cg * d.k * d.k;
    const std::size_t groups = static_cast<std::size_t>(groups_n);
    const bool direct = d.k == 1 && stride == 1 && padding == 0;

    if (gb)
        for (std::size_t n = 0; n < d.n; ++n)
            for (std::size_t c = 0; c < d.cout; ++c) {
                const double* g = gout.data.data() + (n * d.cout + c) * span;
                double acc = 0.0;
                for (std::size_t i = 0; i < span; ++i) acc += g[i];
                gb->data[c] += acc;
            }

    std::vector<double> col(direct ? 0 : krows * span);
    std::vector<double> colT(gw ? span * krows : 0);
    std::vector<double> wT((gx && !direct) ? krows * d.cog : 0);
    std::vector<double> dcol((gx && !direct) ? krows * span : 0);

    for (std::size_t g = 0; g < groups; ++g) {
        const double* wg = w.data.data() + g * d.cog * krows;
        if (gx && !direct) transpose(wg, d.cog, krows, wT.data());
        for (std::size_t n = 0; n < d.n; ++n) {
            const double* xg = x.data.data() + (n * d.cin + g * d.cg) * d.h * d.w;
            const double* go = gout.data.data() + (n * d.cout + g * d.cog) * span;
            const double* cols = xg;
            if (!direct) {
                im2col(xg, d, stride, padding, col.data());
                cols = col.data();
            }
            if (gw) {
                transpose(cols, krows, span, colT.data());
                gemm_nn(d.cog, krows, span, go, colT.data(), gw->data.data() + g * d.cog * krows, true);
            }
            if (gx) {
                double* gxg = gx->data.data() + (n * d.cin + g * d.cg) * d.h * d.w;
                if (direct) {
                    // dX = W^T * gout, accumulated straight into the input plane
                    for (std::size_t co = 0; co < d.cog; ++co) {
                        const double* gr = go + co * span;
                        for (std::size_t ci = 0; ci < d.cg; ++ci) {
                            const double wv = wg[co * krows + ci];
                            double* dst = gxg + ci * span;
                            for (std::size_t i = 0; i < span; ++i) dst[i] += wv * gr[i];
                        }
                    }
                } else {
                    gemm_nn(krows, span, d.cog, wT.data(), go, dcol.data(), false);
                    col2im_add(dcol.data(), d, stride, padding, gxg);
                }
            }
        }
    }
}

void conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& gout, Tensor* gx,
                     Tensor* gw, Tensor* gb) {
    conv2d_backward(x, p.weight, gout, p.stride, p.padding, p.groups, gx, gw, gb);
}

Tensor batch_norm(const Tensor& x, BnParams& p, bool training, bool update_running, BnSaved* saved) {
    require_rank(x, 4, "batch_norm");
    const std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
    require_shape(p.gamma, {c}, "batch_norm: gamma");
    require_shape(p.beta, {c}, "batch_norm: beta");
    if (!(p.eps > 0.0)) throw std::invalid_argument("batch_norm: eps must be positive");
    const double m = static_cast<double>(n * hw);

    std::vector<double> mean(c, 0.0), var(c, 0.0);
    if (training) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double* src = x.data.data() + (i * c + ch) * hw;
                double acc = 0.0;
                for (std::size_t j = 0; j < hw; ++j) acc += src[j];
                mean[ch] += acc;
            }
        for (std::size_t ch = 0; ch < c; ++ch) mean[ch] /= m;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double* src = x.data.data() + (i * c + ch) * hw;
                const double mu = mean[ch];
                double acc = 0.0;
                for (std::size_t j = 0; j < hw; ++j) {
                    const double dlt = src[j] - mu;
                    acc += dlt * dlt;
                }
                var[ch] += acc;
            }
        for (std::size_t ch = 0; ch < c; ++ch) var[ch] /= m;
        if (update_running) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                p.running_mean.data[ch] = (1.0 - p.momentum) * p.running_mean.data[ch] + p.momentum * mean[ch];
                p.running_var.data[ch] = (1.0 - p.momentum) * p.running_var.data[ch] + p.momentum * var[ch];
            }
        }
    } else {
        mean.assign(p.running_mean.data.begin(), p.running_mean.data.end());
        var.assign(p.running_var.data.begin(), p.running_var.data.end());
    }

    std::vector<double> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + p.eps);

    Tensor out(x.shape);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = x.data.data() + (i * c + ch) * hw;
            double* dst = out.data.data() + (i * c + ch) * hw;
            const double mu = mean[ch], is = inv_std[ch], ga = p.gamma.data[ch], be = p.beta.data[ch];
            for (std::size_t j = 0; j < hw; ++j) dst[j] = ga * (src[j] - mu) * is + be;
        }
    if (saved) {
        saved->mean = std::move(mean);
        saved->inv_std = std::move(inv_std);
        saved->training = training;
    }
    return out;
}

void batch_norm_backward(const Tensor& x, const BnParams& p, const BnSaved& s, const Tensor& gout,
                         Tensor* gx, Tensor* ggamma, Tensor* gbeta) {
    const std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
    const double m = static_cast<double>(n * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double mu = s.mean[ch], is = s.inv_std[ch], ga = p.gamma.data[ch];
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* gsrc = gout.data.data() + (i * c + ch) * hw;
            const double* xsrc = x.data.data() + (i * c + ch) * hw;
            for (std::size_t j = 0; j < hw; ++j) {
                sum_g += gsrc[j];
                sum_gx += gsrc[j] * (xsrc[j] - mu) * is;
            }
        }
        if (ggamma) ggamma->data[ch] += sum_gx;
        if (gbeta) gbeta->data[ch] += sum_g;
        if (gx) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* gsrc = gout.data.data() + (i * c + ch) * hw;
                const double* xsrc = x.data.data() + (i * c + ch) * hw;
                double* dst = gx->data.data() + (i * c + ch) * hw;
                if (s.training) {
                    for (std::size_t j = 0; j < hw; ++j) {
                        const double xhat = (xsrc[j] - mu) * is;
                        dst[j] += ga * is * (gsrc[j] - sum_g / m - xhat * sum_gx / m);
                    }
                } else {
                    for (std::size_t j = 0; j < hw; ++j) dst[j] += ga * is * gsrc[j];
                }
            }
        }
    }
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double v = x.data[i];
        // split on sign for stability at large |v|
        out.data[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) throw std::invalid_argument("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape));
    const std::size_t dim = x.shape[axis];
    std::size_t inner = 1, outer = 1;
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape[i];
    for (std::size_t i = 0; i < axis; ++i) outer *= x.shape[i];
    Tensor out(x.shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * dim * inner + in;
            double mx = x.data[base];
            for (std::size_t d = 1; d < dim; ++d) mx = std::max(mx, x.data[base + d * inner]);
            double z = 0.0;
            for (std::size_t d = 0; d < dim; ++d) {
                const double e = std::exp(x.data[base + d * inner] - mx);
                out.data[base + d * inner] = e;
                z += e;
            }
            for (std::size_t d = 0; d < dim; ++d) out.data[base + d * inner] /= z;
        }
    return out;
}

Tensor max_pool2d(const Tensor& x, int window, int stride, PoolSaved* saved) {
    require_rank(x, 4, "max_pool2d");
    if (window < 1 || stride < 1) throw std::invalid_argument("max_pool2d: bad window/stride");
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t k = static_cast<std::size_t>(window), s = static_cast<std::size_t>(stride);
    if (k > h || k > w)
        throw std::invalid_argument("max_pool2d: window " + std::to_string(window) + " exceeds input " + shape_str(x.shape));
    const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
    Tensor out({n, c, oh, ow});
    if (saved) saved->argmax.assign(n * c * oh * ow, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* plane = x.data.data() + (i * c + ch) * h * w;
            double* dst = out.data.data() + (i * c + ch) * oh * ow;
            for (std::size_t oi = 0; oi < oh; ++oi)
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    double best = plane[oi * s * w + oj * s];
                    std::size_t arg = oi * s * w + oj * s;
                    for (std::size_t ki = 0; ki < k; ++ki)
                        for (std::size_t kj = 0; kj < k; ++kj) {
                            const std::size_t pos = (oi * s + ki) * w + oj * s + kj;
                            if (plane[pos] > best) {
                                best = plane[pos];
                                arg = pos;
                            }
                        }
                    dst[oi * ow + oj] = best;
                    if (saved) saved->argmax[((i * c + ch) * oh + oi) * ow + oj] = arg;
                }
        }
    return out;
}

namespace {

inline void pool_region(std::size_t i, std::size_t in, std::size_t out, std::size_t* lo, std::size_t* hi) {
    *lo = (i * in) / out;
    *hi = ((i + 1) * in + out - 1) / out;  // ceil
}

}  // namespace

Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t oh, std::size_t ow) {
    require_rank(x, 4, "adaptive_avg_pool2d");
    if (oh == 0 || ow == 0) throw std::invalid_argument("adaptive_avg_pool2d: zero output dims");
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    Tensor out({n, c, oh, ow});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* plane = x.data.data() + (i * c + ch) * h * w;
            double* dst = out.data.data() + (i * c + ch) * oh * ow;
            for (std::size_t oi = 0; oi < oh; ++oi) {
                std::size_t r0, r1;
                pool_region(oi, h, oh, &r0, &r1);
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    std::size_t c0, c1;
                    pool_region(oj, w, ow, &c0, &c1);
                    double acc = 0.0;
                    for (std::size_t r = r0; r < r1; ++r)
                        for (std::size_t cc = c0; cc < c1; ++cc) acc += plane[r * w + cc];
                    dst[oi * ow + oj] = acc / static_cast<double>((r1 - r0) * (c1 - c0));
                }
            }
        }
    return out;
}

void adaptive_avg_pool2d_backward(const Tensor& gout, std::size_t h, std::size_t w, Tensor* gx) {
    const std::size_t n = gout.shape[0], c = gout.shape[1], oh = gout.shape[2], ow = gout.shape[3];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* g = gout.data.data() + (i * c + ch) * oh * ow;
            double* dst = gx->data.data() + (i * c + ch) * h * w;
            for (std::size_t oi = 0; oi < oh; ++oi) {
                std::size_t r0, r1;
                pool_region(oi, h, oh, &r0, &r1);
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    std::size_t c0, c1;
                    pool_region(oj, w, ow, &c0, &c1);
                    const double gv = g[oi * ow + oj] / static_cast<double>((r1 - r0) * (c1 - c0));
                    for (std::size_t r = r0; r < r1; ++r)
                        for (std::size_t cc = c0; cc < c1; ++cc) dst[r * w + cc] += gv;
                }
            }
        }
}

namespace {

struct Lerp {
    std::size_t i0, i1;
    double t;
};

Lerp lerp_coord(std::size_t dst, std::size_t in, std::size_t out) {
    const double src = (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    double fl = std::floor(src);
    Lerp l;
    l.t = src - fl;
    long i0 = static_cast<long>(fl);
    long i1 = i0 + 1;
    l.i0 = static_cast<std::size_t>(std::clamp(i0, 0l, static_cast<long>(in) - 1));
    l.i1 = static_cast<std::size_t>(std::clamp(i1, 0l, static_cast<long>(in) - 1));
    return l;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t oh, std::size_t ow) {
    require_rank(x, 4, "bilinear_resize");
    if (oh == 0 || ow == 0) throw std::invalid_argument("bilinear_resize: zero output dims");
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (h == oh && w == ow) return x;
    Tensor out({n, c, oh, ow});
    std::vector<Lerp> rows(oh), cols(ow);
    for (std::size_t i = 0; i < oh; ++i) rows[i] = lerp_coord(i, h, oh);
    for (std::size_t j = 0; j < ow; ++j) cols[j] = lerp_coord(j, w, ow);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* plane = x.data.data() + (i * c + ch) * h * w;
            double* dst = out.data.data() + (i * c + ch) * oh * ow;
            for (std::size_t oi = 0; oi < oh; ++oi) {
                const Lerp& r = rows[oi];
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    const Lerp& cc = cols[oj];
                    const double top = plane[r.i0 * w + cc.i0] * (1.0 - cc.t) + plane[r.i0 * w + cc.i1] * cc.t;
                    const double bot = plane[r.i1 * w + cc.i0] * (1.0 - cc.t) + plane[r.i1 * w + cc.i1] * cc.t;
                    dst[oi * ow + oj] = top * (1.0 - r.t) + bot * r.t;
                }
            }
        }
    return out;
}

void bilinear_resize_backward(const Tensor& gout, std::size_t h, std::size_t w, Tensor* gx) {
    const std::size_t n = gout.shape[0], c = gout.shape[1], oh = gout.shape[2], ow = gout.shape[3];
    if (h == oh && w == ow) {
        for (std::size_t i = 0; i < gout.data.size(); ++i) gx->data[i] += gout.data[i];
        return;
    }
    std::vector<Lerp> rows(oh), cols(ow);
    for (std::size_t i = 0; i < oh; ++i) rows[i] = lerp_coord(i, h, oh);
    for (std::size_t j = 0; j < ow; ++j) cols[j] = lerp_coord(j, w, ow);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* g = gout.data.data() + (i * c + ch) * oh * ow;
            double* dst = gx->data.data() + (i * c + ch) * h * w;
            for (std::size_t oi = 0; oi < oh; ++oi) {
                const Lerp& r = rows[oi];
                for (std::size_t oj = 0; oj < ow; ++oj) {
                    const Lerp& cc = cols[oj];
                    const double gv = g[oi * ow + oj];
                    dst[r.i0 * w + cc.i0] += gv * (1.0 - r.t) * (1.0 - cc.t);
                    dst[r.i0 * w + cc.i1] += gv * (1.0 - r.t) * cc.t;
                    dst[r.i1 * w + cc.i0] += gv * r.t * (1.0 - cc.t);
                    dst[r.i1 * w + cc.i1] += gv * r.t * cc.t;
                }
            }
        }
}

Tensor center_crop(const Tensor& x, std::size_t oh, std::size_t ow) {
    require_rank(x, 4, "center_crop");
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    if (oh > h || ow > w)
        throw std::invalid_argument("center_crop: requested " + std::to_string(oh) + "x" + std::to_string(ow) +
                                    " exceeds input " + shape_str(x.shape));
    const std::size_t r0 = (h - oh) / 2, c0 = (w - ow) / 2;
    Tensor out({n, c, oh, ow});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t r = 0; r < oh; ++r) {
                const double* src = x.data.data() + ((i * c + ch) * h + r0 + r) * w + c0;
                double* dst = out.data.data() + ((i * c + ch) * oh + r) * ow;
                std::copy(src, src + ow, dst);
            }
    return out;
}

void center_crop_backward(const Tensor& gout, std::size_t h, std::size_t w, Tensor* gx) {
    const std::size_t n = gout.shape[0], c = gout.shape[1], oh = gout.shape[2], ow = gout.shape[3];
    const std::size_t r0 = (h - oh) / 2, c0 = (w - ow) / 2;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t r = 0; r < oh; ++r) {
                const double* src = gout.data.data() + ((i * c + ch) * oh + r) * ow;
                double* dst = gx->data.data() + ((i * c + ch) * h + r0 + r) * w + c0;
                for (std::size_t j = 0; j < ow; ++j) dst[j] += src[j];
            }
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "linear");
    require_rank(w, 2, "linear: weight");
    const std::size_t n = x.shape[0], din = x.shape[1], dout = w.shape[0];
    if (w.shape[1] != din)
        throw std::invalid_argument("linear: weight " + shape_str(w.shape) + " does not match input " + shape_str(x.shape));
    if (!b.data.empty() && b.shape != std::vector<std::size_t>{dout})
        throw std::invalid_argument("linear: bias " + shape_str(b.shape) + " does not match " + std::to_string(dout) + " outputs");
    Tensor out({n, dout});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data.data() + i * din;
        double* oi = out.data.data() + i * dout;
        for (std::size_t o = 0; o < dout; ++o) {
            const double* wo = w.data.data() + o * din;
            double acc = b.data.empty() ? 0.0 : b.data[o];
            for (std::size_t j = 0; j < din; ++j) acc += xi[j] * wo[j];
            oi[o] = acc;
        }
    }
    return out;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx, Tensor* gw,
                     Tensor* gb) {
    const std::size_t n = x.shape[0], din = x.shape[1], dout = w.shape[0];
    for (std::size_t i = 0; i < n; ++i) {
        const double* g = gout.data.data() + i * dout;
        const double* xi = x.data.data() + i * din;
        for (std::size_t o = 0; o < dout; ++o) {
            const double gv = g[o];
            if (gb) gb->data[o] += gv;
            if (gw) {
                double* gwo = gw->data.data() + o * din;
                for (std::size_t j = 0; j < din; ++j) gwo[j] += gv * xi[j];
            }
            if (gx) {
                const double* wo = w.data.data() + o * din;
                double* gxi = gx->data.data() + i * din;
                for (std::size_t j = 0; j < din; ++j) gxi[j] += gv * wo[j];
            }
        }
    }
}

Tensor global_avg_pool(const Tensor& x) {
    require_rank(x, 4, "global_avg_pool");
    const std::size_t n = x.shape[0], c = x.shape[1], hw = x.shape[2] * x.shape[3];
    Tensor out({n, c});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* src = x.data.data() + (i * c + ch) * hw;
            double acc = 0.0;
            for (std::size_t j = 0; j < hw; ++j) acc += src[j];
            out.data[(i * c + ch)] = acc / static_cast<double>(hw);
        }
    return out;
}

}  // namespace specx
