#include "specx/fft.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace specx {
namespace fftdetail {
namespace {

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Twiddles e^{-j 2pi k / n} for k < n/2, cached per length.
const std::vector<cplx>& twiddles(std::size_t n) {
    thread_local std::unordered_map<std::size_t, std::vector<cplx>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<cplx> w(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        double ang = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
        w[k] = cplx(std::cos(ang), std::sin(ang));
    }
    return cache.emplace(n, std::move(w)).first->second;
}

void fft_radix2(cplx* a, std::size_t n, bool inverse) {
    // bit reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const std::vector<cplx>& w = twiddles(n);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                cplx tw = w[k * step];
                if (inverse) tw = std::conj(tw);
                cplx u = a[i + k];
                cplx v = a[i + k + len / 2] * tw;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

struct BluesteinPlan {
    std::size_t n = 0, m = 0;
    std::vector<cplx> chirp;    // e^{-j pi k^2 / n}
    std::vector<cplx> kernel_f; // fft of the wrapped conjugate chirp, length m
};

const BluesteinPlan& bluestein_plan(std::size_t n) {
    thread_local std::unordered_map<std::size_t, BluesteinPlan> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    BluesteinPlan p;
    p.n = n;
    p.m = next_pow2(2 * n - 1);
    p.chirp.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small for precision
        std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        double ang = -M_PI * static_cast<double>(k2) / static_cast<double>(n);
        p.chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }
    std::vector<cplx> b(p.m, cplx(0.0, 0.0));
    b[0] = std::conj(p.chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(p.chirp[k]);
        b[p.m - k] = std::conj(p.chirp[k]);
    }
    fft_radix2(b.data(), p.m, false);
    p.kernel_f = std::move(b);
    return cache.emplace(n, std::move(p)).first->second;
}

void fft_bluestein(cplx* a, std::size_t n, bool inverse) {
    // inverse via conj(fft(conj(x))) so one plan serves both directions
    if (inverse)
        for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(a[k]);
    const BluesteinPlan& p = bluestein_plan(n);
    std::vector<cplx> buf(p.m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) buf[k] = a[k] * p.chirp[k];
    fft_radix2(buf.data(), p.m, false);
    for (std::size_t k = 0; k < p.m; ++k) buf[k] *= p.kernel_f[k];
    fft_radix2(buf.data(), p.m, true);
    double inv_m = 1.0 / static_cast<double>(p.m);
    for (std::size_t k = 0; k < n; ++k) a[k] = buf[k] * inv_m * p.chirp[k];
    if (inverse)
        for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(a[k]);
}

}  // namespace

void fft_1d(cplx* a, std::size_t n, bool inverse) {
    if (n == 0) throw std::invalid_argument("fft_1d: zero length");
    if (n == 1) return;
    if (is_pow2(n))
        fft_radix2(a, n, inverse);
    else
        fft_bluestein(a, n, inverse);
}

void fft2_plane(cplx* buf, std::size_t h, std::size_t w, bool inverse) {
    for (std::size_t r = 0; r < h; ++r) fft_1d(buf + r * w, w, inverse);
    std::vector<cplx> col(h);
    for (std::size_t c = 0; c < w; ++c) {
        for (std::size_t r = 0; r < h; ++r) col[r] = buf[r * w + c];
        fft_1d(col.data(), h, inverse);
        for (std::size_t r = 0; r < h; ++r) buf[r * w + c] = col[r];
    }
}

}  // namespace fftdetail

ComplexGrid fft2(const Tensor& x) {
    require_rank(x, 3, "fft2");
    const std::size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (h == 0 || w == 0) throw std::invalid_argument("fft2: empty spatial dims " + shape_str(x.shape));
    ComplexGrid out(c, h, w);
    std::vector<std::complex<double>> buf(h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = x.data.data() + ch * h * w;
        for (std::size_t i = 0; i < h * w; ++i) buf[i] = std::complex<double>(src[i], 0.0);
        fftdetail::fft2_plane(buf.data(), h, w, false);
        for (std::size_t i = 0; i < h * w; ++i) {
            out.re[ch * h * w + i] = buf[i].real();
            out.im[ch * h * w + i] = buf[i].imag();
        }
    }
    return out;
}

Tensor ifft2(const ComplexGrid& f, double* max_residual_imag) {
    const std::size_t c = f.channels, h = f.height, w = f.width;
    if (h == 0 || w == 0 || c == 0) throw std::invalid_argument("ifft2: empty grid");
    Tensor out({c, h, w});
    std::vector<std::complex<double>> buf(h * w);
    double worst_imag = 0.0;
    const double scale = 1.0 / static_cast<double>(h * w);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < h * w; ++i)
            buf[i] = std::complex<double>(f.re[ch * h * w + i], f.im[ch * h * w + i]);
        fftdetail::fft2_plane(buf.data(), h, w, true);
        for (std::size_t i = 0; i < h * w; ++i) {
            out.data[ch * h * w + i] = buf[i].real() * scale;
            worst_imag = std::max(worst_imag, std::abs(buf[i].imag() * scale));
        }
    }
    if (max_residual_imag) *max_residual_imag = worst_imag;
    return out;
}

namespace {

ComplexGrid shift_grid(const ComplexGrid& f, std::size_t dh, std::size_t dw) {
    ComplexGrid out(f.channels, f.height, f.width);
    for (std::size_t c = 0; c < f.channels; ++c)
        for (std::size_t h = 0; h < f.height; ++h) {
            std::size_t th = (h + dh) % f.height;
            for (std::size_t w = 0; w < f.width; ++w) {
                std::size_t tw = (w + dw) % f.width;
                out.re[out.idx(c, th, tw)] = f.re[f.idx(c, h, w)];
                out.im[out.idx(c, th, tw)] = f.im[f.idx(c, h, w)];
            }
        }
    return out;
}

}  // namespace

ComplexGrid fftshift(const ComplexGrid& f) { return shift_grid(f, f.height / 2, f.width / 2); }

ComplexGrid ifftshift(const ComplexGrid& f) {
    return shift_grid(f, f.height - f.height / 2, f.width - f.width / 2);
}

Tensor log_magnitude_spectrum(const Tensor& x) {
    require_rank(x, 3, "log_magnitude_spectrum");
    ComplexGrid f = fftshift(fft2(x));
    const std::size_t c = f.channels, h = f.height, w = f.width;
    Tensor out({1, h, w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h * w; ++i)
            out.data[i] += std::log1p(std::hypot(f.re[ch * h * w + i], f.im[ch * h * w + i]));
    double lo = out.data[0] / static_cast<double>(c), hi = lo;
    for (double& v : out.data) {
        v /= static_cast<double>(c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi > lo)
        for (double& v : out.data) v = (v - lo) / (hi - lo);
    else
        std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
}

}  // namespace specx
