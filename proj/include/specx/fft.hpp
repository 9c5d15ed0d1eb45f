#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "specx/tensor.hpp"

namespace specx {

// Frequency-domain view of a [C,H,W] tensor. Planes are row-major per channel.
struct ComplexGrid {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<double> re, im;

    ComplexGrid() = default;
    ComplexGrid(std::size_t c, std::size_t h, std::size_t w)
        : channels(c), height(h), width(w), re(c * h * w, 0.0), im(c * h * w, 0.0) {}

    std::size_t idx(std::size_t c, std::size_t h, std::size_t w) const {
        return (c * height + h) * width + w;
    }
    std::size_t numel() const { return channels * height * width; }
};

// Unnormalized forward 2-D DFT per channel: F(u,v) = sum x(h,w) e^{-j2pi(uh/H+vw/W)}.
ComplexGrid fft2(const Tensor& x);

// Inverse transform with 1/(HW) scaling; returns the real part. If max_residual_imag
// is non-null it receives the largest |imaginary| component left after inversion.
Tensor ifft2(const ComplexGrid& f, double* max_residual_imag = nullptr);

// Cyclic shift moving the DC bin to the spatial center (by floor(dim/2) per axis).
ComplexGrid fftshift(const ComplexGrid& f);
// Exact inverse of fftshift, including odd dims.
ComplexGrid ifftshift(const ComplexGrid& f);

// Channel-mean log(1+|F|) of the shifted spectrum, min-max normalized to [0,1].
Tensor log_magnitude_spectrum(const Tensor& x);

namespace fftdetail {

// In-place unnormalized 1-D transform of length n; radix-2 when n is a power of
// two, Bluestein chirp-z otherwise. inverse=true conjugates the kernel (no 1/n).
void fft_1d(std::complex<double>* a, std::size_t n, bool inverse);

// In-place unnormalized 2-D transform of one row-major h*w plane.
void fft2_plane(std::complex<double>* buf, std::size_t h, std::size_t w, bool inverse);

}  // namespace fftdetail

}  // namespace specx
