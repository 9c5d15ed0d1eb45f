#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace specx {

// Dense row-major tensor of doubles with an optional gradient buffer.
// All compute runs in double; the f32 storage option only affects
// checkpoint payload width (see checkpoint.hpp).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless allocated via ensure_grad()

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    Tensor(std::vector<std::size_t> s, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> s);
    static Tensor full(std::vector<std::size_t> s, double v);

    std::size_t numel() const;
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const;

    bool has_grad() const { return !grad.empty(); }
    void ensure_grad();
    void zero_grad();

    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // Flat offsets for the common ranks; bounds are the caller's problem.
    std::size_t idx2(std::size_t i, std::size_t j) const { return i * shape[1] + j; }
    std::size_t idx3(std::size_t c, std::size_t h, std::size_t w) const {
        return (c * shape[1] + h) * shape[2] + w;
    }
    std::size_t idx4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return ((n * shape[1] + c) * shape[2] + h) * shape[3] + w;
    }

    double& at2(std::size_t i, std::size_t j) { return data[idx2(i, j)]; }
    double at2(std::size_t i, std::size_t j) const { return data[idx2(i, j)]; }
    double& at3(std::size_t c, std::size_t h, std::size_t w) { return data[idx3(c, h, w)]; }
    double at3(std::size_t c, std::size_t h, std::size_t w) const { return data[idx3(c, h, w)]; }
    double& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[idx4(n, c, h, w)];
    }
    double at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[idx4(n, c, h, w)];
    }
};

std::size_t shape_numel(const std::vector<std::size_t>& s);
std::string shape_str(const std::vector<std::size_t>& s);

// Throws std::invalid_argument naming `what` and both shapes on mismatch.
void require_shape(const Tensor& t, const std::vector<std::size_t>& expect, const char* what);
void require_rank(const Tensor& t, std::size_t rank, const char* what);

}  // namespace specx
