#include "specx/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace specx {

std::size_t shape_numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape))
        throw std::invalid_argument("tensor: " + std::to_string(data.size()) + " values do not fill shape " + shape_str(shape));
}

Tensor Tensor::zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

std::size_t Tensor::numel() const { return data.size(); }

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape.size())
        throw std::invalid_argument("tensor: dim " + std::to_string(i) + " out of range for " + shape_str(shape));
    return shape[i];
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& expect, const char* what) {
    if (t.shape != expect)
        throw std::invalid_argument(std::string(what) + ": expected shape " + shape_str(expect) + ", got " + shape_str(t.shape));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.shape.size() != rank)
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " + shape_str(t.shape));
}

}  // namespace specx
