#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsbc {

using real = double;

// Dense row-major multi-dimensional array. Rank is dynamic; the convolution
// kernels use [C,3,3,3], feature maps [C,D,H,W], raw volumes [D,H,W].
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int64_t> shape, real fill = 0.0)
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    static Tensor from_data(std::vector<int64_t> shape, std::vector<real> data) {
        Tensor t;
        t.shape_ = std::move(shape);
        if (checked_size(t.shape_) != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("Tensor::from_data: buffer length does not match shape");
        t.data_ = std::move(data);
        return t;
    }

    const std::vector<int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    std::vector<real>& buffer() { return data_; }
    const std::vector<real>& buffer() const { return data_; }

    real& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    real operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // [C,D,H,W] indexing
    int64_t idx4(int64_t c, int64_t d, int64_t h, int64_t w) const {
        return ((c * shape_[1] + d) * shape_[2] + h) * shape_[3] + w;
    }
    real& at4(int64_t c, int64_t d, int64_t h, int64_t w) { return data_[static_cast<size_t>(idx4(c, d, h, w))]; }
    real at4(int64_t c, int64_t d, int64_t h, int64_t w) const { return data_[static_cast<size_t>(idx4(c, d, h, w))]; }

    // [D,H,W] indexing
    int64_t idx3(int64_t d, int64_t h, int64_t w) const {
        return (d * shape_[1] + h) * shape_[2] + w;
    }
    real& at3(int64_t d, int64_t h, int64_t w) { return data_[static_cast<size_t>(idx3(d, h, w))]; }
    real at3(int64_t d, int64_t h, int64_t w) const { return data_[static_cast<size_t>(idx3(d, h, w))]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (real v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void require_finite(const char* ctx) const {
        if (!all_finite()) throw std::invalid_argument(std::string(ctx) + ": tensor contains NaN/Inf");
    }

    void fill(real v) { std::fill(data_.begin(), data_.end(), v); }

    // Reinterpret the buffer under a new shape of identical element count.
    Tensor reshaped(std::vector<int64_t> shape) const {
        Tensor t;
        if (checked_size(shape) != size())
            throw std::invalid_argument("Tensor::reshaped: element count mismatch");
        t.shape_ = std::move(shape);
        t.data_ = data_;
        return t;
    }

private:
    static int64_t checked_size(const std::vector<int64_t>& shape) {
        if (shape.empty()) return 0;
        int64_t n = 1;
        for (int64_t e : shape) {
            if (e < 1) throw std::invalid_argument("Tensor: all extents must be >= 1");
            n *= e;
        }
        return n;
    }

    std::vector<int64_t> shape_;
    std::vector<real> data_;
};

// Value/gradient pair for a trainable tensor.
struct GradPair {
    Tensor value;
    Tensor gradient;

    explicit GradPair(Tensor v = Tensor())
        : value(std::move(v)), gradient(value.empty() ? Tensor() : Tensor(value.shape(), 0.0)) {}

    void zero_grad() { gradient.fill(0.0); }
};

// ---- elementwise ops ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real s);
Tensor add_scalar(const Tensor& a, real s);
Tensor tanh_map(const Tensor& a);
Tensor sigmoid_map(const Tensor& a);
Tensor relu_map(const Tensor& a);
Tensor abs_map(const Tensor& a);
Tensor square_map(const Tensor& a);

// Backward rules. `x` is the forward input unless noted; `g` the upstream gradient.
Tensor mul_backward_lhs(const Tensor& g, const Tensor& rhs);
Tensor tanh_backward(const Tensor& y, const Tensor& g);     // y = tanh(x)
Tensor sigmoid_backward(const Tensor& y, const Tensor& g);  // y = sigmoid(x)
Tensor relu_backward(const Tensor& x, const Tensor& g);
Tensor abs_backward(const Tensor& x, const Tensor& g);  // subgradient 0 at x == 0
Tensor square_backward(const Tensor& x, const Tensor& g);

// Reductions accumulate in 64-bit regardless of storage precision.
real sum(const Tensor& a);
real mean(const Tensor& a);
real mean_abs_diff(const Tensor& a, const Tensor& b);
real max_abs(const Tensor& a);

inline real sigmoid(real x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* ctx);

}  // namespace zsbc
