#include "zsbc/tensor.hpp"

#include <algorithm>

namespace zsbc {

void require_same_shape(const Tensor& a, const Tensor& b, const char* ctx) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(ctx) + ": shape mismatch");
}

namespace {

template <typename F>
Tensor map1(const Tensor& a, F f) {
    Tensor out(a.shape());
    const real* p = a.data();
    real* q = out.data();
    for (int64_t i = 0; i < a.size(); ++i) q[i] = f(p[i]);
    return out;
}

template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, const char* ctx, F f) {
    require_same_shape(a, b, ctx);
    Tensor out(a.shape());
    const real* p = a.data();
    const real* q = b.data();
    real* r = out.data();
    for (int64_t i = 0; i < a.size(); ++i) r[i] = f(p[i], q[i]);
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return map2(a, b, "add", [](real x, real y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return map2(a, b, "sub", [](real x, real y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return map2(a, b, "mul", [](real x, real y) { return x * y; });
}

Tensor scale(const Tensor& a, real s) {
    return map1(a, [s](real x) { return x * s; });
}

Tensor add_scalar(const Tensor& a, real s) {
    return map1(a, [s](real x) { return x + s; });
}

Tensor tanh_map(const Tensor& a) {
    return map1(a, [](real x) { return std::tanh(x); });
}

Tensor sigmoid_map(const Tensor& a) {
    return map1(a, [](real x) { return sigmoid(x); });
}

Tensor relu_map(const Tensor& a) {
    return map1(a, [](real x) { return x > 0.0 ? x : 0.0; });
}

Tensor abs_map(const Tensor& a) {
    return map1(a, [](real x) { return std::abs(x); });
}

Tensor square_map(const Tensor& a) {
    return map1(a, [](real x) { return x * x; });
}

Tensor mul_backward_lhs(const Tensor& g, const Tensor& rhs) {
    return mul(g, rhs);
}

Tensor tanh_backward(const Tensor& y, const Tensor& g) {
    return map2(y, g, "tanh_backward", [](real t, real u) { return u * (1.0 - t * t); });
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& g) {
    return map2(y, g, "sigmoid_backward", [](real s, real u) { return u * s * (1.0 - s); });
}

Tensor relu_backward(const Tensor& x, const Tensor& g) {
    return map2(x, g, "relu_backward", [](real v, real u) { return v > 0.0 ? u : 0.0; });
}

Tensor abs_backward(const Tensor& x, const Tensor& g) {
    return map2(x, g, "abs_backward", [](real v, real u) {
        if (v > 0.0) return u;
        if (v < 0.0) return -u;
        return 0.0;  // subgradient at the kink
    });
}

Tensor square_backward(const Tensor& x, const Tensor& g) {
    return map2(x, g, "square_backward", [](real v, real u) { return 2.0 * v * u; });
}

real sum(const Tensor& a) {
    double acc = 0.0;
    const real* p = a.data();
    for (int64_t i = 0; i < a.size(); ++i) acc += p[i];
    return acc;
}

real mean(const Tensor& a) {
    if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
    return sum(a) / static_cast<double>(a.size());
}

real mean_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mean_abs_diff");
    double acc = 0.0;
    const real* p = a.data();
    const real* q = b.data();
    for (int64_t i = 0; i < a.size(); ++i) acc += std::abs(p[i] - q[i]);
    return acc / static_cast<double>(a.size());
}

real max_abs(const Tensor& a) {
    double m = 0.0;
    const real* p = a.data();
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(p[i]));
    return m;
}

}  // namespace zsbc
