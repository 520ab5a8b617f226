#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace laketemp {

namespace detail {
struct TensorNode;
}

/// Dense 64-bit real tensor participating in a reverse-mode operation tape.
///
/// Every operation on tensors that require gradients records itself on an
/// implicit tape (the parent links of the result node). Calling backward()
/// on a scalar result walks the tape in reverse topological order and
/// accumulates d(result)/d(leaf) into each leaf's gradient buffer.
/// Gradients accumulate across backward calls; reset is explicit via
/// zero_grad().
///
/// Rank 1 and rank 2 tensors are supported. Elementwise operations require
/// identical shapes; matmul / row operations require rank 2.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                              bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    int size() const;
    int rows() const;
    int cols() const;
    bool requires_grad() const;

    std::span<const double> values() const;
    /// Mutable view for in-place parameter updates. Must not be called on
    /// tensors that are still part of a live graph about to be backpropagated.
    std::span<double> values_mut();
    /// Gradient buffer; empty span until backward() has touched this tensor.
    std::span<const double> grad() const;

    double item() const;
    double value_at(int i) const;

    void zero_grad();

    /// Reverse-mode sweep from a scalar result. Throws NumericError for
    /// non-scalar tensors. Leaf gradients accumulate across calls.
    void backward();

    /// Value copy detached from the tape.
    Tensor detached_copy(bool requires_grad = false) const;

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node);
    std::shared_ptr<detail::TensorNode> node_;

    friend detail::TensorNode* unwrap(const Tensor&);
    friend const std::shared_ptr<detail::TensorNode>& share(const Tensor&);
    friend Tensor wrap(std::shared_ptr<detail::TensorNode>);
};

/// Tape recording can be suspended (evaluation passes) with NoGradGuard.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Primitive operations. All differentiable.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
/// scale * x + shift, elementwise with scalar coefficients.
Tensor affine(const Tensor& x, double scale, double shift);
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
/// m: [R x C], v: rank-1 [C]; adds v to every row of m.
Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
/// Sum of all elements, returns a [1] scalar.
Tensor sum(const Tensor& x);
Tensor slice_rows(const Tensor& x, int row_begin, int row_end);
Tensor slice_cols(const Tensor& x, int col_begin, int col_end);
Tensor concat_rows(const std::vector<Tensor>& parts);
/// Concatenate rank-1 tensors into one rank-1 tensor.
Tensor concat_vec(const std::vector<Tensor>& parts);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return divide(a, b); }
inline Tensor operator*(double k, const Tensor& x) { return affine(x, k, 0.0); }
inline Tensor operator*(const Tensor& x, double k) { return affine(x, k, 0.0); }
inline Tensor operator+(const Tensor& x, double c) { return affine(x, 1.0, c); }
inline Tensor operator+(double c, const Tensor& x) { return affine(x, 1.0, c); }
inline Tensor operator-(const Tensor& x, double c) { return affine(x, 1.0, -c); }
inline Tensor operator-(double c, const Tensor& x) { return affine(x, -1.0, c); }
inline Tensor operator-(const Tensor& x) { return affine(x, -1.0, 0.0); }
inline Tensor operator/(const Tensor& x, double k) { return affine(x, 1.0 / k, 0.0); }

}  // namespace laketemp
