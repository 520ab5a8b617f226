#include "laketemp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "laketemp/errors.hpp"

namespace laketemp {

namespace detail {

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Chain rule for this node: reads this->grad, accumulates into parents'
    // grad buffers. Null for leaves and for nodes created with the tape off.
    std::function<void(TensorNode&)> backprop;

    int size() const { return static_cast<int>(values.size()); }
    bool is_leaf() const { return !backprop; }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

}  // namespace detail

using detail::TensorNode;

detail::TensorNode* unwrap(const Tensor& t) {
    if (!t.node_) throw NumericError("operation on an undefined tensor");
    return t.node_.get();
}

const std::shared_ptr<TensorNode>& share(const Tensor& t) {
    if (!t.node_) throw NumericError("operation on an undefined tensor");
    return t.node_;
}

Tensor wrap(std::shared_ptr<TensorNode> n) { return Tensor(std::move(n)); }

namespace {

thread_local bool g_grad_enabled = true;

int shape_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw NumericError("tensor must have at least one dimension");
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw NumericError("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, std::vector<double> values,
                                      bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return n;
}

// Leaves get their gradient buffer up front so callers can read zeros before
// any sweep; interior nodes allocate lazily inside backward().
std::shared_ptr<TensorNode> make_leaf(std::vector<int> shape, std::vector<double> values,
                                      bool requires_grad) {
    auto n = make_node(std::move(shape), std::move(values), requires_grad);
    if (requires_grad) n->ensure_grad();
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) throw NumericError(std::string(op) + ": shape mismatch");
}

// Row-major C[M x N] (+)= A[M x K] * B[K x N].
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c,
             bool accumulate) {
    if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

std::vector<double> transposed(const double* a, int rows, int cols) {
    std::vector<double> t(static_cast<size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            t[static_cast<size_t>(j) * rows + i] = a[static_cast<size_t>(i) * cols + j];
    return t;
}

// General row-major product with transpose flags, materializing transposed
// operands once. rows/cols are the *stored* dimensions of a and b.
void gemm(const double* a, int a_rows, int a_cols, bool trans_a, const double* b,
          int b_rows, int b_cols, bool trans_b, double* c, bool accumulate) {
    std::vector<double> at, bt;
    const double* aa = a;
    const double* bb = b;
    int m = a_rows, k = a_cols;
    if (trans_a) {
        at = transposed(a, a_rows, a_cols);
        aa = at.data();
        m = a_cols;
        k = a_rows;
    }
    int k2 = b_rows, n = b_cols;
    if (trans_b) {
        bt = transposed(b, b_rows, b_cols);
        bb = bt.data();
        k2 = b_cols;
        n = b_rows;
    }
    if (k != k2) throw NumericError("matmul: inner dimensions do not agree");
    gemm_nn(m, n, k, aa, bb, c, accumulate);
}

template <class Fwd, class Back>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Back back) {
    check_same_shape(a, b, name);
    TensorNode* an = unwrap(a);
    TensorNode* bn = unwrap(b);
    std::vector<double> out(an->values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(an->values[i], bn->values[i]);
    bool rg = g_grad_enabled && (an->requires_grad || bn->requires_grad);
    auto node = make_node(an->shape, std::move(out), rg);
    if (rg) {
        node->parents = {share(a), share(b)};
        node->backprop = [back](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            if (pa.requires_grad) pa.ensure_grad();
            if (pb.requires_grad) pb.ensure_grad();
            back(self, pa, pb);
        };
    }
    return wrap(node);
}

template <class Fwd, class Back>
Tensor unary_op(const Tensor& x, Fwd fwd, Back back) {
    TensorNode* xn = unwrap(x);
    std::vector<double> out(xn->values.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(xn->values[i]);
    bool rg = g_grad_enabled && xn->requires_grad;
    auto node = make_node(xn->shape, std::move(out), rg);
    if (rg) {
        node->parents = {share(x)};
        node->backprop = [back](TensorNode& self) {
            TensorNode& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.values.size(); ++i)
                p.grad[i] += self.grad[i] * back(p.values[i], self.values[i]);
        };
    }
    return wrap(node);
}

}  // namespace

// -- Tensor handle -----------------------------------------------------------

Tensor::Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    int n = shape_numel(shape);
    return wrap(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    int n = shape_numel(shape);
    return wrap(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return wrap(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
    int n = shape_numel(shape);
    if (n != static_cast<int>(values.size()))
        throw NumericError("from_values: value count does not match shape");
    return wrap(make_leaf(std::move(shape), std::move(values), requires_grad));
}

const std::vector<int>& Tensor::shape() const { return unwrap(*this)->shape; }
int Tensor::size() const { return unwrap(*this)->size(); }
int Tensor::rows() const { return shape()[0]; }

int Tensor::cols() const {
    const auto& s = shape();
    return s.size() >= 2 ? s[1] : 1;
}

bool Tensor::requires_grad() const { return unwrap(*this)->requires_grad; }

std::span<const double> Tensor::values() const {
    auto* n = unwrap(*this);
    return {n->values.data(), n->values.size()};
}

std::span<double> Tensor::values_mut() {
    auto* n = unwrap(*this);
    return {n->values.data(), n->values.size()};
}

std::span<const double> Tensor::grad() const {
    auto* n = unwrap(*this);
    return {n->grad.data(), n->grad.size()};
}

double Tensor::item() const {
    auto* n = unwrap(*this);
    if (n->size() != 1) throw NumericError("item(): tensor is not a scalar");
    return n->values[0];
}

double Tensor::value_at(int i) const {
    auto* n = unwrap(*this);
    if (i < 0 || i >= n->size()) throw NumericError("value_at: index out of range");
    return n->values[i];
}

void Tensor::zero_grad() {
    auto* n = unwrap(*this);
    std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

Tensor Tensor::detached_copy(bool requires_grad) const {
    auto* n = unwrap(*this);
    return wrap(make_leaf(n->shape, n->values, requires_grad));
}

void Tensor::backward() {
    TensorNode* root = unwrap(*this);
    if (root->size() != 1) throw NumericError("backward: loss must be a scalar");

    // Post-order DFS gives topological order; the sweep walks it in reverse.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior gradients are per-sweep scratch; leaf gradients persist so
    // that repeated sweeps accumulate.
    for (TensorNode* n : order) {
        n->ensure_grad();
        if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    root->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// -- operations ---------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](TensorNode& self, TensorNode& pa, TensorNode& pb) {
            const size_t n = self.values.size();
            if (pa.requires_grad)
                for (size_t i = 0; i < n; ++i) pa.grad[i] += self.grad[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < n; ++i) pb.grad[i] += self.grad[i];
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](TensorNode& self, TensorNode& pa, TensorNode& pb) {
            const size_t n = self.values.size();
            if (pa.requires_grad)
                for (size_t i = 0; i < n; ++i) pa.grad[i] += self.grad[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < n; ++i) pb.grad[i] -= self.grad[i];
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](TensorNode& self, TensorNode& pa, TensorNode& pb) {
            const size_t n = self.values.size();
            if (pa.requires_grad)
                for (size_t i = 0; i < n; ++i) pa.grad[i] += self.grad[i] * pb.values[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < n; ++i) pb.grad[i] += self.grad[i] * pa.values[i];
        });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "divide", [](double x, double y) { return x / y; },
        [](TensorNode& self, TensorNode& pa, TensorNode& pb) {
            const size_t n = self.values.size();
            if (pa.requires_grad)
                for (size_t i = 0; i < n; ++i) pa.grad[i] += self.grad[i] / pb.values[i];
            if (pb.requires_grad)
                for (size_t i = 0; i < n; ++i)
                    pb.grad[i] -= self.grad[i] * pa.values[i] / (pb.values[i] * pb.values[i]);
        });
}

Tensor affine(const Tensor& x, double scale, double shift) {
    return unary_op(
        x, [scale, shift](double v) { return scale * v + shift; },
        [scale](double, double) { return scale; });
}

Tensor tanh(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::sqrt(v); },
        // guard the infinite slope at 0 so perfectly-fit losses stay finite
        [](double, double y) { return 0.5 / std::max(y, 1e-12); });
}

Tensor exp(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor sum(const Tensor& x) {
    TensorNode* xn = unwrap(x);
    double acc = 0.0;
    for (double v : xn->values) acc += v;
    bool rg = g_grad_enabled && xn->requires_grad;
    auto node = make_node({1}, {acc}, rg);
    if (rg) {
        node->parents = {share(x)};
        node->backprop = [](TensorNode& self) {
            TensorNode& p = *self.parents[0];
            p.ensure_grad();
            const double g = self.grad[0];
            for (size_t i = 0; i < p.values.size(); ++i) p.grad[i] += g;
        };
    }
    return wrap(node);
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    TensorNode* an = unwrap(a);
    TensorNode* bn = unwrap(b);
    if (an->shape.size() != 2 || bn->shape.size() != 2)
        throw NumericError("matmul: operands must be rank 2");
    const int a_rows = an->shape[0], a_cols = an->shape[1];
    const int b_rows = bn->shape[0], b_cols = bn->shape[1];
    const int m = trans_a ? a_cols : a_rows;
    const int k = trans_a ? a_rows : a_cols;
    const int k2 = trans_b ? b_cols : b_rows;
    const int n = trans_b ? b_rows : b_cols;
    if (k != k2) throw NumericError("matmul: inner dimensions do not agree");

    std::vector<double> out(static_cast<size_t>(m) * n);
    gemm(an->values.data(), a_rows, a_cols, trans_a, bn->values.data(), b_rows, b_cols,
         trans_b, out.data(), false);
    bool rg = g_grad_enabled && (an->requires_grad || bn->requires_grad);
    auto node = make_node({m, n}, std::move(out), rg);
    if (rg) {
        node->parents = {share(a), share(b)};
        node->backprop = [trans_a, trans_b, m, n](TensorNode& self) {
            TensorNode& pa = *self.parents[0];
            TensorNode& pb = *self.parents[1];
            const double* g = self.grad.data();
            const int a_rows = pa.shape[0], a_cols = pa.shape[1];
            const int b_rows = pb.shape[0], b_cols = pb.shape[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                if (!trans_a) {
                    // dA += G * op(B)^T
                    gemm(g, m, n, false, pb.values.data(), b_rows, b_cols, !trans_b,
                         pa.grad.data(), true);
                } else {
                    // dA += op(B) * G^T
                    gemm(pb.values.data(), b_rows, b_cols, trans_b, g, m, n, true,
                         pa.grad.data(), true);
                }
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                if (!trans_b) {
                    // dB += op(A)^T * G
                    gemm(pa.values.data(), a_rows, a_cols, !trans_a, g, m, n, false,
                         pb.grad.data(), true);
                } else {
                    // dB += G^T * op(A)
                    gemm(g, m, n, true, pa.values.data(), a_rows, a_cols, trans_a,
                         pb.grad.data(), true);
                }
            }
        };
    }
    return wrap(node);
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    TensorNode* mn = unwrap(m);
    TensorNode* vn = unwrap(v);
    if (mn->shape.size() != 2 || vn->shape.size() != 1)
        throw NumericError("add_rowvec: expected rank-2 matrix and rank-1 vector");
    const int rows = mn->shape[0], cols = mn->shape[1];
    if (vn->shape[0] != cols) throw NumericError("add_rowvec: vector length != columns");
    std::vector<double> out(mn->values.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out[static_cast<size_t>(r) * cols + c] =
                mn->values[static_cast<size_t>(r) * cols + c] + vn->values[c];
    bool rg = g_grad_enabled && (mn->requires_grad || vn->requires_grad);
    auto node = make_node(mn->shape, std::move(out), rg);
    if (rg) {
        node->parents = {share(m), share(v)};
        node->backprop = [rows, cols](TensorNode& self) {
            TensorNode& pm = *self.parents[0];
            TensorNode& pv = *self.parents[1];
            if (pm.requires_grad) {
                pm.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) pm.grad[i] += self.grad[i];
            }
            if (pv.requires_grad) {
                pv.ensure_grad();
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c)
                        pv.grad[c] += self.grad[static_cast<size_t>(r) * cols + c];
            }
        };
    }
    return wrap(node);
}

Tensor slice_rows(const Tensor& x, int row_begin, int row_end) {
    TensorNode* xn = unwrap(x);
    if (xn->shape.size() != 2) throw NumericError("slice_rows: operand must be rank 2");
    const int rows = xn->shape[0], cols = xn->shape[1];
    if (row_begin < 0 || row_end > rows || row_begin >= row_end)
        throw NumericError("slice_rows: invalid row range");
    const int out_rows = row_end - row_begin;
    std::vector<double> out(static_cast<size_t>(out_rows) * cols);
    std::copy_n(xn->values.data() + static_cast<size_t>(row_begin) * cols, out.size(),
                out.data());
    bool rg = g_grad_enabled && xn->requires_grad;
    auto node = make_node({out_rows, cols}, std::move(out), rg);
    if (rg) {
        node->parents = {share(x)};
        node->backprop = [row_begin, cols](TensorNode& self) {
            TensorNode& p = *self.parents[0];
            p.ensure_grad();
            double* dst = p.grad.data() + static_cast<size_t>(row_begin) * cols;
            for (size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
        };
    }
    return wrap(node);
}

Tensor slice_cols(const Tensor& x, int col_begin, int col_end) {
    TensorNode* xn = unwrap(x);
    if (xn->shape.size() != 2) throw NumericError("slice_cols: operand must be rank 2");
    const int rows = xn->shape[0], cols = xn->shape[1];
    if (col_begin < 0 || col_end > cols || col_begin >= col_end)
        throw NumericError("slice_cols: invalid column range");
    const int out_cols = col_end - col_begin;
    std::vector<double> out(static_cast<size_t>(rows) * out_cols);
    for (int r = 0; r < rows; ++r)
        std::copy_n(xn->values.data() + static_cast<size_t>(r) * cols + col_begin, out_cols,
                    out.data() + static_cast<size_t>(r) * out_cols);
    bool rg = g_grad_enabled && xn->requires_grad;
    auto node = make_node({rows, out_cols}, std::move(out), rg);
    if (rg) {
        node->parents = {share(x)};
        node->backprop = [col_begin, cols, out_cols](TensorNode& self) {
            TensorNode& p = *self.parents[0];
            p.ensure_grad();
            const int rows = p.shape[0];
            for (int r = 0; r < rows; ++r) {
                double* dst = p.grad.data() + static_cast<size_t>(r) * cols + col_begin;
                const double* src = self.grad.data() + static_cast<size_t>(r) * out_cols;
                for (int c = 0; c < out_cols; ++c) dst[c] += src[c];
            }
        };
    }
    return wrap(node);
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw NumericError("concat_vec: no operands");
    int n = 0;
    bool rg_any = false;
    for (const Tensor& t : parts) {
        TensorNode* tn = unwrap(t);
        if (tn->shape.size() != 1) throw NumericError("concat_vec: operands must be rank 1");
        n += tn->shape[0];
        rg_any = rg_any || tn->requires_grad;
    }
    std::vector<double> out;
    out.reserve(n);
    for (const Tensor& t : parts) {
        auto v = t.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    bool rg = g_grad_enabled && rg_any;
    auto node = make_node({n}, std::move(out), rg);
    if (rg) {
        for (const Tensor& t : parts) node->parents.push_back(share(t));
        node->backprop = [](TensorNode& self) {
            size_t off = 0;
            for (auto& pp : self.parents) {
                TensorNode& p = *pp;
                const size_t len = p.values.size();
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (size_t i = 0; i < len; ++i) p.grad[i] += self.grad[off + i];
                }
                off += len;
            }
        };
    }
    return wrap(node);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw NumericError("concat_rows: no operands");
    const int cols = unwrap(parts[0])->shape.size() == 2 ? unwrap(parts[0])->shape[1] : -1;
    if (cols < 0) throw NumericError("concat_rows: operands must be rank 2");
    int rows = 0;
    bool rg_any = false;
    for (const Tensor& t : parts) {
        TensorNode* n = unwrap(t);
        if (n->shape.size() != 2 || n->shape[1] != cols)
            throw NumericError("concat_rows: column counts differ");
        rows += n->shape[0];
        rg_any = rg_any || n->requires_grad;
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(rows) * cols);
    for (const Tensor& t : parts) {
        auto v = t.values();
        out.insert(out.end(), v.begin(), v.end());
    }
    bool rg = g_grad_enabled && rg_any;
    auto node = make_node({rows, cols}, std::move(out), rg);
    if (rg) {
        for (const Tensor& t : parts) node->parents.push_back(share(t));
        node->backprop = [](TensorNode& self) {
            size_t off = 0;
            for (auto& pp : self.parents) {
                TensorNode& p = *pp;
                const size_t n = p.values.size();
                if (p.requires_grad) {
                    p.ensure_grad();
                    for (size_t i = 0; i < n; ++i) p.grad[i] += self.grad[off + i];
                }
                off += n;
            }
        };
    }
    return wrap(node);
}

}  // namespace laketemp
