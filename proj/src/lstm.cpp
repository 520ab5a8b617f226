#include "laketemp/lstm.hpp"

#include <cmath>
#include <random>

#include "laketemp/errors.hpp"

namespace laketemp {

namespace {

Tensor uniform_tensor(std::vector<int> shape, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    int n = 1;
    for (int d : shape) n *= d;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return Tensor::from_values(std::move(shape), std::move(v), true);
}

struct StackedGates {
    Tensor w_x;  // [4H x F], rows: candidate, forget, input, output
    Tensor w_h;  // [4H x H]
    Tensor b;    // [4H]
};

StackedGates stack_gates(const ModelParams& p) {
    return {concat_rows({p.w_xc, p.w_xf, p.w_xg, p.w_xo}),
            concat_rows({p.w_hc, p.w_hf, p.w_hg, p.w_ho}),
            concat_vec({p.b_c, p.b_f, p.b_g, p.b_o})};
}

/// Gate math shared by the single-step op and the window unroll.
/// pre: [batch x 4H] pre-activations including biases.
LstmState gate_update(const Tensor& pre, const LstmState& prev, int hidden) {
    Tensor c_tilde = tanh(slice_cols(pre, 0, hidden));
    Tensor f = sigmoid(slice_cols(pre, hidden, 2 * hidden));
    Tensor g = sigmoid(slice_cols(pre, 2 * hidden, 3 * hidden));
    Tensor o = sigmoid(slice_cols(pre, 3 * hidden, 4 * hidden));
    Tensor c = add(mul(f, prev.c), mul(g, c_tilde));
    Tensor h = mul(o, tanh(c));
    return {h, c};
}

Tensor head(const Tensor& h, const ModelParams& p) {
    return add_rowvec(matmul(h, p.w_y, false, true), p.b_y);
}

}  // namespace

ModelParams ModelParams::init(int input_size, int hidden_size, uint64_t seed) {
    if (input_size <= 0 || hidden_size <= 0)
        throw NumericError("ModelParams::init: sizes must be positive");
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
    ModelParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.w_xc = uniform_tensor({hidden_size, input_size}, bound, rng);
    p.w_hc = uniform_tensor({hidden_size, hidden_size}, bound, rng);
    p.w_xf = uniform_tensor({hidden_size, input_size}, bound, rng);
    p.w_hf = uniform_tensor({hidden_size, hidden_size}, bound, rng);
    p.w_xg = uniform_tensor({hidden_size, input_size}, bound, rng);
    p.w_hg = uniform_tensor({hidden_size, hidden_size}, bound, rng);
    p.w_xo = uniform_tensor({hidden_size, input_size}, bound, rng);
    p.w_ho = uniform_tensor({hidden_size, hidden_size}, bound, rng);
    p.w_y = uniform_tensor({1, hidden_size}, bound, rng);
    p.b_c = Tensor::zeros({hidden_size}, true);
    p.b_f = Tensor::full({hidden_size}, 1.0, true);  // open forget gate at start
    p.b_g = Tensor::zeros({hidden_size}, true);
    p.b_o = Tensor::zeros({hidden_size}, true);
    p.b_y = Tensor::zeros({1}, true);
    return p;
}

ModelParams ModelParams::zeros(int input_size, int hidden_size) {
    ModelParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.w_xc = Tensor::zeros({hidden_size, input_size}, true);
    p.w_hc = Tensor::zeros({hidden_size, hidden_size}, true);
    p.w_xf = Tensor::zeros({hidden_size, input_size}, true);
    p.w_hf = Tensor::zeros({hidden_size, hidden_size}, true);
    p.w_xg = Tensor::zeros({hidden_size, input_size}, true);
    p.w_hg = Tensor::zeros({hidden_size, hidden_size}, true);
    p.w_xo = Tensor::zeros({hidden_size, input_size}, true);
    p.w_ho = Tensor::zeros({hidden_size, hidden_size}, true);
    p.w_y = Tensor::zeros({1, hidden_size}, true);
    p.b_c = Tensor::zeros({hidden_size}, true);
    p.b_f = Tensor::zeros({hidden_size}, true);
    p.b_g = Tensor::zeros({hidden_size}, true);
    p.b_o = Tensor::zeros({hidden_size}, true);
    p.b_y = Tensor::zeros({1}, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    return {{"w_xc", w_xc}, {"w_hc", w_hc}, {"b_c", b_c}, {"w_xf", w_xf}, {"w_hf", w_hf},
            {"b_f", b_f},   {"w_xg", w_xg}, {"w_hg", w_hg}, {"b_g", b_g}, {"w_xo", w_xo},
            {"w_ho", w_ho}, {"b_o", b_o},   {"w_y", w_y},  {"b_y", b_y}};
}

void ModelParams::zero_grads() {
    for (auto& [name, t] : named()) {
        (void)name;
        t.zero_grad();
    }
}

ModelParams ModelParams::clone() const {
    ModelParams p;
    p.input_size = input_size;
    p.hidden_size = hidden_size;
    p.w_xc = w_xc.detached_copy(true);
    p.w_hc = w_hc.detached_copy(true);
    p.b_c = b_c.detached_copy(true);
    p.w_xf = w_xf.detached_copy(true);
    p.w_hf = w_hf.detached_copy(true);
    p.b_f = b_f.detached_copy(true);
    p.w_xg = w_xg.detached_copy(true);
    p.w_hg = w_hg.detached_copy(true);
    p.b_g = b_g.detached_copy(true);
    p.w_xo = w_xo.detached_copy(true);
    p.w_ho = w_ho.detached_copy(true);
    p.b_o = b_o.detached_copy(true);
    p.w_y = w_y.detached_copy(true);
    p.b_y = b_y.detached_copy(true);
    return p;
}

LstmState initial_state(int batch, int hidden_size) {
    return {Tensor::zeros({batch, hidden_size}), Tensor::zeros({batch, hidden_size})};
}

LstmState lstm_cell_step(const Tensor& x_t, const LstmState& prev, const ModelParams& p) {
    if (x_t.cols() != p.input_size)
        throw NumericError("lstm_cell_step: feature width does not match input_size");
    if (prev.h.cols() != p.hidden_size || prev.c.cols() != p.hidden_size)
        throw NumericError("lstm_cell_step: state width does not match hidden_size");
    StackedGates sg = stack_gates(p);
    Tensor pre = add_rowvec(
        add(matmul(x_t, sg.w_x, false, true), matmul(prev.h, sg.w_h, false, true)), sg.b);
    return gate_update(pre, prev, p.hidden_size);
}

std::vector<Tensor> forward_window(const Tensor& features, int t_steps, int batch,
                                   const ModelParams& p) {
    if (t_steps < 1) throw NumericError("forward_window: empty sequence");
    if (features.rows() != t_steps * batch || features.cols() != p.input_size)
        throw NumericError("forward_window: feature block shape mismatch");

    StackedGates sg = stack_gates(p);
    // The input path has no recurrence, so it is computed for all steps in
    // one product: [T*B x 4H] including biases.
    Tensor x_path = add_rowvec(matmul(features, sg.w_x, false, true), sg.b);

    std::vector<Tensor> preds;
    preds.reserve(t_steps);
    LstmState state = initial_state(batch, p.hidden_size);
    for (int t = 0; t < t_steps; ++t) {
        Tensor pre = add(slice_rows(x_path, t * batch, (t + 1) * batch),
                         matmul(state.h, sg.w_h, false, true));
        state = gate_update(pre, state, p.hidden_size);
        preds.push_back(head(state.h, p));
    }
    return preds;
}

Tensor forward_sequence(const Tensor& features, const ModelParams& p) {
    auto preds = forward_window(features, features.rows(), 1, p);
    return concat_rows(preds);
}

Tensor rmse_loss(const std::vector<Tensor>& step_preds,
                 const std::vector<WindowObservation>& obs) {
    if (obs.empty()) throw DataError("rmse_loss: empty observation set");
    const int t_steps = static_cast<int>(step_preds.size());
    const int batch = t_steps > 0 ? step_preds[0].rows() : 0;

    // Group observations into per-step target/mask vectors; scatter order
    // makes the loss independent of observation ordering.
    std::vector<std::vector<double>> target(t_steps), mask(t_steps);
    for (const auto& ob : obs) {
        if (ob.step < 0 || ob.step >= t_steps || ob.batch_row < 0 || ob.batch_row >= batch)
            throw DataError("rmse_loss: observation outside the prediction window");
        if (target[ob.step].empty()) {
            target[ob.step].assign(batch, 0.0);
            mask[ob.step].assign(batch, 0.0);
        }
        if (mask[ob.step][ob.batch_row] != 0.0)
            throw DataError("rmse_loss: duplicate observation for one (depth, time) cell");
        target[ob.step][ob.batch_row] = ob.temp_c;
        mask[ob.step][ob.batch_row] = 1.0;
    }

    Tensor sse;
    for (int t = 0; t < t_steps; ++t) {
        if (target[t].empty()) continue;
        Tensor y = Tensor::from_values({batch, 1}, target[t]);
        Tensor m = Tensor::from_values({batch, 1}, mask[t]);
        Tensor diff = mul(sub(step_preds[t], y), m);
        Tensor s = sum(mul(diff, diff));
        sse = sse.defined() ? add(sse, s) : s;
    }
    return sqrt(sse / static_cast<double>(obs.size()));
}

}  // namespace laketemp
