#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "laketemp/tensor.hpp"

namespace laketemp {

/// LSTM cell weights plus the linear output head. One parameter set serves
/// all depths: depth enters through the input features, so the same cell is
/// unrolled per depth ("global model").
///
/// Recurrent matrices are [hidden x hidden], input matrices
/// [hidden x input], the head [1 x hidden]; biases are rank-1.
struct ModelParams {
    int input_size = 0;
    int hidden_size = 0;

    Tensor w_xc, w_hc, b_c;  // candidate cell state
    Tensor w_xf, w_hf, b_f;  // forget gate
    Tensor w_xg, w_hg, b_g;  // input gate
    Tensor w_xo, w_ho, b_o;  // output gate
    Tensor w_y, b_y;         // linear head

    /// Seeded initialization: weights uniform in [-1/sqrt(hidden), +1/sqrt(hidden)],
    /// biases zero except the forget-gate bias at +1.
    static ModelParams init(int input_size, int hidden_size, uint64_t seed);
    /// All-zero parameters (degenerate-case tests).
    static ModelParams zeros(int input_size, int hidden_size);

    /// Stable name -> tensor ordering; aligns with AdamState slots.
    std::vector<std::pair<std::string, Tensor>> named() const;
    void zero_grads();
    ModelParams clone() const;
};

/// Hidden and cell state for a batch of independent sequences, [batch x hidden].
struct LstmState {
    Tensor h, c;
};

LstmState initial_state(int batch, int hidden_size);

/// One cell update for a batch of sequence rows: x_t is [batch x input].
LstmState lstm_cell_step(const Tensor& x_t, const LstmState& prev, const ModelParams& p);

/// Unrolls the cell over a t-major feature block [t_steps*batch x input]
/// (rows t*batch .. t*batch+batch-1 hold step t) starting from zero state.
/// Returns one [batch x 1] prediction per step, in degrees C.
std::vector<Tensor> forward_window(const Tensor& features, int t_steps, int batch,
                                   const ModelParams& p);

/// Single-sequence forward: features [T x input] -> predictions [T x 1].
Tensor forward_sequence(const Tensor& features, const ModelParams& p);

/// A sparse observation addressed within a forward window.
struct WindowObservation {
    int batch_row = 0;  // depth row within the batch
    int step = 0;       // time step within the window
    double temp_c = 0.0;
};

/// Root-mean-square error over exactly the observed cells. Rejects an empty
/// observation set (distinct from a zero loss).
Tensor rmse_loss(const std::vector<Tensor>& step_preds,
                 const std::vector<WindowObservation>& obs);

}  // namespace laketemp
