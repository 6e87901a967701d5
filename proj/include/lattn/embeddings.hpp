#pragma once

#include <span>
#include <vector>

#include "lattn/tensor.hpp"

namespace lattn {

// Dictionary embedding: output row j is theta row ids[j]. The PAD row of
// theta is pinned to zero, so PAD positions embed to zero.
Tensor dict_embed(const std::vector<int>& ids, const Tensor& theta);

// Scatter-adds dE rows back into dtheta rows. PAD positions are skipped so
// the pinned row never accumulates gradient.
void dict_embed_backward(const std::vector<int>& ids, const Tensor& dE, Tensor& dtheta);

// One LSTM step. T packs input, recurrent and bias weights as a
// {4m, d_in + m + 1} matrix acting on [x; h_prev; 1]; row blocks are the
// input, forget, output and candidate gates in that order:
//   (i, f, o) = sigmoid, g = tanh of the four pre-activation blocks,
//   c = f (.) c_prev + i (.) g,   h = o (.) tanh(c).
void lstm_cell(std::span<const double> x, std::span<const double> h_prev,
               std::span<const double> c_prev, const Tensor& T, size_t m,
               std::span<double> h_out, std::span<double> c_out);

// Everything the backward pass needs from a forward run, one row per step
// in processing order.
struct LstmTrace {
    Tensor x;                          // {J, d_in} inputs
    Tensor i, f, o, g, c, tanh_c, h;   // {J, m}
};

// Runs the cell over the rows of xs with zero initial state.
LstmTrace lstm_run(const Tensor& xs, const Tensor& T, size_t m);

// Backpropagates through time. dh holds the gradient w.r.t. every h row in
// processing order; dT and dxs are accumulated into.
void lstm_backward(const LstmTrace& trace, const Tensor& T, const Tensor& dh, Tensor& dT,
                   Tensor& dxs);

struct BdlstmTrace {
    LstmTrace fwd;  // processes xs rows 0..J-1
    LstmTrace bwd;  // processes xs rows J-1..0
    Tensor out;     // {J, 2m}: row t = [fwd h_t ; bwd h aligned to t]
};

// Bidirectional embedding: row t = [h_fwd at t ; h_bwd at t] with the
// backward half aligned so both halves describe the same token position.
BdlstmTrace bdlstm_embed(const Tensor& xs, const Tensor& T_fwd, const Tensor& T_bwd,
                         size_t m);

// Splits a {J, 2m} output gradient into per-direction {J, m} dh matrices in
// each direction's processing order.
std::pair<Tensor, Tensor> bdlstm_split_grad(const Tensor& dout, size_t m);

// Runs both BPTT passes and re-aligns the input gradients to original token
// order. dh_fwd/dh_bwd are in processing order (see bdlstm_split_grad); the
// final-state head instead writes its gradient into the last row of each.
void bdlstm_backward(const BdlstmTrace& trace, const Tensor& T_fwd, const Tensor& T_bwd,
                     const Tensor& dh_fwd, const Tensor& dh_bwd, Tensor& dT_fwd,
                     Tensor& dT_bwd, Tensor& dxs);

}  // namespace lattn
