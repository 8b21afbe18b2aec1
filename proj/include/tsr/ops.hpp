#ifndef TSR_OPS_HPP
#define TSR_OPS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "tsr/tensor.hpp"

namespace tsr::ops {

// Differentiable operations. Every op validates shapes, computes the forward
// value, and (when `tape` is non-null and an input is tracked) records a
// backward rule on the tape. Passing tape == nullptr gives a plain forward
// evaluation.

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);     // [m,k]*[k,n]
Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b);  // [m,k]*[n,k]^T

Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor add_rowvec(Tape* tape, const Tensor& x, const Tensor& bias);      // [n,d]+[d]
Tensor add_channel_bias(Tape* tape, const Tensor& x, const Tensor& bias);  // bias over dim 0
Tensor scale(Tape* tape, const Tensor& x, double c);
Tensor relu(Tape* tape, const Tensor& x);

Tensor transpose(Tape* tape, const Tensor& x);                   // [n,d] -> [d,n]
Tensor stack_rows(Tape* tape, const std::vector<Tensor>& rows);  // n x [d] -> [n,d]
Tensor mean_rows(Tape* tape, const Tensor& x);                   // [n,d] -> [1,d]
Tensor slice_row(Tape* tape, const Tensor& x, int row);          // [n,d] -> [1,d]
Tensor channel_mean(Tape* tape, const Tensor& x);                // [c,...] -> [1,c]
Tensor softmax_rows(Tape* tape, const Tensor& x);                // [n,d] rows sum to 1

// input [c_in,h,w], kernel [c_out,c_in,k,k]; cross-correlation semantics.
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& kernel, int stride, int padding);
// input [c_in,l], kernel [c_out,c_in,k], stride 1.
Tensor conv1d(Tape* tape, const Tensor& input, const Tensor& kernel, int padding);

// Mean over the batch of -log softmax(logits)[label]; max-subtraction
// stabilized. logits [b,k], labels length b.
Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             const std::vector<std::int64_t>& labels);

// Mean binary cross-entropy on logits; targets in {0,1}, length = numel.
Tensor bce_with_logits(Tape* tape, const Tensor& logits, const std::vector<double>& targets);

Tensor mse_loss(Tape* tape, const Tensor& pred, const Tensor& target);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
// Test oracle; independent of the tape machinery above.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double h);

}  // namespace tsr::ops

#endif
