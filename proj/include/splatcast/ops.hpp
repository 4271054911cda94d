#pragma once

#include "splatcast/tensor.hpp"

namespace splatcast::diff {

// The closed operation set of the differentiable core. Every op produces
// exact analytic gradients w.r.t. each requires_grad input; shape errors
// name the op and both shapes. The single nonlinearity used throughout the
// project is GELU in its exact erf form.

/// Elementwise a + b (identical shapes).
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
/// Elementwise a - b (identical shapes).
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
/// Elementwise a * b. Either operand may be a single-element tensor, which
/// broadcasts over the other.
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
/// a * c for a compile-time-known scalar c.
Tensor scalar_mul(Tape& t, const Tensor& a, double c);

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
/// 2-D transpose.
Tensor transpose(Tape& t, const Tensor& a);

/// x: [Cin,H,W], w: [Cout,Cin,kh,kw] (kh,kw odd), b: [Cout], stride 1 or 2.
/// Zero padding of (k-1)/2 preserves spatial dims at stride 1 and halves
/// them (ceil) at stride 2.
Tensor conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b, int stride);
/// Transposed convolution, stride 2. x: [Cin,H,W], w: [Cin,Cout,kh,kw]
/// (kh,kw odd), b: [Cout]; output [Cout,2H,2W].
Tensor conv_transpose2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b);
/// 2x2 max pooling, stride 2; H and W must be even. Ties route the gradient
/// to the first maximal element in scan order.
Tensor maxpool2x2(Tape& t, const Tensor& x);

/// Concatenate along axis 0; all trailing dims must match.
Tensor concat0(Tape& t, const std::vector<Tensor>& parts);
Tensor reshape(Tape& t, const Tensor& a, Shape new_shape);
/// Reshape to a [1,n] row vector.
Tensor flatten(Tape& t, const Tensor& a);
/// Row i of a 2-D tensor as [1,n].
Tensor slice_row(Tape& t, const Tensor& a, int row);

/// Bilinear resize of [C,H,W] (or [H,W]) to [C,oh,ow], align-corners
/// convention: source coordinate = dest * (in-1)/(out-1), degenerate axes
/// sample index 0. Resizing a constant grid reproduces it exactly.
Tensor bilinear_resize(Tape& t, const Tensor& a, int oh, int ow);

Tensor exp(Tape& t, const Tensor& a);
/// Numerically stable softmax along `axis`.
Tensor softmax(Tape& t, const Tensor& a, int axis);
/// Mean over all elements -> [1].
Tensor mean(Tape& t, const Tensor& a);
/// Sum over all elements -> [1].
Tensor sum(Tape& t, const Tensor& a);
Tensor abs(Tape& t, const Tensor& a);
Tensor square(Tape& t, const Tensor& a);
/// Exact GELU: x/2 * (1 + erf(x/sqrt(2))).
Tensor gelu(Tape& t, const Tensor& a);

/// x: [m,n] plus bias b: [n] broadcast over rows.
Tensor add_bias(Tape& t, const Tensor& x, const Tensor& b);

}  // namespace splatcast::diff
