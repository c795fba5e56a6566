#pragma once

#include <vector>

#include "gmn/matrix.hpp"

namespace gmn::kernels {

// Dense-layer and pairwise kernels. The parallel versions split work so that
// each output element is owned by exactly one thread and its inner summation
// runs in a fixed order; results are therefore bit-identical to the serial
// reference for any thread count.

// Y = X * W^T + b.  X: B x in, W: out x in, b: out, Y: B x out.
void dense_forward(const Matrix& x, const Matrix& weight, const std::vector<double>& bias, Matrix& y);

// dW += dY^T * X, db += column sums of dY.
void dense_backward_params(const Matrix& x, const Matrix& d_y, Matrix& d_weight, std::vector<double>& d_bias);

// dX = dY * W.
void dense_backward_inputs(const Matrix& d_y, const Matrix& weight, Matrix& d_x);

// D[i][j] = ||A_i - B_j||^2.
void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& d);

// C = A * B^T.
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);

namespace serial {
void dense_forward(const Matrix& x, const Matrix& weight, const std::vector<double>& bias, Matrix& y);
void dense_backward_params(const Matrix& x, const Matrix& d_y, Matrix& d_weight, std::vector<double>& d_bias);
void dense_backward_inputs(const Matrix& d_y, const Matrix& weight, Matrix& d_x);
void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& d);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
}  // namespace serial

}  // namespace gmn::kernels
