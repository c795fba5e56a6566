#include "gmn/kernels.hpp"

#include <cassert>

namespace gmn::kernels {

namespace serial {

void dense_forward(const Matrix& x, const Matrix& weight, const std::vector<double>& bias, Matrix& y) {
    assert(x.cols == weight.cols);
    assert(static_cast<int>(bias.size()) == weight.rows);
    y = Matrix(x.rows, weight.rows);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.data.data() + static_cast<std::size_t>(r) * x.cols;
        for (int o = 0; o < weight.rows; ++o) {
            const double* wr = weight.data.data() + static_cast<std::size_t>(o) * weight.cols;
            double acc = bias[o];
            for (int c = 0; c < x.cols; ++c) acc += wr[c] * xr[c];
            y(r, o) = acc;
        }
    }
}

void dense_backward_params(const Matrix& x, const Matrix& d_y, Matrix& d_weight, std::vector<double>& d_bias) {
    assert(x.rows == d_y.rows);
    assert(d_weight.rows == d_y.cols && d_weight.cols == x.cols);
    assert(static_cast<int>(d_bias.size()) == d_y.cols);
    for (int o = 0; o < d_y.cols; ++o) {
        double* dwr = d_weight.data.data() + static_cast<std::size_t>(o) * d_weight.cols;
        double db = 0.0;
        for (int r = 0; r < x.rows; ++r) {
            const double g = d_y(r, o);
            const double* xr = x.data.data() + static_cast<std::size_t>(r) * x.cols;
            for (int c = 0; c < x.cols; ++c) dwr[c] += g * xr[c];
            db += g;
        }
        d_bias[o] += db;
    }
}

void dense_backward_inputs(const Matrix& d_y, const Matrix& weight, Matrix& d_x) {
    assert(d_y.cols == weight.rows);
    d_x = Matrix(d_y.rows, weight.cols);
    for (int r = 0; r < d_y.rows; ++r) {
        double* dxr = d_x.data.data() + static_cast<std::size_t>(r) * d_x.cols;
        for (int o = 0; o < d_y.cols; ++o) {
            const double g = d_y(r, o);
            const double* wr = weight.data.data() + static_cast<std::size_t>(o) * weight.cols;
            for (int c = 0; c < weight.cols; ++c) dxr[c] += g * wr[c];
        }
    }
}

void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& d) {
    assert(a.cols == b.cols);
    d = Matrix(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.data.data() + static_cast<std::size_t>(j) * b.cols;
            double acc = 0.0;
            for (int c = 0; c < a.cols; ++c) {
                const double diff = ar[c] - br[c];
                acc += diff * diff;
            }
            d(i, j) = acc;
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    assert(a.cols == b.cols);
    c = Matrix(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.data.data() + static_cast<std::size_t>(j) * b.cols;
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
            c(i, j) = acc;
        }
    }
}

}  // namespace serial

void dense_forward(const Matrix& x, const Matrix& weight, const std::vector<double>& bias, Matrix& y) {
    assert(x.cols == weight.cols);
    assert(static_cast<int>(bias.size()) == weight.rows);
    y = Matrix(x.rows, weight.rows);
#pragma omp parallel for schedule(static) if (static_cast<long>(x.rows) * weight.rows * x.cols > 16384)
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.data.data() + static_cast<std::size_t>(r) * x.cols;
        for (int o = 0; o < weight.rows; ++o) {
            const double* wr = weight.data.data() + static_cast<std::size_t>(o) * weight.cols;
            double acc = bias[o];
            for (int c = 0; c < x.cols; ++c) acc += wr[c] * xr[c];
            y(r, o) = acc;
        }
    }
}

void dense_backward_params(const Matrix& x, const Matrix& d_y, Matrix& d_weight, std::vector<double>& d_bias) {
    assert(x.rows == d_y.rows);
    assert(d_weight.rows == d_y.cols && d_weight.cols == x.cols);
    assert(static_cast<int>(d_bias.size()) == d_y.cols);
    // Parallel over output rows: each thread owns whole rows of dW, and the
    // batch reduction runs in index order.
#pragma omp parallel for schedule(static) if (static_cast<long>(d_y.cols) * x.rows * x.cols > 16384)
    for (int o = 0; o < d_y.cols; ++o) {
        double* dwr = d_weight.data.data() + static_cast<std::size_t>(o) * d_weight.cols;
        double db = 0.0;
        for (int r = 0; r < x.rows; ++r) {
            const double g = d_y(r, o);
            const double* xr = x.data.data() + static_cast<std::size_t>(r) * x.cols;
            for (int c = 0; c < x.cols; ++c) dwr[c] += g * xr[c];
            db += g;
        }
        d_bias[o] += db;
    }
}

void dense_backward_inputs(const Matrix& d_y, const Matrix& weight, Matrix& d_x) {
    assert(d_y.cols == weight.rows);
    d_x = Matrix(d_y.rows, weight.cols);
#pragma omp parallel for schedule(static) if (static_cast<long>(d_y.rows) * weight.rows * weight.cols > 16384)
    for (int r = 0; r < d_y.rows; ++r) {
        double* dxr = d_x.data.data() + static_cast<std::size_t>(r) * d_x.cols;
        for (int o = 0; o < d_y.cols; ++o) {
            const double g = d_y(r, o);
            const double* wr = weight.data.data() + static_cast<std::size_t>(o) * weight.cols;
            for (int c = 0; c < weight.cols; ++c) dxr[c] += g * wr[c];
        }
    }
}

void pairwise_sqdist(const Matrix& a, const Matrix& b, Matrix& d) {
    assert(a.cols == b.cols);
    d = Matrix(a.rows, b.rows);
#pragma omp parallel for schedule(static) if (static_cast<long>(a.rows) * b.rows * a.cols > 16384)
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.data.data() + static_cast<std::size_t>(j) * b.cols;
            double acc = 0.0;
            for (int c = 0; c < a.cols; ++c) {
                const double diff = ar[c] - br[c];
                acc += diff * diff;
            }
            d(i, j) = acc;
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    assert(a.cols == b.cols);
    c = Matrix(a.rows, b.rows);
#pragma omp parallel for schedule(static) if (static_cast<long>(a.rows) * b.rows * a.cols > 16384)
    for (int i = 0; i < a.rows; ++i) {
        const double* ar = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        for (int j = 0; j < b.rows; ++j) {
            const double* br = b.data.data() + static_cast<std::size_t>(j) * b.cols;
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += ar[k] * br[k];
            c(i, j) = acc;
        }
    }
}

}  // namespace gmn::kernels
