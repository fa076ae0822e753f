#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "starsent/rng.hpp"

namespace starsent::nn {

// Dense row-major matrix of doubles. All model math runs in 64-bit so the
// finite-difference gradient checks are meaningful.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    double* row(size_t r) { return data.data() + r * cols; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    size_t size() const { return data.size(); }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // A * B^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // A^T * B

Matrix add(const Matrix& a, const Matrix& b);
void add_in_place(Matrix& a, const Matrix& b);
void scale_in_place(Matrix& a, double s);
void add_row_bias(Matrix& a, const std::vector<double>& bias);
std::vector<double> column_sums(const Matrix& a);
bool all_finite(const Matrix& a);

// Row-wise softmax; -inf entries become exact zeros.
Matrix softmax_rows(const Matrix& scores);
// Gradient through a row-wise softmax: given probs P and upstream dP.
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& dprobs);

double gelu(double x);        // tanh approximation
double gelu_derivative(double x);
void gelu_in_place(Matrix& a);

struct LayerNormCache {
    std::vector<double> mean;  // per row
    std::vector<double> rstd;  // per row
    Matrix normalized;         // pre scale/bias
};

inline constexpr double kLayerNormEps = 1e-12;

Matrix layer_norm(const Matrix& x, const std::vector<double>& scale,
                  const std::vector<double>& bias, LayerNormCache* cache);
Matrix layer_norm_backward(const Matrix& dy, const Matrix& x, const std::vector<double>& scale,
                           const LayerNormCache& cache, std::vector<double>& dscale,
                           std::vector<double>& dbias);

// Inverted dropout: zero entries with probability p and scale survivors by
// 1/(1-p). Identity in inference mode. The mask (already scaled) is written
// to *mask when non-null so the backward pass can reuse it.
Matrix apply_dropout(const Matrix& x, double p, Rng* rng, bool training,
                     Matrix* mask = nullptr);

}  // namespace starsent::nn
