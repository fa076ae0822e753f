#include "starsent/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace starsent::nn {

namespace {
void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    check(a.cols == b.rows, "matmul");
    Matrix c(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (size_t k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check(a.cols == b.cols, "matmul_nt");
    Matrix c(a.rows, b.rows);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        for (size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
            c.at(i, j) = acc;
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check(a.rows == b.rows, "matmul_tn");
    Matrix c(a.cols, b.cols);
    for (size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (size_t i = 0; i < a.cols; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c.row(i);
            for (size_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
    check(a.rows == b.rows && a.cols == b.cols, "add");
    Matrix c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

void add_in_place(Matrix& a, const Matrix& b) {
    check(a.rows == b.rows && a.cols == b.cols, "add_in_place");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void scale_in_place(Matrix& a, double s) {
    for (double& v : a.data) v *= s;
}

void add_row_bias(Matrix& a, const std::vector<double>& bias) {
    check(a.cols == bias.size(), "add_row_bias");
    for (size_t i = 0; i < a.rows; ++i) {
        double* row = a.row(i);
        for (size_t j = 0; j < a.cols; ++j) row[j] += bias[j];
    }
}

std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> out(a.cols, 0.0);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* row = a.row(i);
        for (size_t j = 0; j < a.cols; ++j) out[j] += row[j];
    }
    return out;
}

bool all_finite(const Matrix& a) {
    for (double v : a.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix softmax_rows(const Matrix& scores) {
    Matrix probs(scores.rows, scores.cols);
    for (size_t i = 0; i < scores.rows; ++i) {
        const double* in = scores.row(i);
        double* out = probs.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < scores.cols; ++j) mx = std::max(mx, in[j]);
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw std::invalid_argument("softmax row with every position masked");
        }
        double sum = 0.0;
        for (size_t j = 0; j < scores.cols; ++j) {
            const double e = in[j] == -std::numeric_limits<double>::infinity()
                                 ? 0.0
                                 : std::exp(in[j] - mx);
            out[j] = e;
            sum += e;
        }
        for (size_t j = 0; j < scores.cols; ++j) out[j] /= sum;
    }
    return probs;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& dprobs) {
    Matrix dscores(probs.rows, probs.cols);
    for (size_t i = 0; i < probs.rows; ++i) {
        const double* p = probs.row(i);
        const double* dp = dprobs.row(i);
        double dot = 0.0;
        for (size_t j = 0; j < probs.cols; ++j) dot += p[j] * dp[j];
        double* out = dscores.row(i);
        for (size_t j = 0; j < probs.cols; ++j) out[j] = p[j] * (dp[j] - dot);
    }
    return dscores;
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_derivative(double x) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

void gelu_in_place(Matrix& a) {
    for (double& v : a.data) v = gelu(v);
}

Matrix layer_norm(const Matrix& x, const std::vector<double>& scale,
                  const std::vector<double>& bias, LayerNormCache* cache) {
    check(x.cols == scale.size() && x.cols == bias.size(), "layer_norm");
    Matrix out(x.rows, x.cols);
    if (cache) {
        cache->mean.resize(x.rows);
        cache->rstd.resize(x.rows);
        cache->normalized = Matrix(x.rows, x.cols);
    }
    const double n = static_cast<double>(x.cols);
    for (size_t i = 0; i < x.rows; ++i) {
        const double* row = x.row(i);
        double mean = 0.0;
        for (size_t j = 0; j < x.cols; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (size_t j = 0; j < x.cols; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= n;
        const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
        double* orow = out.row(i);
        for (size_t j = 0; j < x.cols; ++j) {
            const double xhat = (row[j] - mean) * rstd;
            if (cache) cache->normalized.at(i, j) = xhat;
            orow[j] = xhat * scale[j] + bias[j];
        }
        if (cache) {
            cache->mean[i] = mean;
            cache->rstd[i] = rstd;
        }
    }
    return out;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& x, const std::vector<double>& scale,
                           const LayerNormCache& cache, std::vector<double>& dscale,
                           std::vector<double>& dbias) {
    check(dy.rows == x.rows && dy.cols == x.cols, "layer_norm_backward");
    dscale.assign(x.cols, 0.0);
    dbias.assign(x.cols, 0.0);
    Matrix dx(x.rows, x.cols);
    const double n = static_cast<double>(x.cols);
    for (size_t i = 0; i < x.rows; ++i) {
        const double* dyr = dy.row(i);
        const double* xhat = cache.normalized.row(i);
        const double rstd = cache.rstd[i];
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (size_t j = 0; j < x.cols; ++j) {
            dscale[j] += dyr[j] * xhat[j];
            dbias[j] += dyr[j];
            const double dxhat = dyr[j] * scale[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat[j];
        }
        double* dxr = dx.row(i);
        for (size_t j = 0; j < x.cols; ++j) {
            const double dxhat = dyr[j] * scale[j];
            dxr[j] = rstd * (dxhat - sum_dxhat / n - xhat[j] * sum_dxhat_xhat / n);
        }
    }
    return dx;
}

Matrix apply_dropout(const Matrix& x, double p, Rng* rng, bool training, Matrix* mask) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
    if (!training || p == 0.0) {
        if (mask) {
            *mask = Matrix(x.rows, x.cols);
            for (double& v : mask->data) v = 1.0;
        }
        return x;
    }
    if (!rng) throw std::invalid_argument("dropout in training mode needs an rng");
    const double keep = 1.0 - p;
    Matrix out(x.rows, x.cols);
    if (mask) *mask = Matrix(x.rows, x.cols);
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double m = rng->next_double() < p ? 0.0 : 1.0 / keep;
        out.data[i] = x.data[i] * m;
        if (mask) mask->data[i] = m;
    }
    return out;
}

}  // namespace starsent::nn
