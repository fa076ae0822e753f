#pragma once

// Scalar reference implementation of the transformer forward passes, written
// independently of the library's Matrix code path: plain nested vectors,
// explicit loops, its own softmax/layer-norm/GELU. Used as the oracle for
// the forward-pass checks.

#include <cmath>
#include <string>
#include <vector>

#include "starsent/model.hpp"

namespace starsent::scalarref {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Mat linear(const Mat& x, const Mat& w, const Vec& b) {
    Mat y(x.size(), Vec(b.size(), 0.0));
    for (size_t i = 0; i < x.size(); ++i) {
        for (size_t o = 0; o < b.size(); ++o) {
            double acc = b[o];
            for (size_t k = 0; k < x[i].size(); ++k) acc += x[i][k] * w[k][o];
            y[i][o] = acc;
        }
    }
    return y;
}

inline Vec softmax(const Vec& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    Vec e(v.size());
    double sum = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        e[i] = std::exp(v[i] - mx);
        sum += e[i];
    }
    for (double& x : e) x /= sum;
    return e;
}

inline Mat attention(const Mat& q, const Mat& k, const Mat& v, int n_heads, bool causal) {
    const size_t d = q[0].size();
    const size_t dh = d / static_cast<size_t>(n_heads);
    Mat out(q.size(), Vec(d, 0.0));
    for (int h = 0; h < n_heads; ++h) {
        const size_t off = static_cast<size_t>(h) * dh;
        for (size_t i = 0; i < q.size(); ++i) {
            Vec scores;
            for (size_t j = 0; j < k.size(); ++j) {
                if (causal && j > i) break;
                double dot = 0.0;
                for (size_t c = 0; c < dh; ++c) dot += q[i][off + c] * k[j][off + c];
                scores.push_back(dot / std::sqrt(static_cast<double>(dh)));
            }
            const Vec p = softmax(scores);
            for (size_t j = 0; j < p.size(); ++j) {
                for (size_t c = 0; c < dh; ++c) out[i][off + c] += p[j] * v[j][off + c];
            }
        }
    }
    return out;
}

inline Mat layer_norm(const Mat& x, const Vec& scale, const Vec& bias) {
    const double eps = 1e-12;
    Mat y(x.size(), Vec(x[0].size(), 0.0));
    for (size_t i = 0; i < x.size(); ++i) {
        const double n = static_cast<double>(x[i].size());
        double mean = 0.0;
        for (double v : x[i]) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : x[i]) var += (v - mean) * (v - mean);
        var /= n;
        for (size_t j = 0; j < x[i].size(); ++j) {
            y[i][j] = (x[i][j] - mean) / std::sqrt(var + eps) * scale[j] + bias[j];
        }
    }
    return y;
}

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

inline Mat get2d(const model::WeightBundle& w, const std::string& name) {
    const auto& a = w.at(name);
    Mat m(a.shape[0], Vec(a.shape[1], 0.0));
    for (size_t i = 0; i < a.shape[0]; ++i) {
        for (size_t j = 0; j < a.shape[1]; ++j) m[i][j] = a.data[i * a.shape[1] + j];
    }
    return m;
}

inline Vec get1d(const model::WeightBundle& w, const std::string& name) {
    return w.at(name).data;
}

inline void add_rows(Mat& a, const Mat& b) {
    for (size_t i = 0; i < a.size(); ++i) {
        for (size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    }
}

inline Mat encoder_layer(const Mat& x, const model::WeightBundle& w, const std::string& p,
                         int n_heads) {
    const Mat q = linear(x, get2d(w, p + ".attn.q.w"), get1d(w, p + ".attn.q.b"));
    const Mat k = linear(x, get2d(w, p + ".attn.k.w"), get1d(w, p + ".attn.k.b"));
    const Mat v = linear(x, get2d(w, p + ".attn.v.w"), get1d(w, p + ".attn.v.b"));
    const Mat ctx = attention(q, k, v, n_heads, false);
    const Mat attn_out = linear(ctx, get2d(w, p + ".attn.o.w"), get1d(w, p + ".attn.o.b"));
    Mat res1 = x;
    add_rows(res1, attn_out);
    const Mat mid = layer_norm(res1, get1d(w, p + ".ln1.scale"), get1d(w, p + ".ln1.bias"));
    Mat h = linear(mid, get2d(w, p + ".ff.w1"), get1d(w, p + ".ff.b1"));
    for (auto& row : h) {
        for (double& val : row) val = gelu(val);
    }
    const Mat ff_out = linear(h, get2d(w, p + ".ff.w2"), get1d(w, p + ".ff.b2"));
    Mat res2 = mid;
    add_rows(res2, ff_out);
    return layer_norm(res2, get1d(w, p + ".ln2.scale"), get1d(w, p + ".ln2.bias"));
}

inline Mat embed(const std::vector<int>& ids, const model::WeightBundle& w, size_t d) {
    const auto& tok = w.at("embeddings.token");
    const auto& pos = w.at("embeddings.position");
    Mat x(ids.size(), Vec(d, 0.0));
    for (size_t t = 0; t < ids.size(); ++t) {
        for (size_t j = 0; j < d; ++j) {
            x[t][j] = tok.data[static_cast<size_t>(ids[t]) * d + j] + pos.data[t * d + j];
        }
    }
    return x;
}

inline Vec encoder_classifier(const std::vector<int>& ids, const model::WeightBundle& w,
                              const model::ModelConfig& cfg) {
    Mat x = embed(ids, w, static_cast<size_t>(cfg.d_model));
    for (int l = 0; l < cfg.n_layers; ++l) {
        x = encoder_layer(x, w, "encoder." + std::to_string(l), cfg.n_heads);
    }
    Mat pre = linear({x[0]}, get2d(w, "head.pre_classifier.w"),
                     get1d(w, "head.pre_classifier.b"));
    for (double& v : pre[0]) v = std::max(0.0, v);
    return linear(pre, get2d(w, "head.classifier.w"), get1d(w, "head.classifier.b"))[0];
}

inline Mat decoder_layer(const Mat& x, const Mat& enc, const model::WeightBundle& w,
                         const std::string& p, int n_heads) {
    const Mat q = linear(x, get2d(w, p + ".self_attn.q.w"), get1d(w, p + ".self_attn.q.b"));
    const Mat k = linear(x, get2d(w, p + ".self_attn.k.w"), get1d(w, p + ".self_attn.k.b"));
    const Mat v = linear(x, get2d(w, p + ".self_attn.v.w"), get1d(w, p + ".self_attn.v.b"));
    const Mat sa = attention(q, k, v, n_heads, true);
    const Mat sa_out = linear(sa, get2d(w, p + ".self_attn.o.w"), get1d(w, p + ".self_attn.o.b"));
    Mat res1 = x;
    add_rows(res1, sa_out);
    const Mat x1 = layer_norm(res1, get1d(w, p + ".ln1.scale"), get1d(w, p + ".ln1.bias"));

    const Mat cq = linear(x1, get2d(w, p + ".cross_attn.q.w"), get1d(w, p + ".cross_attn.q.b"));
    const Mat ck = linear(enc, get2d(w, p + ".cross_attn.k.w"), get1d(w, p + ".cross_attn.k.b"));
    const Mat cv = linear(enc, get2d(w, p + ".cross_attn.v.w"), get1d(w, p + ".cross_attn.v.b"));
    const Mat ca = attention(cq, ck, cv, n_heads, false);
    const Mat ca_out =
        linear(ca, get2d(w, p + ".cross_attn.o.w"), get1d(w, p + ".cross_attn.o.b"));
    Mat res2 = x1;
    add_rows(res2, ca_out);
    const Mat x2 = layer_norm(res2, get1d(w, p + ".ln2.scale"), get1d(w, p + ".ln2.bias"));

    Mat h = linear(x2, get2d(w, p + ".ff.w1"), get1d(w, p + ".ff.b1"));
    for (auto& row : h) {
        for (double& val : row) val = gelu(val);
    }
    const Mat ff_out = linear(h, get2d(w, p + ".ff.w2"), get1d(w, p + ".ff.b2"));
    Mat res3 = x2;
    add_rows(res3, ff_out);
    return layer_norm(res3, get1d(w, p + ".ln3.scale"), get1d(w, p + ".ln3.bias"));
}

}  // namespace starsent::scalarref
