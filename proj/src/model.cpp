#include "starsent/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "starsent/text.hpp"
#include "starsent/tokenizer.hpp"

namespace starsent::model {

using nn::Matrix;

void ModelConfig::validate() const {
    if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
        throw std::invalid_argument("d_model must be a positive multiple of n_heads");
    }
    if (d_ff < 1) throw std::invalid_argument("d_ff must be >= 1");
    if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
    if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    if (max_positions < 1) throw std::invalid_argument("max_positions must be >= 1");
    if (dropout_sublayer < 0.0 || dropout_sublayer >= 1.0 || dropout_attention < 0.0 ||
        dropout_attention >= 1.0) {
        throw std::invalid_argument("dropout rates must be in [0, 1)");
    }
}

ModelConfig ModelConfig::reference(int vocab_size, Mode mode) {
    ModelConfig cfg;
    cfg.n_layers = 6;
    cfg.d_model = 768;
    cfg.n_heads = 12;
    cfg.d_ff = 3072;
    cfg.vocab_size = vocab_size;
    cfg.max_positions = 512;
    cfg.mode = mode;
    return cfg;
}

ModelConfig ModelConfig::toy(int vocab_size, Mode mode) {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.d_model = 32;
    cfg.n_heads = 4;
    cfg.d_ff = 64;
    cfg.vocab_size = vocab_size;
    cfg.max_positions = 64;
    cfg.mode = mode;
    return cfg;
}

Array::Array(std::vector<size_t> s) : shape(std::move(s)) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    data.assign(n, 0.0);
}

Array& WeightBundle::at(const std::string& name) {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw std::runtime_error("missing array: " + name);
    return it->second;
}

const Array& WeightBundle::at(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw std::runtime_error("missing array: " + name);
    return it->second;
}

bool WeightBundle::operator==(const WeightBundle& o) const {
    if (arrays.size() != o.arrays.size()) return false;
    for (const auto& [name, a] : arrays) {
        auto it = o.arrays.find(name);
        if (it == o.arrays.end()) return false;
        if (a.shape != it->second.shape || a.data != it->second.data) return false;
    }
    return true;
}

namespace {

void add_attention_shapes(std::map<std::string, std::vector<size_t>>& shapes,
                          const std::string& prefix, size_t d) {
    for (const char* proj : {"q", "k", "v", "o"}) {
        shapes[prefix + "." + proj + ".w"] = {d, d};
        shapes[prefix + "." + proj + ".b"] = {d};
    }
}

void add_layer_norm_shapes(std::map<std::string, std::vector<size_t>>& shapes,
                           const std::string& prefix, size_t d) {
    shapes[prefix + ".scale"] = {d};
    shapes[prefix + ".bias"] = {d};
}

void add_ffn_shapes(std::map<std::string, std::vector<size_t>>& shapes,
                    const std::string& prefix, size_t d, size_t d_ff) {
    shapes[prefix + ".w1"] = {d, d_ff};
    shapes[prefix + ".b1"] = {d_ff};
    shapes[prefix + ".w2"] = {d_ff, d};
    shapes[prefix + ".b2"] = {d};
}

Matrix to_matrix(const Array& a, const std::string& name) {
    if (a.shape.size() != 2) throw std::runtime_error("array " + name + " is not 2-D");
    Matrix m(a.shape[0], a.shape[1]);
    m.data = a.data;
    return m;
}

// y = x * W + b
Matrix linear(const Matrix& x, const WeightBundle& w, const std::string& prefix) {
    Matrix y = nn::matmul(x, to_matrix(w.at(prefix + ".w"), prefix + ".w"));
    nn::add_row_bias(y, w.at(prefix + ".b").data);
    return y;
}

Matrix col_block(const Matrix& m, size_t start, size_t width) {
    Matrix out(m.rows, width);
    for (size_t i = 0; i < m.rows; ++i) {
        for (size_t j = 0; j < width; ++j) out.at(i, j) = m.at(i, start + j);
    }
    return out;
}

void add_col_block(Matrix& dst, const Matrix& src, size_t start) {
    for (size_t i = 0; i < src.rows; ++i) {
        for (size_t j = 0; j < src.cols; ++j) dst.at(i, start + j) += src.at(i, j);
    }
}

}  // namespace

std::map<std::string, std::vector<size_t>> expected_shapes(const ModelConfig& cfg) {
    cfg.validate();
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t d_ff = static_cast<size_t>(cfg.d_ff);
    std::map<std::string, std::vector<size_t>> shapes;
    shapes["embeddings.token"] = {static_cast<size_t>(cfg.vocab_size), d};
    shapes["embeddings.position"] = {static_cast<size_t>(cfg.max_positions), d};
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string p = "encoder." + std::to_string(i);
        add_attention_shapes(shapes, p + ".attn", d);
        add_layer_norm_shapes(shapes, p + ".ln1", d);
        add_ffn_shapes(shapes, p + ".ff", d, d_ff);
        add_layer_norm_shapes(shapes, p + ".ln2", d);
    }
    if (cfg.mode == Mode::encoder_classifier) {
        shapes["head.pre_classifier.w"] = {d, d};
        shapes["head.pre_classifier.b"] = {d};
        shapes["head.classifier.w"] = {d, static_cast<size_t>(cfg.n_classes)};
        shapes["head.classifier.b"] = {static_cast<size_t>(cfg.n_classes)};
    } else {
        for (int i = 0; i < cfg.n_layers; ++i) {
            const std::string p = "decoder." + std::to_string(i);
            add_attention_shapes(shapes, p + ".self_attn", d);
            add_layer_norm_shapes(shapes, p + ".ln1", d);
            add_attention_shapes(shapes, p + ".cross_attn", d);
            add_layer_norm_shapes(shapes, p + ".ln2", d);
            add_ffn_shapes(shapes, p + ".ff", d, d_ff);
            add_layer_norm_shapes(shapes, p + ".ln3", d);
        }
        shapes["decoder.output.w"] = {d, static_cast<size_t>(cfg.vocab_size)};
        shapes["decoder.output.b"] = {static_cast<size_t>(cfg.vocab_size)};
    }
    return shapes;
}

WeightBundle init_weights(const ModelConfig& cfg, uint64_t seed) {
    WeightBundle w;
    Rng rng(derive_seed(seed, "init_weights"));
    for (const auto& [name, shape] : expected_shapes(cfg)) {
        Array a(shape);
        const bool is_ln_scale = name.ends_with(".scale");
        const bool is_bias = name.ends_with(".b") || name.ends_with(".b1") ||
                             name.ends_with(".b2") || name.ends_with(".bias");
        if (is_ln_scale) {
            std::fill(a.data.begin(), a.data.end(), 1.0);
        } else if (!is_bias) {
            for (double& v : a.data) v = 0.02 * rng.next_gaussian();
        }
        w.arrays.emplace(name, std::move(a));
    }
    return w;
}

void validate_weights(const WeightBundle& w, const ModelConfig& cfg) {
    const auto shapes = expected_shapes(cfg);
    for (const auto& [name, shape] : shapes) {
        auto it = w.arrays.find(name);
        if (it == w.arrays.end()) throw std::runtime_error("missing array: " + name);
        if (it->second.shape != shape) {
            throw std::runtime_error("array " + name + " has wrong shape");
        }
    }
    for (const auto& [name, a] : w.arrays) {
        if (!shapes.count(name)) throw std::runtime_error("unexpected array: " + name);
    }
}

WeightBundle zero_gradients(const ModelConfig& cfg) {
    WeightBundle g;
    for (const auto& [name, shape] : expected_shapes(cfg)) g.arrays.emplace(name, Array(shape));
    return g;
}

AttentionOutput multi_head_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                     int n_heads, const AttnMask& mask, double p_drop,
                                     Rng* rng, bool training,
                                     std::vector<Matrix>* prob_masks) {
    if (q.cols != k.cols || k.cols != v.cols) {
        throw std::invalid_argument("attention operands disagree on d_model");
    }
    if (k.rows != v.rows) throw std::invalid_argument("attention k/v length mismatch");
    if (n_heads < 1 || q.cols % static_cast<size_t>(n_heads) != 0) {
        throw std::invalid_argument("d_model not divisible by n_heads");
    }
    if (!mask.key_valid.empty() && mask.key_valid.size() != k.rows) {
        throw std::invalid_argument("mask length does not match key length");
    }
    const size_t d_head = q.cols / static_cast<size_t>(n_heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    AttentionOutput out;
    out.heads_concat = Matrix(q.rows, q.cols);
    for (int h = 0; h < n_heads; ++h) {
        const size_t off = static_cast<size_t>(h) * d_head;
        const Matrix qh = col_block(q, off, d_head);
        const Matrix kh = col_block(k, off, d_head);
        const Matrix vh = col_block(v, off, d_head);
        Matrix scores = nn::matmul_nt(qh, kh);
        nn::scale_in_place(scores, inv_sqrt);
        if (!nn::all_finite(scores)) {
            throw std::runtime_error("non-finite attention scores in head " +
                                     std::to_string(h));
        }
        for (size_t i = 0; i < scores.rows; ++i) {
            for (size_t j = 0; j < scores.cols; ++j) {
                if ((mask.causal && j > i) ||
                    (!mask.key_valid.empty() && !mask.key_valid[j])) {
                    scores.at(i, j) = kNegInf;
                }
            }
        }
        Matrix probs = nn::softmax_rows(scores);
        Matrix drop_mask;
        Matrix dropped = nn::apply_dropout(probs, p_drop, rng, training, &drop_mask);
        add_col_block(out.heads_concat, nn::matmul(dropped, vh), off);
        out.weights.push_back(std::move(probs));
        if (prob_masks) prob_masks->push_back(std::move(drop_mask));
    }
    return out;
}

namespace {

Matrix embed(const std::vector<int>& ids, const WeightBundle& w, const ModelConfig& cfg) {
    if (ids.empty()) throw std::invalid_argument("cannot run the model on an empty sequence");
    if (ids.size() > static_cast<size_t>(cfg.max_positions)) {
        throw std::invalid_argument("sequence length " + std::to_string(ids.size()) +
                                    " exceeds max_positions " +
                                    std::to_string(cfg.max_positions));
    }
    const Array& tok = w.at("embeddings.token");
    const Array& pos = w.at("embeddings.position");
    const size_t d = static_cast<size_t>(cfg.d_model);
    Matrix x(ids.size(), d);
    for (size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] < 0 || ids[t] >= cfg.vocab_size) {
            throw std::invalid_argument("token id " + std::to_string(ids[t]) +
                                        " outside vocabulary of size " +
                                        std::to_string(cfg.vocab_size));
        }
        for (size_t j = 0; j < d; ++j) {
            x.at(t, j) = tok.data[static_cast<size_t>(ids[t]) * d + j] + pos.data[t * d + j];
        }
    }
    return x;
}

void check_finite(const Matrix& m, const std::string& where) {
    if (!nn::all_finite(m)) {
        throw std::runtime_error("non-finite activation in " + where);
    }
}

// One post-norm transformer block: x -> LN1(x + Attn(x)) -> LN2(. + FFN(.)).
Matrix encoder_layer(const Matrix& x, const WeightBundle& w, const ModelConfig& cfg,
                     const std::string& prefix, bool training, Rng* rng, LayerCache* cache) {
    if (cache) cache->x_in = x;
    Matrix q = linear(x, w, prefix + ".attn.q");
    Matrix k = linear(x, w, prefix + ".attn.k");
    Matrix v = linear(x, w, prefix + ".attn.v");
    check_finite(q, prefix + ".attn.q");
    check_finite(k, prefix + ".attn.k");

    AttentionOutput attn = multi_head_attention(
        q, k, v, cfg.n_heads, AttnMask{}, cfg.dropout_attention, rng, training,
        cache ? &cache->prob_masks : nullptr);
    Matrix attn_out = linear(attn.heads_concat, w, prefix + ".attn.o");

    Matrix attn_drop_mask;
    Matrix dropped = nn::apply_dropout(attn_out, cfg.dropout_sublayer, rng, training,
                                       cache ? &attn_drop_mask : nullptr);
    Matrix res1 = nn::add(x, dropped);
    nn::LayerNormCache ln1_cache;
    Matrix x_mid = nn::layer_norm(res1, w.at(prefix + ".ln1.scale").data,
                                  w.at(prefix + ".ln1.bias").data, cache ? &ln1_cache : nullptr);

    Matrix ff_pre = nn::matmul(x_mid, to_matrix(w.at(prefix + ".ff.w1"), prefix + ".ff.w1"));
    nn::add_row_bias(ff_pre, w.at(prefix + ".ff.b1").data);
    Matrix ff_act = ff_pre;
    nn::gelu_in_place(ff_act);
    Matrix ff_out = nn::matmul(ff_act, to_matrix(w.at(prefix + ".ff.w2"), prefix + ".ff.w2"));
    nn::add_row_bias(ff_out, w.at(prefix + ".ff.b2").data);

    Matrix ff_drop_mask;
    Matrix dropped2 = nn::apply_dropout(ff_out, cfg.dropout_sublayer, rng, training,
                                        cache ? &ff_drop_mask : nullptr);
    Matrix res2 = nn::add(x_mid, dropped2);
    nn::LayerNormCache ln2_cache;
    Matrix x_out = nn::layer_norm(res2, w.at(prefix + ".ln2.scale").data,
                                  w.at(prefix + ".ln2.bias").data, cache ? &ln2_cache : nullptr);
    check_finite(x_out, prefix);

    if (cache) {
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(attn.weights);
        cache->heads_concat = std::move(attn.heads_concat);
        cache->attn_out = std::move(attn_out);
        cache->attn_drop_mask = std::move(attn_drop_mask);
        cache->res1 = std::move(res1);
        cache->ln1 = std::move(ln1_cache);
        cache->x_mid = x_mid;
        cache->ff_pre = std::move(ff_pre);
        cache->ff_act = std::move(ff_act);
        cache->ff_out = std::move(ff_out);
        cache->ff_drop_mask = std::move(ff_drop_mask);
        cache->res2 = std::move(res2);
        cache->ln2 = std::move(ln2_cache);
        cache->x_out = x_out;
    }
    return x_out;
}

Matrix encoder_hidden(const std::vector<int>& ids, const WeightBundle& w,
                      const ModelConfig& cfg, bool training, Rng* rng, EncoderCache* cache) {
    Matrix x = embed(ids, w, cfg);
    if (cache) {
        cache->embedded = x;
        cache->layers.resize(static_cast<size_t>(cfg.n_layers));
    }
    for (int i = 0; i < cfg.n_layers; ++i) {
        x = encoder_layer(x, w, cfg, "encoder." + std::to_string(i), training, rng,
                          cache ? &cache->layers[static_cast<size_t>(i)] : nullptr);
    }
    return x;
}

}  // namespace

std::vector<double> encoder_forward(const std::vector<int>& ids, const WeightBundle& w,
                                    const ModelConfig& cfg, bool training, Rng* rng,
                                    EncoderCache* cache) {
    cfg.validate();
    if (cfg.mode != Mode::encoder_classifier) {
        throw std::invalid_argument("encoder_forward needs an encoder_classifier config");
    }
    Matrix x = encoder_hidden(ids, w, cfg, training, rng, cache);

    // First-position pooling, then pre_classifier -> ReLU -> dropout -> classifier.
    Matrix cls(1, x.cols);
    for (size_t j = 0; j < x.cols; ++j) cls.at(0, j) = x.at(0, j);

    Matrix pre_lin = linear(cls, w, "head.pre_classifier");
    Matrix pre_act = pre_lin;
    for (double& v : pre_act.data) v = std::max(0.0, v);
    Matrix drop_mask;
    Matrix dropped = nn::apply_dropout(pre_act, cfg.dropout_sublayer, rng, training,
                                       cache ? &drop_mask : nullptr);
    Matrix logits_m = linear(dropped, w, "head.classifier");
    check_finite(logits_m, "head.classifier");

    if (cache) {
        cache->head.cls = std::move(cls);
        cache->head.pre_lin = std::move(pre_lin);
        cache->head.pre_act = std::move(pre_act);
        cache->head.drop_mask = std::move(drop_mask);
        cache->head.dropped = dropped;
    }
    return logits_m.data;
}

namespace {

void accumulate(Array& a, const Matrix& m) {
    for (size_t i = 0; i < m.data.size(); ++i) a.data[i] += m.data[i];
}

void accumulate(Array& a, const std::vector<double>& v) {
    for (size_t i = 0; i < v.size(); ++i) a.data[i] += v[i];
}

// Backward through y = x*W + b: accumulates dW/db, returns dx.
Matrix linear_backward(const Matrix& x, const Matrix& dy, const WeightBundle& w,
                       const std::string& prefix, WeightBundle& grads) {
    accumulate(grads.at(prefix + ".w"), nn::matmul_tn(x, dy));
    accumulate(grads.at(prefix + ".b"), nn::column_sums(dy));
    return nn::matmul_nt(dy, to_matrix(w.at(prefix + ".w"), prefix + ".w"));
}

Matrix elementwise_mul(const Matrix& a, const Matrix& b) {
    Matrix out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

}  // namespace

void encoder_backward(const std::vector<int>& ids, const WeightBundle& w,
                      const ModelConfig& cfg, const EncoderCache& cache,
                      const std::vector<double>& dlogits, WeightBundle& grads) {
    const size_t d = static_cast<size_t>(cfg.d_model);
    const size_t seq = ids.size();
    const int n_heads = cfg.n_heads;
    const size_t d_head = d / static_cast<size_t>(n_heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_head));

    // head
    Matrix dlogits_m(1, dlogits.size());
    dlogits_m.data = dlogits;
    Matrix d_dropped = linear_backward(cache.head.dropped, dlogits_m, w, "head.classifier", grads);
    Matrix d_pre_act = elementwise_mul(d_dropped, cache.head.drop_mask);
    Matrix d_pre_lin = d_pre_act;
    for (size_t i = 0; i < d_pre_lin.data.size(); ++i) {
        if (cache.head.pre_lin.data[i] <= 0.0) d_pre_lin.data[i] = 0.0;
    }
    Matrix d_cls = linear_backward(cache.head.cls, d_pre_lin, w, "head.pre_classifier", grads);

    Matrix dx(seq, d);
    for (size_t j = 0; j < d; ++j) dx.at(0, j) = d_cls.at(0, j);

    for (int layer = cfg.n_layers - 1; layer >= 0; --layer) {
        const LayerCache& lc = cache.layers[static_cast<size_t>(layer)];
        const std::string p = "encoder." + std::to_string(layer);

        std::vector<double> dscale, dbias;
        Matrix d_res2 = nn::layer_norm_backward(dx, lc.res2, w.at(p + ".ln2.scale").data,
                                                lc.ln2, dscale, dbias);
        accumulate(grads.at(p + ".ln2.scale"), dscale);
        accumulate(grads.at(p + ".ln2.bias"), dbias);

        Matrix d_x_mid = d_res2;
        Matrix d_ff_out = elementwise_mul(d_res2, lc.ff_drop_mask);
        accumulate(grads.at(p + ".ff.w2"), nn::matmul_tn(lc.ff_act, d_ff_out));
        accumulate(grads.at(p + ".ff.b2"), nn::column_sums(d_ff_out));
        Matrix d_ff_act = nn::matmul_nt(d_ff_out, to_matrix(w.at(p + ".ff.w2"), p + ".ff.w2"));
        Matrix d_ff_pre = d_ff_act;
        for (size_t i = 0; i < d_ff_pre.data.size(); ++i) {
            d_ff_pre.data[i] *= nn::gelu_derivative(lc.ff_pre.data[i]);
        }
        accumulate(grads.at(p + ".ff.w1"), nn::matmul_tn(lc.x_mid, d_ff_pre));
        accumulate(grads.at(p + ".ff.b1"), nn::column_sums(d_ff_pre));
        nn::add_in_place(d_x_mid,
                         nn::matmul_nt(d_ff_pre, to_matrix(w.at(p + ".ff.w1"), p + ".ff.w1")));

        Matrix d_res1 = nn::layer_norm_backward(d_x_mid, lc.res1, w.at(p + ".ln1.scale").data,
                                                lc.ln1, dscale, dbias);
        accumulate(grads.at(p + ".ln1.scale"), dscale);
        accumulate(grads.at(p + ".ln1.bias"), dbias);

        Matrix d_x = d_res1;
        Matrix d_attn_out = elementwise_mul(d_res1, lc.attn_drop_mask);
        Matrix d_concat = linear_backward(lc.heads_concat, d_attn_out, w, p + ".attn.o", grads);

        Matrix dq(seq, d);
        Matrix dk(seq, d);
        Matrix dv(seq, d);
        for (int h = 0; h < n_heads; ++h) {
            const size_t off = static_cast<size_t>(h) * d_head;
            const Matrix qh = col_block(lc.q, off, d_head);
            const Matrix kh = col_block(lc.k, off, d_head);
            const Matrix vh = col_block(lc.v, off, d_head);
            const Matrix d_oh = col_block(d_concat, off, d_head);
            const Matrix dropped_probs =
                elementwise_mul(lc.probs[static_cast<size_t>(h)],
                                lc.prob_masks[static_cast<size_t>(h)]);
            Matrix d_dropped_probs = nn::matmul_nt(d_oh, vh);
            Matrix d_vh = nn::matmul_tn(dropped_probs, d_oh);
            Matrix d_probs =
                elementwise_mul(d_dropped_probs, lc.prob_masks[static_cast<size_t>(h)]);
            Matrix d_scores =
                nn::softmax_rows_backward(lc.probs[static_cast<size_t>(h)], d_probs);
            nn::scale_in_place(d_scores, inv_sqrt);
            add_col_block(dq, nn::matmul(d_scores, kh), off);
            add_col_block(dk, nn::matmul_tn(d_scores, qh), off);
            add_col_block(dv, d_vh, off);
        }
        nn::add_in_place(d_x, linear_backward(lc.x_in, dq, w, p + ".attn.q", grads));
        nn::add_in_place(d_x, linear_backward(lc.x_in, dk, w, p + ".attn.k", grads));
        nn::add_in_place(d_x, linear_backward(lc.x_in, dv, w, p + ".attn.v", grads));
        dx = std::move(d_x);
    }

    Array& d_tok = grads.at("embeddings.token");
    Array& d_pos = grads.at("embeddings.position");
    for (size_t t = 0; t < seq; ++t) {
        for (size_t j = 0; j < d; ++j) {
            d_tok.data[static_cast<size_t>(ids[t]) * d + j] += dx.at(t, j);
            d_pos.data[t * d + j] += dx.at(t, j);
        }
    }
}

namespace {

// One decoder block: causal self-attention, cross-attention over the encoder
// states, FFN; post-norm residuals throughout. Inference only.
Matrix decoder_layer(const Matrix& x, const Matrix& enc, const WeightBundle& w,
                     const ModelConfig& cfg, const std::string& prefix) {
    Matrix q = linear(x, w, prefix + ".self_attn.q");
    Matrix k = linear(x, w, prefix + ".self_attn.k");
    Matrix v = linear(x, w, prefix + ".self_attn.v");
    AttnMask causal;
    causal.causal = true;
    AttentionOutput self_attn =
        multi_head_attention(q, k, v, cfg.n_heads, causal, 0.0, nullptr, false);
    Matrix self_out = linear(self_attn.heads_concat, w, prefix + ".self_attn.o");
    Matrix x1 = nn::layer_norm(nn::add(x, self_out), w.at(prefix + ".ln1.scale").data,
                               w.at(prefix + ".ln1.bias").data, nullptr);

    Matrix cq = linear(x1, w, prefix + ".cross_attn.q");
    Matrix ck = linear(enc, w, prefix + ".cross_attn.k");
    Matrix cv = linear(enc, w, prefix + ".cross_attn.v");
    AttentionOutput cross =
        multi_head_attention(cq, ck, cv, cfg.n_heads, AttnMask{}, 0.0, nullptr, false);
    Matrix cross_out = linear(cross.heads_concat, w, prefix + ".cross_attn.o");
    Matrix x2 = nn::layer_norm(nn::add(x1, cross_out), w.at(prefix + ".ln2.scale").data,
                               w.at(prefix + ".ln2.bias").data, nullptr);

    Matrix ff_pre = nn::matmul(x2, to_matrix(w.at(prefix + ".ff.w1"), prefix + ".ff.w1"));
    nn::add_row_bias(ff_pre, w.at(prefix + ".ff.b1").data);
    nn::gelu_in_place(ff_pre);
    Matrix ff_out = nn::matmul(ff_pre, to_matrix(w.at(prefix + ".ff.w2"), prefix + ".ff.w2"));
    nn::add_row_bias(ff_out, w.at(prefix + ".ff.b2").data);
    Matrix x3 = nn::layer_norm(nn::add(x2, ff_out), w.at(prefix + ".ln3.scale").data,
                               w.at(prefix + ".ln3.bias").data, nullptr);
    check_finite(x3, prefix);
    return x3;
}

}  // namespace

std::vector<double> decoder_step_logits(const std::vector<int>& src_ids,
                                        const std::vector<int>& dec_ids,
                                        const WeightBundle& w, const ModelConfig& cfg) {
    cfg.validate();
    if (cfg.mode != Mode::encoder_decoder) {
        throw std::invalid_argument("decoding needs an encoder_decoder config");
    }
    validate_weights(w, cfg);
    const Matrix enc = encoder_hidden(src_ids, w, cfg, false, nullptr, nullptr);
    Matrix x = embed(dec_ids, w, cfg);
    for (int i = 0; i < cfg.n_layers; ++i) {
        x = decoder_layer(x, enc, w, cfg, "decoder." + std::to_string(i));
    }
    Matrix last(1, x.cols);
    for (size_t j = 0; j < x.cols; ++j) last.at(0, j) = x.at(x.rows - 1, j);
    Matrix logits = linear(last, w, "decoder.output");
    check_finite(logits, "decoder.output");
    return logits.data;
}

std::string greedy_decode(const std::vector<int>& src_ids, const WeightBundle& w,
                          const ModelConfig& cfg, size_t max_len) {
    if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
    std::vector<int> src = src_ids;
    src.push_back(tokenizer::bytes::kEos);

    std::vector<int> dec = {tokenizer::bytes::kPad};  // decoder start token
    std::vector<int> generated;
    while (generated.size() < max_len &&
           dec.size() < static_cast<size_t>(cfg.max_positions)) {
        const std::vector<double> logits = decoder_step_logits(src, dec, w, cfg);
        int best = 0;
        for (size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[static_cast<size_t>(best)]) best = static_cast<int>(i);
        }
        if (best == tokenizer::bytes::kEos) break;
        generated.push_back(best);
        dec.push_back(best);
    }
    return tokenizer::byte_decode(generated);
}

std::optional<int> map_label(const std::string& generated) {
    const std::string trimmed = text::trim(generated);
    if (trimmed.size() == 1 && trimmed[0] >= '1' && trimmed[0] <= '5') {
        return trimmed[0] - '0';
    }
    return std::nullopt;
}

}  // namespace starsent::model
