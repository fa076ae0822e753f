#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "starsent/tensor.hpp"

namespace starsent::model {

enum class Mode { encoder_classifier, encoder_decoder };

struct ModelConfig {
    int n_layers = 2;
    int d_model = 32;
    int n_heads = 4;
    int d_ff = 64;
    int vocab_size = 0;
    int n_classes = 5;
    int max_positions = 64;
    double dropout_sublayer = 0.3;
    double dropout_attention = 0.2;
    Mode mode = Mode::encoder_classifier;

    void validate() const;

    // Shape of the checkpoint family the full-scale experiments use.
    static ModelConfig reference(int vocab_size, Mode mode = Mode::encoder_classifier);
    // Desk-scale preset used across the test suites.
    static ModelConfig toy(int vocab_size, Mode mode = Mode::encoder_classifier);
};

struct Array {
    std::vector<size_t> shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(std::vector<size_t> s);
    size_t size() const { return data.size(); }
    bool same_shape(const Array& o) const { return shape == o.shape; }
};

struct WeightBundle {
    std::map<std::string, Array> arrays;

    Array& at(const std::string& name);
    const Array& at(const std::string& name) const;
    bool operator==(const WeightBundle& o) const;
};

// Canonical array name -> shape map for a config; the loader and the
// initializer both derive from this single source.
std::map<std::string, std::vector<size_t>> expected_shapes(const ModelConfig& cfg);

WeightBundle init_weights(const ModelConfig& cfg, uint64_t seed);

// Rejects missing arrays, unknown arrays, and shape mismatches by name.
void validate_weights(const WeightBundle& w, const ModelConfig& cfg);

struct AttnMask {
    bool causal = false;
    std::vector<uint8_t> key_valid;  // empty = every key position attendable
};

struct AttentionOutput {
    nn::Matrix heads_concat;          // [seq_q, d_model], before output projection
    std::vector<nn::Matrix> weights;  // per head, post-softmax, pre-dropout
};

// Scaled dot-product attention over already-projected q/k/v, split into
// n_heads column blocks. Dropout masks (post-softmax) are appended to
// *prob_masks when requested so a backward pass can replay them.
AttentionOutput multi_head_attention(const nn::Matrix& q, const nn::Matrix& k,
                                     const nn::Matrix& v, int n_heads, const AttnMask& mask,
                                     double p_drop, Rng* rng, bool training,
                                     std::vector<nn::Matrix>* prob_masks = nullptr);

struct LayerCache {
    nn::Matrix x_in;
    nn::Matrix q, k, v;
    std::vector<nn::Matrix> probs;       // pre-dropout attention weights
    std::vector<nn::Matrix> prob_masks;  // dropout masks over probs
    nn::Matrix heads_concat;             // computed from dropped probs
    nn::Matrix attn_out;
    nn::Matrix attn_drop_mask;
    nn::Matrix res1;
    nn::LayerNormCache ln1;
    nn::Matrix x_mid;
    nn::Matrix ff_pre;
    nn::Matrix ff_act;
    nn::Matrix ff_out;
    nn::Matrix ff_drop_mask;
    nn::Matrix res2;
    nn::LayerNormCache ln2;
    nn::Matrix x_out;
};

struct HeadCache {
    nn::Matrix cls;       // [1, d_model]
    nn::Matrix pre_lin;   // before the nonlinearity
    nn::Matrix pre_act;
    nn::Matrix drop_mask;
    nn::Matrix dropped;
};

struct EncoderCache {
    nn::Matrix embedded;
    std::vector<LayerCache> layers;
    HeadCache head;
};

// Encoder stack + classification head. Deterministic whenever training is
// false. Throws on over-long sequences, out-of-range ids and non-finite
// activations.
std::vector<double> encoder_forward(const std::vector<int>& ids, const WeightBundle& w,
                                    const ModelConfig& cfg, bool training, Rng* rng,
                                    EncoderCache* cache = nullptr);

// Accumulates d(loss)/d(param) into grads (same shapes as the bundle) given
// d(loss)/d(logits). Requires the cache of the matching forward pass.
void encoder_backward(const std::vector<int>& ids, const WeightBundle& w,
                      const ModelConfig& cfg, const EncoderCache& cache,
                      const std::vector<double>& dlogits, WeightBundle& grads);

WeightBundle zero_gradients(const ModelConfig& cfg);

// Encoder-decoder greedy generation: argmax token by token until EOS or
// max_len, then byte-decode. Uses the byte tokenizer id conventions.
std::string greedy_decode(const std::vector<int>& src_ids, const WeightBundle& w,
                          const ModelConfig& cfg, size_t max_len);

// Next-token distribution for a decoder prefix; exposed for tests.
std::vector<double> decoder_step_logits(const std::vector<int>& src_ids,
                                        const std::vector<int>& dec_ids,
                                        const WeightBundle& w, const ModelConfig& cfg);

// "3" -> 3; anything that is not a canonical label after trimming is a
// mapping failure, reported as nullopt and never thrown.
std::optional<int> map_label(const std::string& generated);

}  // namespace starsent::model
