#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "starsent/corpus.hpp"
#include "starsent/model.hpp"

namespace starsent::train {

enum class Regime { full, head_only };

struct TrainConfig {
    int max_epochs = 20;
    int batch_size = 16;
    double learning_rate = 3e-4;  // toy-scale default; 2e-5 suits the reference shape
    int patience = 2;
    Regime regime = Regime::full;
    uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;

    std::string to_json_line() const;
};

enum class StopReason { max_epochs, early_stop };
const char* to_string(StopReason r);

// loss = -log softmax(logits)[label]; gradient = softmax(logits) - one_hot.
std::pair<double, std::vector<double>> cross_entropy(const std::vector<double>& logits,
                                                     int label);

struct Example {
    std::vector<int> ids;
    int label = 0;  // 0-based class index
};

using EncodeFn = std::function<std::vector<int>(const std::string&)>;

// Tokenize a record set into training examples; sequences are truncated to
// max_positions and ratings map to 0-based labels.
std::vector<Example> encode_records(const corpus::RecordSet& rs, const EncodeFn& encode,
                                    int max_positions);

// Consecutive-rise early stopping with best-epoch tracking. Separated from
// the loop so the rule can be driven by scripted loss sequences.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience);
    // Returns true when val loss has now risen for `patience` epochs in a row.
    bool observe(double val_loss);
    bool last_was_best() const { return last_was_best_; }
    int best_epoch() const { return best_epoch_; }
    double best_val_loss() const { return best_val_; }

private:
    int patience_;
    int epoch_ = 0;
    int rises_ = 0;
    int best_epoch_ = 0;
    double best_val_;
    double prev_val_ = 0.0;
    bool last_was_best_ = false;
};

struct AdamState {
    model::WeightBundle m;
    model::WeightBundle v;
    int64_t t = 0;

    explicit AdamState(const model::ModelConfig& cfg);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// One Adam update. head_only freezes everything outside the classifier head.
void adam_step(model::WeightBundle& w, const model::WeightBundle& grads, AdamState& state,
               double learning_rate, Regime regime);

// Mean loss over the batch; gradients of the mean accumulate into grads.
double batch_loss_and_grads(const std::vector<Example>& batch, const model::WeightBundle& w,
                            const model::ModelConfig& cfg, bool training, Rng* dropout_rng,
                            model::WeightBundle& grads);

struct TrainResult {
    model::WeightBundle best_weights;
    std::vector<EpochRecord> records;
    StopReason stop_reason = StopReason::max_epochs;
    int best_epoch = 0;
};

using EpochCallback =
    std::function<void(const EpochRecord&, const model::WeightBundle& current)>;

TrainResult train_loop(const std::vector<Example>& train_set,
                       const std::vector<Example>& val_set, model::WeightBundle weights,
                       const model::ModelConfig& cfg, const TrainConfig& tcfg,
                       const EpochCallback& on_epoch = nullptr);

TrainResult train_loop(const corpus::RecordSet& train_set, const corpus::RecordSet& val_set,
                       const EncodeFn& encode, model::WeightBundle weights,
                       const model::ModelConfig& cfg, const TrainConfig& tcfg,
                       const EpochCallback& on_epoch = nullptr);

}  // namespace starsent::train
