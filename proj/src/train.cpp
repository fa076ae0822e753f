#include "starsent/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace starsent::train {

void TrainConfig::validate() const {
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
}

std::string EpochRecord::to_json_line() const {
    nlohmann::json obj = {{"epoch", epoch},
                          {"train_loss", train_loss},
                          {"val_loss", val_loss},
                          {"val_accuracy", val_accuracy}};
    return obj.dump();
}

const char* to_string(StopReason r) {
    return r == StopReason::max_epochs ? "max_epochs" : "early_stop";
}

std::pair<double, std::vector<double>> cross_entropy(const std::vector<double>& logits,
                                                     int label) {
    if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
        throw std::invalid_argument("label " + std::to_string(label) +
                                    " out of range for " + std::to_string(logits.size()) +
                                    " classes");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);

    std::vector<double> grad(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        grad[i] = std::exp(logits[i] - log_z);
    }
    const double loss = log_z - logits[static_cast<size_t>(label)];
    grad[static_cast<size_t>(label)] -= 1.0;
    return {loss, grad};
}

std::vector<Example> encode_records(const corpus::RecordSet& rs, const EncodeFn& encode,
                                    int max_positions) {
    std::vector<Example> out;
    out.reserve(rs.records.size());
    for (const auto& r : rs.records) {
        Example ex;
        ex.ids = encode(r.text);
        if (ex.ids.size() > static_cast<size_t>(max_positions)) {
            ex.ids.resize(static_cast<size_t>(max_positions));
        }
        ex.label = r.rating - 1;
        out.push_back(std::move(ex));
    }
    return out;
}

EarlyStopper::EarlyStopper(int patience)
    : patience_(patience), best_val_(std::numeric_limits<double>::infinity()) {
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
}

bool EarlyStopper::observe(double val_loss) {
    ++epoch_;
    last_was_best_ = val_loss < best_val_;
    if (last_was_best_) {
        best_val_ = val_loss;
        best_epoch_ = epoch_;
    }
    if (epoch_ > 1 && val_loss > prev_val_) {
        ++rises_;
    } else {
        rises_ = 0;
    }
    prev_val_ = val_loss;
    return rises_ >= patience_;
}

AdamState::AdamState(const model::ModelConfig& cfg)
    : m(model::zero_gradients(cfg)), v(model::zero_gradients(cfg)) {}

void adam_step(model::WeightBundle& w, const model::WeightBundle& grads, AdamState& state,
               double learning_rate, Regime regime) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    for (auto& [name, param] : w.arrays) {
        if (regime == Regime::head_only && name.rfind("head.", 0) != 0) continue;
        const auto& g = grads.at(name);
        auto& m = state.m.at(name);
        auto& v = state.v.at(name);
        for (size_t i = 0; i < param.data.size(); ++i) {
            m.data[i] = kAdamBeta1 * m.data[i] + (1.0 - kAdamBeta1) * g.data[i];
            v.data[i] = kAdamBeta2 * v.data[i] + (1.0 - kAdamBeta2) * g.data[i] * g.data[i];
            const double m_hat = m.data[i] / bc1;
            const double v_hat = v.data[i] / bc2;
            param.data[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEps);
        }
    }
}

double batch_loss_and_grads(const std::vector<Example>& batch, const model::WeightBundle& w,
                            const model::ModelConfig& cfg, bool training, Rng* dropout_rng,
                            model::WeightBundle& grads) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double total_loss = 0.0;
    for (const Example& ex : batch) {
        model::EncoderCache cache;
        const std::vector<double> logits =
            model::encoder_forward(ex.ids, w, cfg, training, dropout_rng, &cache);
        auto [loss, dlogits] = cross_entropy(logits, ex.label);
        total_loss += loss;
        for (double& g : dlogits) g *= inv_n;
        model::encoder_backward(ex.ids, w, cfg, cache, dlogits, grads);
    }
    return total_loss * inv_n;
}

namespace {

std::pair<double, double> evaluate(const std::vector<Example>& val_set,
                                   const model::WeightBundle& w,
                                   const model::ModelConfig& cfg) {
    double loss_sum = 0.0;
    size_t correct = 0;
    for (const Example& ex : val_set) {
        const std::vector<double> logits =
            model::encoder_forward(ex.ids, w, cfg, false, nullptr);
        loss_sum += cross_entropy(logits, ex.label).first;
        size_t best = 0;
        for (size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        if (static_cast<int>(best) == ex.label) ++correct;
    }
    return {loss_sum / static_cast<double>(val_set.size()),
            static_cast<double>(correct) / static_cast<double>(val_set.size())};
}

}  // namespace

TrainResult train_loop(const std::vector<Example>& train_set,
                       const std::vector<Example>& val_set, model::WeightBundle weights,
                       const model::ModelConfig& cfg, const TrainConfig& tcfg,
                       const EpochCallback& on_epoch) {
    tcfg.validate();
    cfg.validate();
    if (train_set.empty() || val_set.empty()) {
        throw std::invalid_argument("train and validation sets must be non-empty");
    }
    model::validate_weights(weights, cfg);

    TrainResult result;
    AdamState adam(cfg);
    EarlyStopper stopper(tcfg.patience);
    result.stop_reason = StopReason::max_epochs;

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(tcfg.seed, "shuffle:" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);
        Rng dropout_rng(derive_seed(tcfg.seed, "dropout:" + std::to_string(epoch)));

        double train_loss_sum = 0.0;
        size_t seen = 0;
        size_t batch_index = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(tcfg.batch_size), ++batch_index) {
            const size_t end =
                std::min(order.size(), start + static_cast<size_t>(tcfg.batch_size));
            std::vector<Example> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);

            model::WeightBundle grads = model::zero_gradients(cfg);
            const double batch_loss =
                batch_loss_and_grads(batch, weights, cfg, true, &dropout_rng, grads);
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_index));
            }
            adam_step(weights, grads, adam, tcfg.learning_rate, tcfg.regime);
            train_loss_sum += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = train_loss_sum / static_cast<double>(seen);
        std::tie(record.val_loss, record.val_accuracy) = evaluate(val_set, weights, cfg);
        result.records.push_back(record);

        const bool stop = stopper.observe(record.val_loss);
        if (stopper.last_was_best()) {
            result.best_weights = weights;
            result.best_epoch = epoch;
        }
        if (on_epoch) on_epoch(record, weights);
        if (stop) {
            result.stop_reason = StopReason::early_stop;
            break;
        }
    }
    return result;
}

TrainResult train_loop(const corpus::RecordSet& train_set, const corpus::RecordSet& val_set,
                       const EncodeFn& encode, model::WeightBundle weights,
                       const model::ModelConfig& cfg, const TrainConfig& tcfg,
                       const EpochCallback& on_epoch) {
    return train_loop(encode_records(train_set, encode, cfg.max_positions),
                      encode_records(val_set, encode, cfg.max_positions), std::move(weights),
                      cfg, tcfg, on_epoch);
}

}  // namespace starsent::train
