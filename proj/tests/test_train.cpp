#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "starsent/train.hpp"
#include "test_util.hpp"

using namespace starsent;
using train::Example;

// ---------------------------------------------------------------------------
// cross entropy
// ---------------------------------------------------------------------------

TEST_CASE("cross entropy saturates for a confident correct prediction") {
    const auto [loss, grad] = train::cross_entropy({25.0, 0.0, 1.0, -2.0, 5.0}, 0);
    CHECK(loss < 1e-8);
    CHECK(grad.size() == 5);
}

TEST_CASE("cross entropy of uniform logits over five classes is ln 5") {
    const auto [loss, grad] = train::cross_entropy({0.7, 0.7, 0.7, 0.7, 0.7}, 2);
    CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    for (size_t i = 0; i < 5; ++i) {
        const double expected = 0.2 - (i == 2 ? 1.0 : 0.0);
        CHECK(grad[i] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("cross entropy gradient matches central finite differences") {
    Rng rng(31337);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> logits(5);
        for (double& v : logits) v = 2.0 * rng.next_gaussian();
        const int label = static_cast<int>(rng.uniform_below(5));
        const auto [loss, grad] = train::cross_entropy(logits, label);

        const double h = 1e-5;
        for (size_t i = 0; i < logits.size(); ++i) {
            auto up = logits;
            auto down = logits;
            up[i] += h;
            down[i] -= h;
            const double fd = (train::cross_entropy(up, label).first -
                               train::cross_entropy(down, label).first) /
                              (2.0 * h);
            const double rel =
                std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
            CHECK(rel < 1e-6);
        }
    }
}

TEST_CASE("cross entropy rejects out-of-range labels") {
    CHECK_THROWS_AS(train::cross_entropy({0.0, 1.0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(train::cross_entropy({0.0, 1.0}, -1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

TEST_CASE("dropout with p=0 is the identity") {
    Rng rng(1);
    nn::Matrix x(4, 4);
    for (double& v : x.data) v = rng.next_gaussian();
    const auto y = nn::apply_dropout(x, 0.0, &rng, true);
    CHECK(y.data == x.data);
}

TEST_CASE("dropout at inference is the identity regardless of p") {
    nn::Matrix x(2, 3);
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<double>(i);
    const auto y = nn::apply_dropout(x, 0.9, nullptr, false);
    CHECK(y.data == x.data);
}

TEST_CASE("dropout empirical rate over 1e6 entries is p within 0.003") {
    Rng rng(2024);
    nn::Matrix x(1000, 1000);
    for (double& v : x.data) v = 1.0;
    const auto y = nn::apply_dropout(x, 0.3, &rng, true);
    size_t zeros = 0;
    for (double v : y.data) {
        if (v == 0.0) {
            ++zeros;
        } else {
            CHECK(v == doctest::Approx(1.0 / 0.7).epsilon(1e-12));  // inverted scaling
        }
    }
    const double rate = static_cast<double>(zeros) / 1e6;
    CHECK(std::abs(rate - 0.3) < 0.003);
}

TEST_CASE("dropout validates its rate") {
    nn::Matrix x(1, 1);
    CHECK_THROWS_AS(nn::apply_dropout(x, 1.0, nullptr, false), std::invalid_argument);
    CHECK_THROWS_AS(nn::apply_dropout(x, -0.1, nullptr, false), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// early stopping rule
// ---------------------------------------------------------------------------

TEST_CASE("early stopper fires after patience consecutive rises") {
    train::EarlyStopper stopper(2);
    const std::vector<double> vals = {1.0, 0.9, 0.95, 1.0, 1.1};
    std::vector<bool> fired;
    for (double v : vals) fired.push_back(stopper.observe(v));
    CHECK(fired == std::vector<bool>{false, false, false, true, true});
    CHECK(stopper.best_epoch() == 2);
    CHECK(stopper.best_val_loss() == 0.9);
}

TEST_CASE("early stopper never fires on monotone-decreasing loss") {
    train::EarlyStopper stopper(2);
    for (double v : {1.0, 0.9, 0.8, 0.7, 0.6, 0.5}) CHECK(!stopper.observe(v));
    CHECK(stopper.best_epoch() == 6);
}

TEST_CASE("a plateau resets the rise counter") {
    train::EarlyStopper stopper(2);
    CHECK(!stopper.observe(1.0));
    CHECK(!stopper.observe(1.1));  // rise 1
    CHECK(!stopper.observe(1.1)); // equal, not a rise
    CHECK(!stopper.observe(1.2)); // rise 1 again
    CHECK(stopper.observe(1.3));  // rise 2 -> stop
}

// ---------------------------------------------------------------------------
// gradients through the full model
// ---------------------------------------------------------------------------

TEST_CASE("analytic gradients match finite differences on a small transformer") {
    model::ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.d_ff = 8;
    cfg.vocab_size = 12;
    cfg.max_positions = 8;

    std::vector<Example> batch;
    batch.push_back({{3, 7, 1, 9, 2}, 1});
    batch.push_back({{5, 5, 0}, 4});

    const model::WeightBundle w =
        model::init_weights(cfg, testutil::kink_free_seed(cfg, batch, 4242));
    const auto result = testutil::finite_difference_check(cfg, w, batch);
    CAPTURE(result.worst_param);
    CAPTURE(result.max_rel_err);
    CHECK(result.failures == 0);
    CHECK(result.params_checked > 700);  // every parameter of this config
    CHECK(result.max_rel_err < 1e-3);
}

TEST_CASE("one small optimizer step decreases the loss across 100 random inits") {
    model::ModelConfig cfg = model::ModelConfig::toy(40);
    std::vector<Example> batch = {{{4, 11, 7, 30, 2, 9}, 3}};
    for (uint64_t seed = 0; seed < 100; ++seed) {
        model::WeightBundle w = model::init_weights(cfg, seed);
        model::WeightBundle grads = model::zero_gradients(cfg);
        const double before = train::batch_loss_and_grads(batch, w, cfg, false, nullptr, grads);
        train::AdamState adam(cfg);
        train::adam_step(w, grads, adam, 1e-4, train::Regime::full);
        model::WeightBundle unused = model::zero_gradients(cfg);
        const double after = train::batch_loss_and_grads(batch, w, cfg, false, nullptr, unused);
        CAPTURE(seed);
        CHECK(after < before);
    }
}

TEST_CASE("head_only regime freezes everything outside the head") {
    model::ModelConfig cfg = model::ModelConfig::toy(40);
    model::WeightBundle w = model::init_weights(cfg, 8);
    const model::WeightBundle before = w;
    std::vector<Example> batch = {{{4, 11, 7}, 2}};
    model::WeightBundle grads = model::zero_gradients(cfg);
    train::batch_loss_and_grads(batch, w, cfg, false, nullptr, grads);
    train::AdamState adam(cfg);
    train::adam_step(w, grads, adam, 1e-3, train::Regime::head_only);
    for (const auto& [name, a] : w.arrays) {
        if (name.rfind("head.", 0) == 0) {
            CHECK(a.data != before.at(name).data);
        } else {
            CHECK(a.data == before.at(name).data);
        }
    }
}

// ---------------------------------------------------------------------------
// the loop
// ---------------------------------------------------------------------------

namespace {

train::TrainConfig quick_config(int epochs) {
    train::TrainConfig tcfg;
    tcfg.max_epochs = epochs;
    tcfg.batch_size = 16;
    tcfg.learning_rate = 1e-3;
    tcfg.patience = 2;
    tcfg.seed = 77;
    return tcfg;
}

}  // namespace

TEST_CASE("fixed seed gives a bit-identical epoch record sequence") {
    const auto data = testutil::make_separable_set(8, 1);
    const auto val = testutil::make_separable_set(4, 2);
    const model::ModelConfig cfg = model::ModelConfig::toy(259);

    auto run = [&]() {
        auto result = train::train_loop(data.examples, val.examples,
                                        model::init_weights(cfg, 5), cfg, quick_config(3));
        std::string log;
        for (const auto& r : result.records) log += r.to_json_line() + "\n";
        return std::make_pair(log, std::move(result));
    };
    auto [log_a, result_a] = run();
    auto [log_b, result_b] = run();
    CHECK(log_a == log_b);
    CHECK(result_a.best_weights == result_b.best_weights);
}

TEST_CASE("returned weights are the best-epoch weights, bitwise") {
    const auto data = testutil::make_separable_set(8, 3);
    const auto val = testutil::make_separable_set(4, 4);
    const model::ModelConfig cfg = model::ModelConfig::toy(259);

    std::vector<model::WeightBundle> snapshots;
    const auto result =
        train::train_loop(data.examples, val.examples, model::init_weights(cfg, 5), cfg,
                          quick_config(4),
                          [&](const train::EpochRecord&, const model::WeightBundle& w) {
                              snapshots.push_back(w);
                          });
    REQUIRE(result.best_epoch >= 1);
    REQUIRE(snapshots.size() == result.records.size());
    CHECK(result.best_weights == snapshots[static_cast<size_t>(result.best_epoch - 1)]);

    double best = result.records[static_cast<size_t>(result.best_epoch - 1)].val_loss;
    for (const auto& r : result.records) CHECK(best <= r.val_loss);
}

TEST_CASE("stop reason is max_epochs when patience never fires") {
    const auto data = testutil::make_separable_set(6, 5);
    const auto val = testutil::make_separable_set(3, 6);
    const model::ModelConfig cfg = model::ModelConfig::toy(259);
    train::TrainConfig tcfg = quick_config(2);
    tcfg.patience = 100;
    const auto result = train::train_loop(data.examples, val.examples,
                                          model::init_weights(cfg, 5), cfg, tcfg);
    CHECK(result.stop_reason == train::StopReason::max_epochs);
    CHECK(result.records.size() == 2);
}

TEST_CASE("encode_records truncates to max_positions and shifts labels") {
    corpus::RecordSet rs;
    corpus::ReviewRecord r;
    r.id = "a";
    r.text = std::string(300, 'x');
    r.rating = 4;
    r.source = "s";
    rs.records.push_back(r);
    const auto examples = train::encode_records(
        rs, [](const std::string& s) { return tokenizer::byte_encode(s).ids; }, 64);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].ids.size() == 64);
    CHECK(examples[0].label == 3);
}

TEST_CASE("train_loop validates inputs") {
    const model::ModelConfig cfg = model::ModelConfig::toy(259);
    const auto data = testutil::make_separable_set(2, 7);
    CHECK_THROWS_AS(train::train_loop({}, data.examples, model::init_weights(cfg, 1), cfg,
                                      quick_config(1)),
                    std::invalid_argument);
    train::TrainConfig bad = quick_config(1);
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(train::train_loop(data.examples, data.examples,
                                      model::init_weights(cfg, 1), cfg, bad),
                    std::invalid_argument);
}

TEST_CASE("non-finite activations abort with a diagnostic") {
    model::ModelConfig cfg = model::ModelConfig::toy(40);
    model::WeightBundle w = model::init_weights(cfg, 1);
    for (double& v : w.at("embeddings.token").data) v = 1e308;
    std::vector<Example> batch = {{{1, 2, 3}, 0}};
    model::WeightBundle grads = model::zero_gradients(cfg);
    CHECK_THROWS_AS(train::batch_loss_and_grads(batch, w, cfg, false, nullptr, grads),
                    std::runtime_error);
}
