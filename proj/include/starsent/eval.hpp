#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace starsent::eval {

// Confusion counts in Prediction x True orientation: counts[p][t] holds the
// number of instances predicted p whose true class is t. Predictions that
// failed label mapping are tracked per true class as a virtual predicted
// class that can never be correct.
struct ConfusionMatrix {
    int k = 0;
    std::vector<int64_t> counts;           // k*k, row-major [pred][true]
    std::vector<int64_t> invalid_preds;    // per true class
    std::vector<std::string> label_names;  // size k

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes, std::vector<std::string> names = {});

    int64_t& at(int pred, int truth);
    int64_t at(int pred, int truth) const;
    void add(int pred, int truth);
    void add_invalid(int truth);

    int64_t total() const;
    int64_t diagonal() const;
    int64_t column_sum(int truth) const;  // without invalid predictions
    int64_t row_sum(int pred) const;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths, int k,
                          std::vector<std::string> label_names = {});

struct PrfTriple {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<PrfTriple> per_class;
    PrfTriple micro;
    PrfTriple macro;
    PrfTriple weighted;
    std::vector<int64_t> support;  // true count per class
};

// Accuracy, per-class precision/recall/F1 with the 0/0 -> 0 convention, and
// micro/macro/weighted aggregates.
MetricsReport metrics(const ConfusionMatrix& cm);

// Five ratings into negative/neutral/positive.
struct CollapseMap {
    std::array<int, 5> group_of_rating_index = {0, 0, 1, 2, 2};  // {1,2} / {3} / {4,5}
    std::vector<std::string> group_names = {"negative", "neutral", "positive"};

    int groups() const { return static_cast<int>(group_names.size()); }
};

ConfusionMatrix collapse(const ConfusionMatrix& cm, const CollapseMap& map = {});
std::vector<int> collapse_labels(const std::vector<int>& labels,
                                 const CollapseMap& map = {});

struct NamedReport {
    std::string name;
    MetricsReport report;
    ConfusionMatrix cm;
};

enum class ReportFormat { json, markdown };

// Side-by-side report over one or more runs, sorted by accuracy descending,
// with per-run confusion tables (counts plus share of each true class) and
// an optional trailing notes section.
std::string render_report(std::vector<NamedReport> reports, ReportFormat format,
                          const std::vector<std::string>& notes = {});

// Prediction log line: {"id", "true", "pred"}; pred is null when the model
// output could not be mapped to a label.
struct PredRecord {
    std::string id;
    int truth = 0;                  // rating 1..5
    std::optional<int> pred;        // rating 1..5, nullopt on mapping failure
};

std::vector<PredRecord> read_predictions(const std::string& path);
void write_predictions(const std::vector<PredRecord>& preds, const std::string& path);
ConfusionMatrix confusion_from_predictions(const std::vector<PredRecord>& preds, int k = 5,
                                           std::vector<std::string> label_names = {});

// Bundled published-counts fixture: label names, k*k counts and the notes
// that must accompany any report derived from them.
struct CountsFixture {
    std::string name;
    ConfusionMatrix cm;
    std::vector<std::string> notes;
};

CountsFixture load_counts_fixture(const std::string& path);

}  // namespace starsent::eval
