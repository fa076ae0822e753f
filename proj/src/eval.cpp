#include "starsent/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace starsent::eval {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(int classes, std::vector<std::string> names)
    : k(classes),
      counts(static_cast<size_t>(classes) * static_cast<size_t>(classes), 0),
      invalid_preds(static_cast<size_t>(classes), 0),
      label_names(std::move(names)) {
    if (classes < 1) throw std::invalid_argument("confusion matrix needs >= 1 class");
    if (label_names.empty()) {
        for (int i = 0; i < classes; ++i) label_names.push_back(std::to_string(i + 1));
    }
    if (label_names.size() != static_cast<size_t>(classes)) {
        throw std::invalid_argument("label name count does not match class count");
    }
}

int64_t& ConfusionMatrix::at(int pred, int truth) {
    return counts[static_cast<size_t>(pred) * static_cast<size_t>(k) +
                  static_cast<size_t>(truth)];
}

int64_t ConfusionMatrix::at(int pred, int truth) const {
    return counts[static_cast<size_t>(pred) * static_cast<size_t>(k) +
                  static_cast<size_t>(truth)];
}

void ConfusionMatrix::add(int pred, int truth) {
    if (pred < 0 || pred >= k || truth < 0 || truth >= k) {
        throw std::invalid_argument("class index out of range: pred=" + std::to_string(pred) +
                                    " true=" + std::to_string(truth));
    }
    ++at(pred, truth);
}

void ConfusionMatrix::add_invalid(int truth) {
    if (truth < 0 || truth >= k) {
        throw std::invalid_argument("class index out of range: true=" + std::to_string(truth));
    }
    ++invalid_preds[static_cast<size_t>(truth)];
}

int64_t ConfusionMatrix::total() const {
    int64_t n = 0;
    for (int64_t c : counts) n += c;
    for (int64_t c : invalid_preds) n += c;
    return n;
}

int64_t ConfusionMatrix::diagonal() const {
    int64_t n = 0;
    for (int i = 0; i < k; ++i) n += at(i, i);
    return n;
}

int64_t ConfusionMatrix::column_sum(int truth) const {
    int64_t n = 0;
    for (int p = 0; p < k; ++p) n += at(p, truth);
    return n;
}

int64_t ConfusionMatrix::row_sum(int pred) const {
    int64_t n = 0;
    for (int t = 0; t < k; ++t) n += at(pred, t);
    return n;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& truths, int k,
                          std::vector<std::string> label_names) {
    if (preds.size() != truths.size()) {
        throw std::invalid_argument("prediction/truth length mismatch: " +
                                    std::to_string(preds.size()) + " vs " +
                                    std::to_string(truths.size()));
    }
    if (preds.empty()) throw std::invalid_argument("empty prediction list");
    ConfusionMatrix cm(k, std::move(label_names));
    for (size_t i = 0; i < preds.size(); ++i) cm.add(preds[i], truths[i]);
    return cm;
}

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

MetricsReport metrics(const ConfusionMatrix& cm) {
    const int64_t total = cm.total();
    if (total < 1) throw std::invalid_argument("empty confusion matrix");

    MetricsReport rep;
    rep.accuracy = static_cast<double>(cm.diagonal()) / static_cast<double>(total);

    int64_t sum_tp = 0;
    int64_t sum_fp = 0;
    int64_t sum_fn = 0;
    double weighted_p = 0.0, weighted_r = 0.0, weighted_f = 0.0;
    double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
    for (int c = 0; c < cm.k; ++c) {
        const int64_t tp = cm.at(c, c);
        const int64_t fp = cm.row_sum(c) - tp;
        const int64_t fn = cm.column_sum(c) + cm.invalid_preds[static_cast<size_t>(c)] - tp;
        PrfTriple t;
        t.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
        t.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
        t.f1 = f1_of(t.precision, t.recall);
        rep.per_class.push_back(t);
        const int64_t support = tp + fn;
        rep.support.push_back(support);
        sum_tp += tp;
        sum_fp += fp;
        sum_fn += fn;
        macro_p += t.precision;
        macro_r += t.recall;
        macro_f += t.f1;
        weighted_p += t.precision * static_cast<double>(support);
        weighted_r += t.recall * static_cast<double>(support);
        weighted_f += t.f1 * static_cast<double>(support);
    }
    // Unmapped predictions act as one extra predicted class with no true
    // members: all of them are false positives of that virtual class.
    for (int64_t c : cm.invalid_preds) sum_fp += c;

    rep.micro.precision = safe_div(static_cast<double>(sum_tp),
                                   static_cast<double>(sum_tp + sum_fp));
    rep.micro.recall = safe_div(static_cast<double>(sum_tp),
                                static_cast<double>(sum_tp + sum_fn));
    rep.micro.f1 = f1_of(rep.micro.precision, rep.micro.recall);
    const double kk = static_cast<double>(cm.k);
    rep.macro = {macro_p / kk, macro_r / kk, macro_f / kk};
    const double support_total = static_cast<double>(sum_tp + sum_fn);
    rep.weighted = {safe_div(weighted_p, support_total), safe_div(weighted_r, support_total),
                    safe_div(weighted_f, support_total)};
    return rep;
}

ConfusionMatrix collapse(const ConfusionMatrix& cm, const CollapseMap& map) {
    if (cm.k != 5) throw std::invalid_argument("collapse expects a 5-class matrix");
    ConfusionMatrix out(map.groups(), map.group_names);
    for (int p = 0; p < cm.k; ++p) {
        for (int t = 0; t < cm.k; ++t) {
            out.at(map.group_of_rating_index[static_cast<size_t>(p)],
                   map.group_of_rating_index[static_cast<size_t>(t)]) += cm.at(p, t);
        }
    }
    for (int t = 0; t < cm.k; ++t) {
        out.invalid_preds[static_cast<size_t>(
            map.group_of_rating_index[static_cast<size_t>(t)])] +=
            cm.invalid_preds[static_cast<size_t>(t)];
    }
    return out;
}

std::vector<int> collapse_labels(const std::vector<int>& labels, const CollapseMap& map) {
    std::vector<int> out;
    out.reserve(labels.size());
    for (int label : labels) {
        if (label < 0 || label >= 5) {
            throw std::invalid_argument("label index out of range: " + std::to_string(label));
        }
        out.push_back(map.group_of_rating_index[static_cast<size_t>(label)]);
    }
    return out;
}

namespace {

json triple_to_json(const PrfTriple& t) {
    return {{"precision", t.precision}, {"recall", t.recall}, {"f1", t.f1}};
}

json report_to_json(const NamedReport& nr) {
    json per_class = json::array();
    for (const auto& t : nr.report.per_class) per_class.push_back(triple_to_json(t));
    json rows = json::array();
    for (int p = 0; p < nr.cm.k; ++p) {
        json row = json::array();
        for (int t = 0; t < nr.cm.k; ++t) row.push_back(nr.cm.at(p, t));
        rows.push_back(row);
    }
    return {{"name", nr.name},
            {"accuracy", nr.report.accuracy},
            {"per_class", per_class},
            {"micro", triple_to_json(nr.report.micro)},
            {"macro", triple_to_json(nr.report.macro)},
            {"weighted", triple_to_json(nr.report.weighted)},
            {"support", nr.report.support},
            {"confusion",
             {{"k", nr.cm.k},
              {"label_names", nr.cm.label_names},
              {"counts", rows},
              {"invalid_preds", nr.cm.invalid_preds}}}};
}

std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
    return buf;
}

std::string format_val(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string render_report(std::vector<NamedReport> reports, ReportFormat format,
                          const std::vector<std::string>& notes) {
    if (reports.empty()) throw std::invalid_argument("no reports to render");
    std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        return a.report.accuracy > b.report.accuracy;
    });

    if (format == ReportFormat::json) {
        json doc;
        doc["runs"] = json::array();
        for (const auto& r : reports) doc["runs"].push_back(report_to_json(r));
        doc["notes"] = notes;
        return doc.dump(2) + "\n";
    }

    std::ostringstream md;
    md << "# Evaluation report\n\n";
    md << "| run | accuracy | micro F1 | macro F1 | weighted F1 |\n";
    md << "|-----|----------|----------|----------|-------------|\n";
    for (const auto& r : reports) {
        md << "| " << r.name << " | " << format_pct(r.report.accuracy) << " | "
           << format_val(r.report.micro.f1) << " | " << format_val(r.report.macro.f1)
           << " | " << format_val(r.report.weighted.f1) << " |\n";
    }
    for (const auto& r : reports) {
        md << "\n## " << r.name << "\n\n";
        md << "Confusion matrix (rows = prediction, columns = true label; cell shows count"
              " and share of the true-label column):\n\n";
        md << "| pred \\ true |";
        for (const auto& name : r.cm.label_names) md << " " << name << " |";
        md << "\n|---|";
        for (int t = 0; t < r.cm.k; ++t) md << "---|";
        md << "\n";
        for (int p = 0; p < r.cm.k; ++p) {
            md << "| " << r.cm.label_names[static_cast<size_t>(p)] << " |";
            for (int t = 0; t < r.cm.k; ++t) {
                const int64_t col_total = r.cm.column_sum(t) +
                                          r.cm.invalid_preds[static_cast<size_t>(t)];
                const double share = col_total == 0
                                         ? 0.0
                                         : static_cast<double>(r.cm.at(p, t)) /
                                               static_cast<double>(col_total);
                md << " " << r.cm.at(p, t) << " (" << format_pct(share) << ") |";
            }
            md << "\n";
        }
        bool any_invalid = false;
        for (int64_t c : r.cm.invalid_preds) any_invalid |= (c != 0);
        if (any_invalid) {
            md << "| (unmapped) |";
            for (int t = 0; t < r.cm.k; ++t) {
                md << " " << r.cm.invalid_preds[static_cast<size_t>(t)] << " |";
            }
            md << "\n";
        }
        md << "\nPer-class metrics:\n\n";
        md << "| class | precision | recall | F1 | support |\n";
        md << "|-------|-----------|--------|----|---------|\n";
        for (int c = 0; c < r.cm.k; ++c) {
            const auto& t = r.report.per_class[static_cast<size_t>(c)];
            md << "| " << r.cm.label_names[static_cast<size_t>(c)] << " | "
               << format_val(t.precision) << " | " << format_val(t.recall) << " | "
               << format_val(t.f1) << " | " << r.report.support[static_cast<size_t>(c)]
               << " |\n";
        }
    }
    if (!notes.empty()) {
        md << "\n## Notes\n\n";
        for (const auto& n : notes) md << "- " << n << "\n";
    }
    return md.str();
}

std::vector<PredRecord> read_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<PredRecord> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path + " line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
        PredRecord p;
        p.id = obj.at("id").get<std::string>();
        p.truth = obj.at("true").get<int>();
        if (obj.contains("pred") && !obj.at("pred").is_null()) {
            p.pred = obj.at("pred").get<int>();
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_predictions(const std::vector<PredRecord>& preds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& p : preds) {
        json obj;
        obj["id"] = p.id;
        obj["true"] = p.truth;
        if (p.pred) {
            obj["pred"] = *p.pred;
        } else {
            obj["pred"] = nullptr;
        }
        out << obj.dump() << "\n";
    }
}

ConfusionMatrix confusion_from_predictions(const std::vector<PredRecord>& preds, int k,
                                           std::vector<std::string> label_names) {
    if (preds.empty()) throw std::invalid_argument("empty prediction list");
    ConfusionMatrix cm(k, std::move(label_names));
    for (const auto& p : preds) {
        if (p.truth < 1 || p.truth > k) {
            throw std::invalid_argument("record " + p.id + ": true label " +
                                        std::to_string(p.truth) + " outside 1.." +
                                        std::to_string(k));
        }
        if (p.pred) {
            if (*p.pred < 1 || *p.pred > k) {
                throw std::invalid_argument("record " + p.id + ": predicted label " +
                                            std::to_string(*p.pred) + " outside 1.." +
                                            std::to_string(k));
            }
            cm.add(*p.pred - 1, p.truth - 1);
        } else {
            cm.add_invalid(p.truth - 1);
        }
    }
    return cm;
}

CountsFixture load_counts_fixture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    json doc;
    in >> doc;
    CountsFixture fx;
    fx.name = doc.at("name").get<std::string>();
    const auto names = doc.at("label_names").get<std::vector<std::string>>();
    fx.cm = ConfusionMatrix(static_cast<int>(names.size()), names);
    const auto& rows = doc.at("counts");
    if (rows.size() != names.size()) {
        throw std::runtime_error(path + ": counts row count != label count");
    }
    for (int p = 0; p < fx.cm.k; ++p) {
        const auto& row = rows.at(static_cast<size_t>(p));
        if (row.size() != names.size()) {
            throw std::runtime_error(path + ": counts row " + std::to_string(p) +
                                     " has wrong width");
        }
        for (int t = 0; t < fx.cm.k; ++t) {
            fx.cm.at(p, t) = row.at(static_cast<size_t>(t)).get<int64_t>();
        }
    }
    if (doc.contains("notes")) {
        fx.notes = doc.at("notes").get<std::vector<std::string>>();
    }
    return fx;
}

}  // namespace starsent::eval
