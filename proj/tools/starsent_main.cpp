// starsent: desk-scale pipeline for five-star review sentiment experiments.
// Subcommands cover corpus cleaning, language filtering, splitting,
// tokenization, toy transformer training, prediction, evaluation and the
// remote-model comparison harness.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "starsent/corpus.hpp"
#include "starsent/eval.hpp"
#include "starsent/hash.hpp"
#include "starsent/langid.hpp"
#include "starsent/llm_client.hpp"
#include "starsent/model.hpp"
#include "starsent/tokenizer.hpp"
#include "starsent/train.hpp"
#include "starsent/weights_io.hpp"

namespace {

using namespace starsent;
using nlohmann::json;

corpus::InputFormat parse_format(const std::string& fmt) {
    if (fmt == "jsonl") return corpus::InputFormat::jsonl;
    if (fmt == "csv") return corpus::InputFormat::csv;
    throw std::invalid_argument("unknown input format: " + fmt);
}

std::map<int, Fraction> parse_target(const std::string& spec) {
    // "5:0.247,4:0.215,3:0.191,2:0.099,1:0.247"
    std::map<int, Fraction> target;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const size_t colon = part.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("target entry '" + part + "' is not rating:fraction");
        }
        target[std::stoi(part.substr(0, colon))] = Fraction::parse(part.substr(colon + 1));
    }
    return target;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------

struct CleanArgs {
    std::string in, out, format = "jsonl", log;
    size_t max_words = 450;
};

int run_clean(const CleanArgs& a) {
    corpus::RecordSet rs = corpus::ingest(a.in, parse_format(a.format));
    rs = corpus::anonymize(rs);
    auto [cleaned, log] = corpus::clean(rs, a.max_words);
    corpus::write_jsonl(cleaned, a.out);
    if (!a.log.empty()) {
        std::ofstream out(a.log, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + a.log);
        for (const auto& [id, reason] : log.removed) {
            out << json({{"id", id}, {"reason", corpus::to_string(reason)}}).dump() << "\n";
        }
    }
    std::cout << "clean: kept " << log.kept_count << " of " << rs.size() << " (";
    bool first = true;
    for (const auto& [reason, count] : log.counts_by_reason()) {
        if (!first) std::cout << " ";
        std::cout << corpus::to_string(reason) << "=" << count;
        first = false;
    }
    std::cout << ")\n";
    return 0;
}

struct LangidArgs {
    std::string in, keep = "lt", out, separated, save_profile_dir;
    std::vector<std::string> train_specs;   // lang=corpus.txt
    std::vector<std::string> profile_paths; // serialized profiles
    int top_n = langid::kDefaultTopN;
};

int run_langid(const LangidArgs& a) {
    std::vector<langid::LangProfile> profiles;
    for (const auto& spec : a.train_specs) {
        const size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--train expects lang=corpus.txt, got " + spec);
        }
        const std::string lang = spec.substr(0, eq);
        profiles.push_back(
            langid::train_profile({read_text(spec.substr(eq + 1))}, lang, a.top_n));
    }
    for (const auto& path : a.profile_paths) {
        profiles.push_back(langid::LangProfile::load(path));
    }
    if (profiles.empty()) throw std::invalid_argument("no profiles: use --train or --profile");
    if (!a.save_profile_dir.empty()) {
        for (const auto& p : profiles) {
            p.save(a.save_profile_dir + "/" + p.lang + ".profile.json");
        }
    }
    if (a.in.empty()) {
        std::cout << "langid: trained " << profiles.size() << " profiles\n";
        return 0;
    }
    corpus::RecordSet rs = corpus::ingest(a.in, corpus::InputFormat::jsonl);
    langid::FilterResult res = langid::filter_language(rs, a.keep, profiles);
    corpus::write_jsonl(res.kept, a.out);
    if (!a.separated.empty()) corpus::write_jsonl(res.separated, a.separated);
    std::cout << "langid: kept " << res.kept.size() << " " << a.keep << " reviews, separated "
              << res.separated.size() << " for manual review\n";
    return 0;
}

struct SplitArgs {
    std::string in, out_train, out_eval, out_test, fractions = "0.68,0.20,0.12", target;
    bool no_stratify = false;
    bool dedup = false;
    uint64_t seed = 0;
};

int run_split(const SplitArgs& a) {
    corpus::RecordSet rs = corpus::ingest(a.in, corpus::InputFormat::jsonl);
    if (a.dedup && a.target.empty()) {
        auto [deduped, dlog] = corpus::dedup(rs);
        std::cout << "dedup: removed " << dlog.removed.size() << " duplicates\n";
        rs = std::move(deduped);
    }
    if (!a.target.empty()) {
        const size_t before = rs.size();
        rs = corpus::dedup_downsample(rs, parse_target(a.target),
                                      derive_seed(a.seed, "downsample"));
        std::cout << "downsample: " << before << " -> " << rs.size() << " records\n";
    }
    std::vector<std::string> parts;
    {
        std::stringstream ss(a.fractions);
        std::string part;
        while (std::getline(ss, part, ',')) parts.push_back(part);
    }
    if (parts.size() != 3) {
        throw std::invalid_argument("--fractions expects train,eval,test");
    }
    corpus::SplitSpec spec;
    spec.train = Fraction::parse(parts[0]);
    spec.eval = Fraction::parse(parts[1]);
    spec.test = Fraction::parse(parts[2]);
    spec.seed = a.seed;
    spec.stratify_by_rating = !a.no_stratify;
    corpus::SplitResult result = corpus::split(rs, spec);
    corpus::write_jsonl(result.train, a.out_train);
    corpus::write_jsonl(result.eval, a.out_eval);
    corpus::write_jsonl(result.test, a.out_test);
    std::cout << "split: train=" << result.train.size() << " eval=" << result.eval.size()
              << " test=" << result.test.size() << "\n";
    return 0;
}

tokenizer::Scheme scheme_of(const std::string& s) { return tokenizer::scheme_from_string(s); }

// Builds the text -> ids function for a scheme, loading vocabularies when the
// scheme needs one. Returns the vocabulary size alongside.
std::pair<train::EncodeFn, int> make_encoder(tokenizer::Scheme scheme,
                                             const std::string& vocab_path,
                                             bool add_specials) {
    switch (scheme) {
        case tokenizer::Scheme::byte:
            return {[](const std::string& s) { return tokenizer::byte_encode(s).ids; },
                    tokenizer::bytes::kVocabSize};
        case tokenizer::Scheme::wordpiece: {
            if (vocab_path.empty()) throw std::invalid_argument("wordpiece needs --vocab");
            auto vocab = std::make_shared<tokenizer::WordPieceVocab>(
                tokenizer::WordPieceVocab::load(vocab_path));
            const int size = static_cast<int>(vocab->tokens.size());
            return {[vocab, add_specials](const std::string& s) {
                        return tokenizer::wordpiece_encode(s, *vocab, add_specials).ids;
                    },
                    size};
        }
        case tokenizer::Scheme::unigram: {
            if (vocab_path.empty()) throw std::invalid_argument("unigram needs --vocab");
            auto vocab = std::make_shared<tokenizer::UnigramVocab>(
                tokenizer::UnigramVocab::load(vocab_path));
            const int size = static_cast<int>(vocab->pieces_by_id.size());
            return {[vocab](const std::string& s) {
                        return tokenizer::unigram_encode(s, *vocab).ids;
                    },
                    size};
        }
    }
    throw std::invalid_argument("unknown scheme");
}

struct TokenizeArgs {
    std::string in, out, scheme = "byte", vocab, save_vocab;
    size_t train_vocab = 0;
    bool add_specials = false;
};

int run_tokenize(const TokenizeArgs& a) {
    const tokenizer::Scheme scheme = scheme_of(a.scheme);
    corpus::RecordSet rs = corpus::ingest(a.in, corpus::InputFormat::jsonl);

    std::string vocab_path = a.vocab;
    if (a.train_vocab > 0) {
        if (scheme != tokenizer::Scheme::wordpiece) {
            throw std::invalid_argument("--train-vocab only applies to the wordpiece scheme");
        }
        if (a.save_vocab.empty()) throw std::invalid_argument("--train-vocab needs --save-vocab");
        std::vector<std::string> texts;
        for (const auto& r : rs.records) texts.push_back(r.text);
        tokenizer::wordpiece_train(texts, a.train_vocab).save(a.save_vocab);
        vocab_path = a.save_vocab;
        std::cout << "tokenize: trained wordpiece vocab of size " << a.train_vocab << " -> "
                  << a.save_vocab << "\n";
    }

    if (a.out.empty()) return 0;
    auto [encode, vocab_size] = make_encoder(scheme, vocab_path, a.add_specials);
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    size_t n_tokens = 0;
    for (const auto& r : rs.records) {
        const std::vector<int> ids = encode(r.text);
        n_tokens += ids.size();
        out << json({{"id", r.id}, {"ids", ids}, {"n", ids.size()}}).dump() << "\n";
    }
    std::cout << "tokenize: " << rs.size() << " records, " << n_tokens << " tokens (scheme "
              << a.scheme << ", vocab " << vocab_size << ")\n";
    return 0;
}

struct TrainArgs {
    std::string train_path, eval_path, scheme = "byte", vocab, preset = "toy";
    std::string out_weights, log_path, regime = "full";
    int epochs = 20, batch = 16, patience = 2;
    double lr = 3e-4;
    uint64_t seed = 0;
    bool verbose = false;
};

int run_train(const TrainArgs& a) {
    const tokenizer::Scheme scheme = scheme_of(a.scheme);
    auto [encode, vocab_size] = make_encoder(scheme, a.vocab, false);

    model::ModelConfig cfg = a.preset == "reference" ? model::ModelConfig::reference(vocab_size)
                          : a.preset == "toy"        ? model::ModelConfig::toy(vocab_size)
                                                     : throw std::invalid_argument(
                                                           "unknown preset: " + a.preset);
    train::TrainConfig tcfg;
    tcfg.max_epochs = a.epochs;
    tcfg.batch_size = a.batch;
    tcfg.learning_rate = a.preset == "reference" && a.lr == 3e-4 ? 2e-5 : a.lr;
    tcfg.patience = a.patience;
    tcfg.regime = a.regime == "head_only" ? train::Regime::head_only : train::Regime::full;
    tcfg.seed = derive_seed(a.seed, "train");

    corpus::RecordSet train_set = corpus::ingest(a.train_path, corpus::InputFormat::jsonl);
    corpus::RecordSet eval_set = corpus::ingest(a.eval_path, corpus::InputFormat::jsonl);

    std::ofstream log;
    if (!a.log_path.empty()) {
        log.open(a.log_path, std::ios::binary);
        if (!log) throw std::runtime_error("cannot write " + a.log_path);
    }
    model::WeightBundle init = model::init_weights(cfg, derive_seed(a.seed, "init"));
    train::TrainResult result = train::train_loop(
        train_set, eval_set, encode, std::move(init), cfg, tcfg,
        [&](const train::EpochRecord& r, const model::WeightBundle&) {
            if (log.is_open()) log << r.to_json_line() << "\n";
            if (a.verbose) {
                std::cout << "  epoch " << r.epoch << ": train_loss=" << r.train_loss
                          << " val_loss=" << r.val_loss << " val_acc=" << r.val_accuracy
                          << "\n";
            }
        });

    json meta = {{"preset", a.preset},
                 {"scheme", a.scheme},
                 {"mode", "encoder_classifier"},
                 {"vocab_size", vocab_size},
                 {"n_layers", cfg.n_layers},
                 {"d_model", cfg.d_model},
                 {"n_heads", cfg.n_heads},
                 {"d_ff", cfg.d_ff},
                 {"n_classes", cfg.n_classes},
                 {"max_positions", cfg.max_positions}};
    model::save_weights(result.best_weights, a.out_weights, model::WeightDType::f32, meta);
    std::cout << "train: " << result.records.size() << " epochs ("
              << train::to_string(result.stop_reason) << "), best epoch "
              << result.best_epoch << ", val_loss "
              << result.records[static_cast<size_t>(result.best_epoch - 1)].val_loss << "\n";
    return 0;
}

struct PredictArgs {
    std::string in, weights, out, scheme, vocab;
};

model::ModelConfig config_from_meta(const json& meta) {
    model::ModelConfig cfg;
    cfg.n_layers = meta.at("n_layers").get<int>();
    cfg.d_model = meta.at("d_model").get<int>();
    cfg.n_heads = meta.at("n_heads").get<int>();
    cfg.d_ff = meta.at("d_ff").get<int>();
    cfg.vocab_size = meta.at("vocab_size").get<int>();
    cfg.n_classes = meta.at("n_classes").get<int>();
    cfg.max_positions = meta.at("max_positions").get<int>();
    cfg.mode = meta.at("mode").get<std::string>() == "encoder_decoder"
                   ? model::Mode::encoder_decoder
                   : model::Mode::encoder_classifier;
    return cfg;
}

int run_predict(const PredictArgs& a) {
    const json meta = model::load_metadata(a.weights);
    if (meta.is_null()) {
        throw std::runtime_error(a.weights + " has no embedded config; re-train to regenerate");
    }
    const model::ModelConfig cfg = config_from_meta(meta);
    const std::string scheme_name =
        a.scheme.empty() ? meta.at("scheme").get<std::string>() : a.scheme;
    auto [encode, vocab_size] = make_encoder(scheme_of(scheme_name), a.vocab, false);
    if (vocab_size != cfg.vocab_size) {
        throw std::invalid_argument("tokenizer vocab size " + std::to_string(vocab_size) +
                                    " does not match model vocab " +
                                    std::to_string(cfg.vocab_size));
    }
    const model::WeightBundle w = model::load_weights(a.weights, cfg);
    corpus::RecordSet rs = corpus::ingest(a.in, corpus::InputFormat::jsonl);

    std::vector<eval::PredRecord> preds;
    preds.reserve(rs.size());
    for (const auto& r : rs.records) {
        std::vector<int> ids = encode(r.text);
        if (ids.size() > static_cast<size_t>(cfg.max_positions)) {
            ids.resize(static_cast<size_t>(cfg.max_positions));
        }
        eval::PredRecord p;
        p.id = r.id;
        p.truth = r.rating;
        if (cfg.mode == model::Mode::encoder_classifier) {
            const std::vector<double> logits = model::encoder_forward(ids, w, cfg, false, nullptr);
            size_t best = 0;
            for (size_t i = 1; i < logits.size(); ++i) {
                if (logits[i] > logits[best]) best = i;
            }
            p.pred = static_cast<int>(best) + 1;
        } else {
            p.pred = model::map_label(model::greedy_decode(ids, w, cfg, 4));
        }
        preds.push_back(std::move(p));
    }
    eval::write_predictions(preds, a.out);
    std::cout << "predict: " << preds.size() << " predictions -> " << a.out << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string pred, name = "run", out_json, out_md;
    bool do_collapse = false;
};

int run_evaluate(const EvaluateArgs& a) {
    const std::vector<eval::PredRecord> preds = eval::read_predictions(a.pred);
    const eval::ConfusionMatrix cm = eval::confusion_from_predictions(preds);
    std::vector<eval::NamedReport> reports;
    reports.push_back({a.name + " (5-class)", eval::metrics(cm), cm});
    if (a.do_collapse) {
        const eval::ConfusionMatrix c3 = eval::collapse(cm);
        reports.push_back({a.name + " (3-class)", eval::metrics(c3), c3});
    }
    if (!a.out_json.empty()) {
        write_text(a.out_json, eval::render_report(reports, eval::ReportFormat::json));
    }
    if (!a.out_md.empty()) {
        write_text(a.out_md, eval::render_report(reports, eval::ReportFormat::markdown));
    }
    std::cout << "evaluate: " << a.name << " accuracy "
              << eval::metrics(cm).accuracy;
    if (a.do_collapse) {
        std::cout << " (3-class " << eval::metrics(eval::collapse(cm)).accuracy << ")";
    }
    std::cout << " over " << cm.total() << " predictions\n";
    return 0;
}

struct CompareRemoteArgs {
    std::string in, pred, cache, endpoint, model_name = "gpt-4";
    std::string out_json, out_md, out_remote, prompt_file;
    int rpm = 60, max_retries = 3;
    double timeout = 30.0;
};

int run_compare_remote(const CompareRemoteArgs& a) {
    llm_client::RemoteConfig cfg;
    cfg.endpoint = a.endpoint;
    cfg.model = a.model_name;
    cfg.requests_per_minute = a.rpm;
    cfg.max_retries = a.max_retries;
    cfg.timeout_seconds = a.timeout;
    if (!a.prompt_file.empty()) cfg.prompt_template = read_text(a.prompt_file);
    if (const char* token = std::getenv(llm_client::kAuthTokenEnv)) cfg.auth_token = token;

    corpus::RecordSet rs = corpus::ingest(a.in, corpus::InputFormat::jsonl);
    const std::vector<llm_client::RemoteVerdict> verdicts =
        llm_client::classify_remote(rs, cfg, a.cache);
    if (!a.out_remote.empty()) {
        std::vector<eval::PredRecord> remote_preds;
        std::map<std::string, int> truth_by_id;
        for (const auto& r : rs.records) truth_by_id[r.id] = r.rating;
        for (const auto& v : verdicts) {
            remote_preds.push_back({v.id, truth_by_id.at(v.id), v.label});
        }
        eval::write_predictions(remote_preds, a.out_remote);
    }
    size_t cached = 0;
    for (const auto& v : verdicts) cached += v.cached ? 1 : 0;

    const std::vector<eval::PredRecord> local = eval::read_predictions(a.pred);
    std::vector<std::pair<std::string, int>> truths;
    for (const auto& r : rs.records) truths.emplace_back(r.id, r.rating);
    const llm_client::ComparisonReport report =
        llm_client::compare_runs(local, verdicts, truths);
    if (!a.out_json.empty()) write_text(a.out_json, report.json);
    if (!a.out_md.empty()) write_text(a.out_md, report.markdown);
    std::cout << "compare-remote: " << verdicts.size() << " verdicts (" << cached
              << " cached) -> " << (a.out_md.empty() ? a.out_json : a.out_md) << "\n";
    return 0;
}

struct ReportArgs {
    std::vector<std::string> pred_specs;  // name=path
    std::string fixture, format = "markdown", out;
};

int run_report(const ReportArgs& a) {
    std::vector<eval::NamedReport> reports;
    std::vector<std::string> notes;
    for (const auto& spec : a.pred_specs) {
        const size_t eq = spec.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--pred expects name=pred.jsonl, got " + spec);
        }
        const auto preds = eval::read_predictions(spec.substr(eq + 1));
        const eval::ConfusionMatrix cm = eval::confusion_from_predictions(preds);
        reports.push_back({spec.substr(0, eq), eval::metrics(cm), cm});
    }
    if (!a.fixture.empty()) {
        eval::CountsFixture fx = eval::load_counts_fixture(a.fixture);
        reports.push_back({fx.name, eval::metrics(fx.cm), fx.cm});
        const eval::ConfusionMatrix c3 = eval::collapse(fx.cm);
        reports.push_back({fx.name + " (3-class)", eval::metrics(c3), c3});
        notes.insert(notes.end(), fx.notes.begin(), fx.notes.end());
    }
    if (reports.empty()) throw std::invalid_argument("nothing to report: use --pred/--fixture");
    const auto fmt =
        a.format == "json" ? eval::ReportFormat::json : eval::ReportFormat::markdown;
    const std::string doc = eval::render_report(reports, fmt, notes);
    if (a.out.empty()) {
        std::cout << doc;
    } else {
        write_text(a.out, doc);
        std::cout << "report: " << reports.size() << " runs -> " << a.out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"starsent: five-star review sentiment pipeline"};
    app.set_config("--config", "", "INI config file; flags override config values");
    uint64_t seed = 0;
    bool verbose = false;
    app.add_option("--seed", seed, "top-level seed; every stage derives from it");
    app.add_flag("--verbose", verbose, "chatty progress output");

    CleanArgs clean_args;
    auto* clean_cmd = app.add_subcommand("clean", "ingest, anonymize and clean raw reviews");
    clean_cmd->add_option("--in", clean_args.in, "raw export")->required();
    clean_cmd->add_option("--format", clean_args.format, "jsonl|csv");
    clean_cmd->add_option("--out", clean_args.out, "cleaned JSONL")->required();
    clean_cmd->add_option("--max-words", clean_args.max_words, "drop reviews above this");
    clean_cmd->add_option("--log", clean_args.log, "removal log JSONL");

    LangidArgs langid_args;
    auto* langid_cmd = app.add_subcommand("langid", "assign languages and filter");
    langid_cmd->add_option("--in", langid_args.in, "cleaned JSONL");
    langid_cmd->add_option("--keep", langid_args.keep, "target language code");
    langid_cmd->add_option("--train", langid_args.train_specs, "lang=corpus.txt (repeatable)");
    langid_cmd->add_option("--profile", langid_args.profile_paths, "profile JSON (repeatable)");
    langid_cmd->add_option("--top-n", langid_args.top_n, "profile depth");
    langid_cmd->add_option("--out", langid_args.out, "kept records JSONL");
    langid_cmd->add_option("--separated", langid_args.separated, "separated records JSONL");
    langid_cmd->add_option("--save-profile", langid_args.save_profile_dir,
                           "directory for trained profiles");

    SplitArgs split_args;
    auto* split_cmd = app.add_subcommand("split", "dedup/downsample and split");
    split_cmd->add_option("--in", split_args.in)->required();
    split_cmd->add_option("--fractions", split_args.fractions, "train,eval,test");
    split_cmd->add_option("--target", split_args.target,
                          "rating:fraction list; dedups then downsamples toward it");
    split_cmd->add_flag("--dedup", split_args.dedup, "collapse duplicate texts first");
    split_cmd->add_flag("--no-stratify", split_args.no_stratify);
    split_cmd->add_option("--out-train", split_args.out_train)->required();
    split_cmd->add_option("--out-eval", split_args.out_eval)->required();
    split_cmd->add_option("--out-test", split_args.out_test)->required();

    TokenizeArgs tok_args;
    auto* tok_cmd = app.add_subcommand("tokenize", "encode records with a tokenizer scheme");
    tok_cmd->add_option("--in", tok_args.in)->required();
    tok_cmd->add_option("--out", tok_args.out, "token log JSONL");
    tok_cmd->add_option("--scheme", tok_args.scheme, "byte|wordpiece|unigram");
    tok_cmd->add_option("--vocab", tok_args.vocab, "vocabulary file");
    tok_cmd->add_option("--train-vocab", tok_args.train_vocab, "train a wordpiece vocab");
    tok_cmd->add_option("--save-vocab", tok_args.save_vocab);
    tok_cmd->add_flag("--add-specials", tok_args.add_specials, "wrap as [CLS] ... [SEP]");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "fine-tune the classifier");
    train_cmd->add_option("--train", train_args.train_path)->required();
    train_cmd->add_option("--eval", train_args.eval_path)->required();
    train_cmd->add_option("--scheme", train_args.scheme, "byte|wordpiece|unigram");
    train_cmd->add_option("--vocab", train_args.vocab);
    train_cmd->add_option("--preset", train_args.preset, "toy|reference");
    train_cmd->add_option("--epochs", train_args.epochs);
    train_cmd->add_option("--batch", train_args.batch);
    train_cmd->add_option("--lr", train_args.lr);
    train_cmd->add_option("--patience", train_args.patience);
    train_cmd->add_option("--regime", train_args.regime, "full|head_only");
    train_cmd->add_option("--out-weights", train_args.out_weights)->required();
    train_cmd->add_option("--log", train_args.log_path, "epoch log JSONL");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "run the model over records");
    predict_cmd->add_option("--in", predict_args.in)->required();
    predict_cmd->add_option("--weights", predict_args.weights)->required();
    predict_cmd->add_option("--scheme", predict_args.scheme, "override stored scheme");
    predict_cmd->add_option("--vocab", predict_args.vocab);
    predict_cmd->add_option("--out", predict_args.out)->required();

    EvaluateArgs eval_args;
    auto* eval_cmd = app.add_subcommand("evaluate", "metrics from a prediction log");
    eval_cmd->add_option("--pred", eval_args.pred)->required();
    eval_cmd->add_option("--name", eval_args.name);
    eval_cmd->add_flag("--collapse", eval_args.do_collapse, "also report 3-class metrics");
    eval_cmd->add_option("--out-json", eval_args.out_json);
    eval_cmd->add_option("--out-md", eval_args.out_md);

    CompareRemoteArgs cmp_args;
    auto* cmp_cmd = app.add_subcommand("compare-remote",
                                       "classify via a remote chat endpoint and compare");
    cmp_cmd->add_option("--in", cmp_args.in, "records with texts and true ratings")->required();
    cmp_cmd->add_option("--pred", cmp_args.pred, "local prediction log")->required();
    cmp_cmd->add_option("--cache", cmp_args.cache, "response cache JSONL")->required();
    cmp_cmd->add_option("--endpoint", cmp_args.endpoint)->required();
    cmp_cmd->add_option("--model", cmp_args.model_name);
    cmp_cmd->add_option("--rpm", cmp_args.rpm, "requests per minute");
    cmp_cmd->add_option("--max-retries", cmp_args.max_retries);
    cmp_cmd->add_option("--timeout", cmp_args.timeout, "seconds");
    cmp_cmd->add_option("--prompt-file", cmp_args.prompt_file, "prompt template override");
    cmp_cmd->add_option("--out-json", cmp_args.out_json);
    cmp_cmd->add_option("--out-md", cmp_args.out_md);
    cmp_cmd->add_option("--out-remote", cmp_args.out_remote, "remote predictions JSONL");

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "side-by-side report over runs");
    report_cmd->add_option("--pred", report_args.pred_specs, "name=pred.jsonl (repeatable)");
    report_cmd->add_option("--fixture", report_args.fixture, "published counts fixture");
    report_cmd->add_option("--format", report_args.format, "markdown|json");
    report_cmd->add_option("--out", report_args.out, "output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }

    if (app.get_subcommands().empty()) {
        std::cerr << app.help() << "\n";
        return 1;
    }

    try {
        split_args.seed = derive_seed(seed, "split-stage");
        train_args.seed = seed;
        train_args.verbose = verbose;
        if (clean_cmd->parsed()) return run_clean(clean_args);
        if (langid_cmd->parsed()) return run_langid(langid_args);
        if (split_cmd->parsed()) return run_split(split_args);
        if (tok_cmd->parsed()) return run_tokenize(tok_args);
        if (train_cmd->parsed()) return run_train(train_args);
        if (predict_cmd->parsed()) return run_predict(predict_args);
        if (eval_cmd->parsed()) return run_evaluate(eval_args);
        if (cmp_cmd->parsed()) return run_compare_remote(cmp_args);
        if (report_cmd->parsed()) return run_report(report_args);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
