#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "bioner/config.hpp"
#include "bioner/errors.hpp"
#include "bioner/eval.hpp"
#include "bioner/fileio.hpp"
#include "bioner/pipeline.hpp"
#include "bioner/synthetic.hpp"
#include "bioner/trainer.hpp"

namespace fs = std::filesystem;
using namespace bioner;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("bioner");
    logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("BIONER_LOG_LEVEL")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to "off"; only accept a real "off".
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
        else spdlog::warn("ignoring unknown BIONER_LOG_LEVEL '{}'", env);
    }
}

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
};

RunConfig load_config(const CommonOptions& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
    if (o.seed) c.set_seed(*o.seed);
    return c;
}

fs::path out_path(const CommonOptions& o, const std::string& name) {
    fs::create_directories(o.out_dir);
    return fs::path(o.out_dir) / name;
}

std::vector<RawSentence> read_required(const std::optional<fs::path>& p, const std::string& field,
                                       ParseMode mode = ParseMode::Labeled) {
    if (!p) throw ConfigError(field + ": required by this command");
    require_file(p, field);
    return read_conll(*p, mode);
}

std::vector<RawSentence> read_labeled(const std::optional<fs::path>& p, const std::string& field) {
    auto data = read_required(p, field);
    if (const auto repaired = to_iobes(data)) {
        spdlog::warn("{}: repaired {} tag(s) that continued no chunk", field, repaired);
    }
    return data;
}

std::vector<RawSentence> unlabeled_text(const RunConfig& c) {
    std::vector<RawSentence> text;
    if (!c.paths.unlabeled.empty()) {
        for (std::size_t i = 0; i < c.paths.unlabeled.size(); ++i) {
            auto part = read_required(c.paths.unlabeled[i], fmt::format("paths.unlabeled[{}]", i), ParseMode::Unlabeled);
            text.insert(text.end(), part.begin(), part.end());
        }
    } else {
        if (!c.paths.train) throw ConfigError("paths.unlabeled: no unlabeled text (set paths.unlabeled or paths.train)");
        text = read_required(c.paths.train, "paths.train", ParseMode::Unlabeled);
        if (c.paths.dev) {
            auto dev = read_required(c.paths.dev, "paths.dev", ParseMode::Unlabeled);
            text.insert(text.end(), dev.begin(), dev.end());
        }
    }
    for (auto& s : text) s.tags.clear();
    return text;
}

std::string jsonl(const std::vector<nlohmann::json>& records) {
    std::string out;
    for (const auto& r : records) out += r.dump() + "\n";
    return out;
}

void log_report(const std::string& split, const EvalReport& r) {
    spdlog::info("{}: precision {:.4f} recall {:.4f} F1 {:.4f}", split, r.precision(), r.recall(), r.f1());
}

// ---------------------------------------------------------------------------

int cmd_pretrain(const CommonOptions& o) {
    const RunConfig c = load_config(o);
    const auto text = unlabeled_text(c);
    if (text.empty()) throw DataError("unlabeled corpus is empty");
    const Lexicon lexicon = Lexicon::build(text, c.text);
    if (!c.paths.embeddings) spdlog::warn("paths.embeddings not set; word embeddings start random");
    Tensor words = initial_word_table(lexicon, c.arch.word_dim, c.paths.embeddings, c.random_embedding_range, c.seed);
    BiLm model = build_bilm(c.arch, lexicon, words, c.seed);
    spdlog::info("pretraining on {} sentences, vocabulary {}", text.size(), lexicon.words.size());

    const auto corpus = lexicon.encode(text);
    const fs::path log_file = out_path(o, "bilm_log.jsonl");
    std::vector<nlohmann::json> log;
    const auto result = train_bilm(model, corpus, c.lm, [&](const LmEpochRecord& r) {
        spdlog::info("epoch {:>2}  lr {:.2e}  loss fwd {:.4f} bwd {:.4f}  ppl {:.3f}{}", r.epoch, r.lr, r.forward_loss,
                     r.backward_loss, r.heldout.mean(), r.improved ? "  *" : "");
        log.push_back(r.to_json());
        write_file_atomic(log_file, jsonl(log));
    });
    const fs::path ckpt = out_path(o, "bilm.ckpt");
    result.best.save(ckpt);
    spdlog::info("best epoch {} written to {}", result.best_epoch, ckpt.string());
    return kExitOk;
}

struct TrainOptions {
    std::string mode;
    std::string head;
    std::string lm_checkpoint;
    bool no_retrain = false;
};

void apply_train_flags(RunConfig& c, const TrainOptions& t) {
    if (!t.mode.empty()) c.mode = parse_mode(t.mode);
    if (!t.head.empty()) c.head = parse_head(t.head);
    if (!t.lm_checkpoint.empty()) c.paths.lm_checkpoint = t.lm_checkpoint;
    if (t.no_retrain) c.retrain_on_train_dev = false;
}

struct Prepared {
    std::optional<Checkpoint> lm;
    Lexicon lexicon;
    TagDict tags;
    std::vector<RawSentence> train, dev, test;
};

Prepared prepare_training(const RunConfig& c) {
    Prepared p;
    p.train = read_labeled(c.paths.train, "paths.train");
    p.dev = read_labeled(c.paths.dev, "paths.dev");
    if (c.paths.test) p.test = read_labeled(c.paths.test, "paths.test");
    if (c.mode != PretrainMode::None && !c.paths.lm_checkpoint) {
        throw ConfigError("paths.lm_checkpoint: mode '" + to_string(c.mode) + "' needs --lm-checkpoint");
    }
    if (c.paths.lm_checkpoint) {
        require_file(c.paths.lm_checkpoint, "paths.lm_checkpoint");
        p.lm = Checkpoint::load(*c.paths.lm_checkpoint);
        p.lexicon = Lexicon::from_json(p.lm->metadata.at("lexicon"));
    } else {
        std::vector<RawSentence> text = p.train;
        text.insert(text.end(), p.dev.begin(), p.dev.end());
        for (const auto& u : c.paths.unlabeled) {
            auto part = read_conll(u, ParseMode::Unlabeled);
            text.insert(text.end(), part.begin(), part.end());
        }
        p.lexicon = Lexicon::build(text, c.text);
    }
    std::vector<RawSentence> labeled = p.train;
    labeled.insert(labeled.end(), p.dev.begin(), p.dev.end());
    p.tags = TagDict::from_tags(labeled);
    return p;
}

NerModel fresh_model(const RunConfig& c, const Prepared& p) {
    const NerSpec spec{c.arch, p.tags, c.head, c.crf_boundary};
    Tensor words = initial_word_table(p.lexicon, c.arch.word_dim, c.paths.embeddings, c.random_embedding_range, c.seed);
    return build_ner_model(spec, p.lexicon, words, p.lm ? &*p.lm : nullptr, c.mode, c.seed);
}

int cmd_train(const CommonOptions& o, const TrainOptions& t) {
    RunConfig c = load_config(o);
    apply_train_flags(c, t);
    const Prepared p = prepare_training(c);
    const auto train = p.lexicon.encode(p.train, &p.tags);
    const auto dev = p.lexicon.encode(p.dev, &p.tags);
    spdlog::info("training {} head, mode {}, {} train / {} dev sentences, {} tags", to_string(c.head),
                 to_string(c.mode), train.size(), dev.size(), p.tags.size());

    NerModel model = fresh_model(c, p);
    const fs::path history_file = out_path(o, "history.jsonl");
    std::vector<nlohmann::json> history;
    const auto result = train_ner(model, train, dev, c.train, [&](const NerEpochRecord& r) {
        spdlog::info("epoch {:>2}  lr {:.2e}  loss {:.4f}  dev P {:.4f} R {:.4f} F1 {:.4f}{}", r.epoch, r.lr,
                     r.train_loss, r.dev_precision, r.dev_recall, r.dev_f1, r.improved ? "  *" : "");
        history.push_back(r.to_json());
        write_file_atomic(history_file, jsonl(history));
    });

    NerModel selected = NerModel::from_checkpoint(result.best);
    const EvalReport dev_report = evaluate(selected, dev);
    log_report("dev", dev_report);
    Checkpoint final_ckpt = result.best;
    if (c.retrain_on_train_dev) {
        spdlog::info("retraining on train + dev for {} epochs", result.best_epoch);
        NerModel again = fresh_model(c, p);
        final_ckpt = retrain_on_train_dev(again, train, dev, result, c.train);
    }
    final_ckpt.save(out_path(o, "model.ckpt"));

    nlohmann::json report{{"mode", to_string(c.mode)}, {"head", to_string(c.head)}, {"best_epoch", result.best_epoch},
                          {"dev", dev_report.to_json()}};
    std::cout << "dev   " << fmt::format("P {:.4f} R {:.4f} F1 {:.4f}", dev_report.precision(), dev_report.recall(),
                                         dev_report.f1())
              << "\n";
    if (!p.test.empty()) {
        const NerModel final_model = NerModel::from_checkpoint(final_ckpt);
        const EvalReport test_report = evaluate(final_model, p.lexicon.encode(p.test, &p.tags));
        log_report("test", test_report);
        report["test"] = test_report.to_json();
        std::cout << "test  " << fmt::format("P {:.4f} R {:.4f} F1 {:.4f}", test_report.precision(),
                                             test_report.recall(), test_report.f1())
                  << "\n";
    }
    write_file_atomic(out_path(o, "report.json"), report.dump(2) + "\n");
    return kExitOk;
}

NerModel load_model(const RunConfig& c, const std::string& flag) {
    std::optional<fs::path> path = c.paths.model;
    if (!flag.empty()) path = flag;
    if (!path) throw ConfigError("paths.model: no model given (use --model)");
    require_file(path, "paths.model");
    return NerModel::from_checkpoint(Checkpoint::load(*path));
}

int cmd_tag(const CommonOptions& o, const std::string& model_flag, const std::string& input, const std::string& output) {
    const RunConfig c = load_config(o);
    const NerModel model = load_model(c, model_flag);
    require_file(fs::path(input), "--input");
    auto sentences = read_conll(input, ParseMode::Unlabeled);
    for (auto& s : sentences) s.tags = model.predict_tags(model.lexicon.encode(s));
    const std::string text = format_conll(sentences);
    if (output.empty()) std::cout << text;
    else write_file_atomic(output, text);
    spdlog::info("tagged {} sentences", sentences.size());
    return kExitOk;
}

int cmd_eval(const std::string& gold_file, const std::string& pred_file, const std::string& json_out) {
    require_file(fs::path(gold_file), "--gold");
    require_file(fs::path(pred_file), "--pred");
    const auto gold = read_conll(gold_file);
    const auto pred = read_conll(pred_file);
    if (gold.size() != pred.size()) {
        throw DataError(fmt::format("gold has {} sentences but prediction has {}", gold.size(), pred.size()));
    }
    std::vector<std::vector<std::string>> g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].tokens != pred[i].tokens) {
            throw DataError(fmt::format("sentence {}: tokens of gold and prediction differ", i));
        }
        g.push_back(gold[i].tags);
        p.push_back(pred[i].tags);
    }
    const EvalReport r = exact_match_prf(g, p);
    std::cout << r.to_table();
    std::cout << fmt::format("F1 = {:.4f}\n", r.f1());
    if (!json_out.empty()) write_file_atomic(json_out, r.to_json().dump() + "\n");
    return kExitOk;
}

struct CurveOptions {
    std::string kind = "pr";
    std::string model;
    std::vector<double> fractions{0.25, 0.5, 1.0};
    std::size_t steps = 20;
};

int cmd_curve(const CommonOptions& o, const TrainOptions& t, const CurveOptions& k) {
    RunConfig c = load_config(o);
    apply_train_flags(c, t);
    if (k.kind == "pr") {
        const NerModel model = load_model(c, k.model);
        if (model.spec.head != HeadKind::Crf) throw ConfigError("--kind pr: the model must use the crf head");
        const bool use_test = c.paths.test.has_value();
        auto raw = read_labeled(use_test ? c.paths.test : c.paths.dev, use_test ? "paths.test" : "paths.dev");
        const auto data = model.lexicon.encode(raw, &model.tags());
        std::vector<double> thresholds;
        for (std::size_t i = 0; i <= k.steps; ++i) thresholds.push_back(static_cast<double>(i) / static_cast<double>(k.steps));
        std::string out = "# threshold\tprecision\trecall\tinterpolated_precision\n";
        for (const auto& pt : pr_curve(model, data, thresholds)) {
            out += fmt::format("{:.4f}\t{:.6f}\t{:.6f}\t{:.6f}\n", pt.threshold, pt.precision, pt.recall,
                               pt.interpolated_precision);
        }
        write_file_atomic(out_path(o, "pr_curve.tsv"), out);
        spdlog::info("wrote {}", out_path(o, "pr_curve.tsv").string());
        return kExitOk;
    }
    if (k.kind != "learning") throw ConfigError("--kind must be pr or learning");
    const Prepared p = prepare_training(c);
    if (p.test.empty()) throw ConfigError("paths.test: required by the learning curve");
    const auto train = p.lexicon.encode(p.train, &p.tags);
    const auto dev = p.lexicon.encode(p.dev, &p.tags);
    const auto test = p.lexicon.encode(p.test, &p.tags);
    TrainConfig tc = c.train;
    const Pipeline pipeline = [&](std::span<const Sentence> subset, std::uint64_t) {
        NerModel model = fresh_model(c, p);
        const auto result = train_ner(model, subset, dev, tc);
        const double f1 = evaluate(NerModel::from_checkpoint(result.best), test).f1();
        spdlog::info("{} sentences: test F1 {:.4f}", subset.size(), f1);
        return f1;
    };
    std::string out = "# fraction\tsentences\ttest_f1\n";
    for (const auto& pt : learning_curve(pipeline, train, k.fractions, c.seed)) {
        out += fmt::format("{:.4f}\t{}\t{:.6f}\n", pt.fraction, pt.sentences, pt.f1);
    }
    write_file_atomic(out_path(o, "learning_curve.tsv"), out);
    spdlog::info("wrote {}", out_path(o, "learning_curve.tsv").string());
    return kExitOk;
}

// A ready-to-run desk-scale setup: scaled-down dimensions and smaller batches
// so a full pretrain + train cycle takes minutes on one core.
nlohmann::json synth_config() {
    RunConfig c = desk_config();
    c.paths.train = "train.conll";
    c.paths.dev = "dev.conll";
    c.paths.test = "test.conll";
    c.paths.lm_checkpoint = "bilm.ckpt";
    return c.to_json();
}

int cmd_synth(const CommonOptions& o, std::size_t sentences) {
    SyntheticOptions so;
    if (o.seed) so.seed = *o.seed;
    if (sentences) so.sentences = sentences;
    const SyntheticCorpus corpus = generate_synthetic(so);
    write_file_atomic(out_path(o, "train.conll"), format_conll(corpus.train));
    write_file_atomic(out_path(o, "dev.conll"), format_conll(corpus.dev));
    write_file_atomic(out_path(o, "test.conll"), format_conll(corpus.test));
    write_file_atomic(out_path(o, "config.json"), synth_config().dump(2) + "\n");
    spdlog::info("wrote {} / {} / {} sentences and config.json to {}", corpus.train.size(), corpus.dev.size(),
                 corpus.test.size(), o.out_dir);
    return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
    auto* opt = cmd->add_option("--config", o.config, "JSON run configuration");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    else opt->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the configured seed");
    cmd->add_option("--out-dir", o.out_dir, "Directory for outputs")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainOptions& t) {
    cmd->add_option("--mode", t.mode, "Pretraining mode")->check(CLI::IsMember({"none", "fwd", "bwd", "bilm"}));
    cmd->add_option("--head", t.head, "Tagging head")->check(CLI::IsMember({"softmax", "crf"}));
    cmd->add_option("--lm-checkpoint", t.lm_checkpoint, "Pretrained BiLM checkpoint");
    cmd->add_flag("--no-retrain", t.no_retrain, "Keep the best-dev model instead of retraining on train + dev");
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"CNN-BiLSTM-CRF tagger with bidirectional language-model pretraining"};
    app.require_subcommand(1);

    CommonOptions common;
    TrainOptions train_opts;
    CurveOptions curve_opts;
    std::string model_flag, input, output, gold, pred, json_out;
    std::size_t synth_sentences = 0;

    auto* pretrain = app.add_subcommand("pretrain", "Train the bidirectional language model");
    add_common(pretrain, common, true);

    auto* train = app.add_subcommand("train", "Transfer pretrained weights and train the tagger");
    add_common(train, common, true);
    add_train_flags(train, train_opts);

    auto* tag = app.add_subcommand("tag", "Tag a token-per-line file");
    add_common(tag, common, false);
    tag->add_option("--model", model_flag, "Tagger checkpoint");
    tag->add_option("--input", input, "Tokens, one per line, blank line between sentences")->required();
    tag->add_option("--output", output, "Output file (default: stdout)");

    auto* eval = app.add_subcommand("eval", "Exact-match precision, recall and F1");
    eval->add_option("--gold", gold, "Gold CoNLL file")->required();
    eval->add_option("--pred", pred, "Predicted CoNLL file")->required();
    eval->add_option("--json", json_out, "Also write the report as JSON");

    auto* curve = app.add_subcommand("curve", "Precision-recall or learning curve");
    add_common(curve, common, true);
    add_train_flags(curve, train_opts);
    curve->add_option("--kind", curve_opts.kind, "pr or learning")->check(CLI::IsMember({"pr", "learning"}));
    curve->add_option("--model", curve_opts.model, "Tagger checkpoint for the pr curve");
    curve->add_option("--fractions", curve_opts.fractions, "Training fractions for the learning curve")->delimiter(',');
    curve->add_option("--steps", curve_opts.steps, "Threshold steps between 0 and 1 for the pr curve");

    auto* synth = app.add_subcommand("synth", "Write the synthetic corpus and a matching config");
    synth->add_option("--out-dir", common.out_dir, "Directory for outputs")->capture_default_str();
    synth->add_option("--seed", common.seed, "Corpus seed");
    synth->add_option("--sentences", synth_sentences, "Number of sentences");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*pretrain) return cmd_pretrain(common);
        if (*train) return cmd_train(common, train_opts);
        if (*tag) return cmd_tag(common, model_flag, input, output);
        if (*eval) return cmd_eval(gold, pred, json_out);
        if (*curve) return cmd_curve(common, train_opts, curve_opts);
        if (*synth) return cmd_synth(common, synth_sentences);
    } catch (const ConfigError& e) {
        spdlog::error("configuration: {}", e.what());
        return kExitConfig;
    } catch (const NumericError& e) {
        spdlog::error("numeric failure in {}: {}", e.op(), e.what());
        return kExitNumeric;
    } catch (const DataError& e) {
        spdlog::error("data: {}", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitData;
    }
    return kExitConfig;
}
