// Command-line surface for the pipeline: preprocess, train, eval, export,
// inspect. Exit codes: 2 bad input/config, 3 empty vocabulary, 4 numeric
// failure during training, 5 checkpoint/corpus vocabulary mismatch.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "traco/config.hpp"
#include "traco/corpus.hpp"
#include "traco/metrics.hpp"
#include "traco/trainer.hpp"

namespace fs = std::filesystem;
using namespace traco;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitEmptyVocab = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitVocabMismatch = 5;

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("failed writing " + path);
}

struct PreprocessArgs {
    std::string input;
    std::string stopword_path;
    std::string output_dir = "preprocessed";
    std::size_t min_doc_freq = 5;
    double max_doc_frac = 0.8;
};

int cmd_preprocess(const PreprocessArgs& args) {
    try {
        const RawCorpus raw = load_raw_corpus(args.input);
        const StopwordSet stopwords = args.stopword_path.empty()
                                          ? default_stopwords()
                                          : load_stopwords(args.stopword_path);
        const auto tokenized = preprocess(raw.texts, stopwords);
        Vocabulary vocab = build_vocab(tokenized, args.min_doc_freq, args.max_doc_frac);
        const std::vector<std::string>* labels = raw.labels.empty() ? nullptr : &raw.labels;
        BowCorpus corpus = vectorize(tokenized, std::move(vocab), labels);

        fs::create_directories(args.output_dir);
        save_vocabulary(corpus.vocab, args.output_dir + "/vocab.txt");
        save_bow(corpus, args.output_dir + "/bow.txt");
        if (corpus.has_labels()) save_labels(corpus.labels, args.output_dir + "/labels.tsv");

        std::cout << "documents: " << corpus.doc_count() << "\n"
                  << "vocabulary: " << corpus.vocab.size() << "\n"
                  << "dropped_documents: " << corpus.dropped_documents << "\n";
        return 0;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEmptyVocab;
    }
}

struct TrainArgs {
    std::string config_path;
    std::string output_dir;           // overrides config when set
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> ablations;
};

int cmd_train(const TrainArgs& args) {
    RunConfig rc;
    try {
        rc = RunConfig::from_file(args.config_path);
        if (!args.output_dir.empty()) rc.output_dir = args.output_dir;
        if (args.seed_set) rc.train.seed = args.seed;
        for (const std::string& a : args.ablations) {
            if (a == "disable_tpd") {
                rc.train.disable_tpd = true;
            } else if (a == "disable_cdd") {
                rc.train.disable_cdd = true;
            } else {
                throw ConfigError("unknown ablation: " + a +
                                  " (expected disable_tpd or disable_cdd)");
            }
        }
        rc.validate();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    }

    try {
        Vocabulary vocab = load_vocabulary(rc.vocab_path);
        BowCorpus corpus = load_bow(rc.bow_path, std::move(vocab));
        if (!rc.labels_path.empty()) {
            corpus.labels = load_labels(rc.labels_path);
            if (corpus.labels.size() != corpus.doc_count()) {
                throw SchemaError("label count does not match corpus documents");
            }
        }

        fs::create_directories(rc.output_dir);
        write_text(rc.output_dir + "/config_echo.toml", rc.to_toml());

        Checkpoint cp = train(corpus, rc.train, &std::cerr);
        save_checkpoint(cp, rc.output_dir + "/checkpoint.bin");

        std::ostringstream csv;
        csv << "epoch,loss\n";
        for (std::size_t e = 0; e < cp.loss_history.size(); ++e) {
            csv << e + 1 << ',' << nlohmann::json(cp.loss_history[e]).dump() << "\n";
        }
        write_text(rc.output_dir + "/loss_history.csv", csv.str());

        std::cout << "trained " << rc.train.epochs << " epochs on " << corpus.doc_count()
                  << " documents\n"
                  << "checkpoint: " << rc.output_dir + "/checkpoint.bin" << "\n";
        if (!cp.loss_history.empty()) {
            std::cout << "final_loss: " << cp.loss_history.back() << "\n";
        }
        return 0;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

struct EvalArgs {
    std::string checkpoint_path;
    std::string bow_path;
    std::string vocab_path;
    std::string labels_path;
    std::string output_dir = "eval";
    std::size_t top_n = 15;
};

int cmd_eval(const EvalArgs& args) {
    try {
        Checkpoint cp = load_checkpoint(args.checkpoint_path);
        Vocabulary vocab = load_vocabulary(args.vocab_path);
        if (vocab.hash() != cp.vocab_hash) {
            std::cerr << "error: corpus vocabulary does not match the checkpoint\n";
            return kExitVocabMismatch;
        }
        BowCorpus corpus = load_bow(args.bow_path, std::move(vocab));
        if (!args.labels_path.empty()) {
            corpus.labels = load_labels(args.labels_path);
            if (corpus.labels.size() != corpus.doc_count()) {
                throw SchemaError("label count does not match corpus documents");
            }
        }

        MetricsReport report = evaluate(cp, corpus, args.top_n);
        fs::create_directories(args.output_dir);
        write_text(args.output_dir + "/metrics.json",
                   report.to_json(train_config_to_json(cp.config)).dump(2) + "\n");

        std::cout << "metric            aggregate\n";
        std::cout << "tc_npmi           " << report.tc_npmi_mean << "\n";
        std::cout << "td                " << report.td_mean << "\n";
        std::cout << "pcc               " << report.pcc_mean << "\n";
        std::cout << "pcd               " << report.pcd_mean << "\n";
        std::cout << "sd                " << report.sd_mean << "\n";
        std::cout << "pncd              " << report.pncd_mean << "\n";
        if (report.clustering_available) {
            std::cout << "purity            " << report.purity_mean << "\n";
            std::cout << "nmi               " << report.nmi_mean << "\n";
        }
        std::cout << "report: " << args.output_dir + "/metrics.json" << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

struct ExportArgs {
    std::string checkpoint_path;
    std::string vocab_path;
    std::string bow_path;
    std::string labels_path;
    std::string format;
    std::string output_dir = "export";
    std::size_t n_top = 15;
};

int cmd_export(const ExportArgs& args) {
    if (args.format != "hierarchy-json" && args.format != "features-tsv") {
        std::cerr << "error: unknown format " << args.format
                  << " (expected hierarchy-json or features-tsv)\n";
        return kExitBadInput;
    }
    try {
        Checkpoint cp = load_checkpoint(args.checkpoint_path);
        Vocabulary vocab = load_vocabulary(args.vocab_path);
        fs::create_directories(args.output_dir);
        if (args.format == "hierarchy-json") {
            write_text(args.output_dir + "/hierarchy.json",
                       export_hierarchy_json(cp, vocab, args.n_top).dump(2) + "\n");
            std::cout << "wrote " << args.output_dir + "/hierarchy.json" << "\n";
        } else {
            if (args.bow_path.empty()) {
                std::cerr << "error: features-tsv requires --bow\n";
                return kExitBadInput;
            }
            if (vocab.hash() != cp.vocab_hash) {
                std::cerr << "error: corpus vocabulary does not match the checkpoint\n";
                return kExitVocabMismatch;
            }
            BowCorpus corpus = load_bow(args.bow_path, std::move(vocab));
            if (!args.labels_path.empty()) corpus.labels = load_labels(args.labels_path);
            TracoModel model = cp.restore_model();
            const std::vector<Matrix> thetas =
                infer_thetas(model, cp.dependency, corpus, cp.config.disable_tpd);
            for (const std::string& p : export_features(thetas, corpus.labels, args.output_dir)) {
                std::cout << "wrote " << p << "\n";
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_inspect(const std::string& checkpoint_path) {
    try {
        Checkpoint cp = load_checkpoint(checkpoint_path);
        std::cout << "config:\n" << train_config_to_json(cp.config).dump(2) << "\n";
        std::cout << "vocab_size: " << cp.vocab_size << "\n";
        std::cout << "vocab_hash: " << cp.vocab_hash << "\n";
        std::cout << "parameters:\n";
        for (const auto& [name, m] : cp.parameters) {
            std::cout << "  " << name << ": " << m.rows() << " x " << m.cols() << "\n";
        }
        for (std::size_t l = 0; l < cp.dependency.size(); ++l) {
            std::cout << "dependency " << l + 1 << "->" << l + 2 << ": "
                      << cp.dependency[l].rows() << " x " << cp.dependency[l].cols() << "\n";
        }
        std::cout << "epochs_recorded: " << cp.loss_history.size() << "\n";
        if (!cp.loss_history.empty()) {
            std::cout << "first_loss: " << cp.loss_history.front() << "\n";
            std::cout << "final_loss: " << cp.loss_history.back() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TraCo hierarchical topic modeling"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    CLI::App* preprocess_cmd =
        app.add_subcommand("preprocess", "Build vocabulary and bag-of-words files");
    preprocess_cmd->add_option("--input", pre.input,
                               "Corpus file: plain text (one document per line) or JSON lines "
                               "with \"text\" and optional \"label\"")
        ->required();
    preprocess_cmd->add_option("--stopwords", pre.stopword_path,
                               "Stopword file, one word per line (default: bundled English list)");
    preprocess_cmd->add_option("--min-doc-freq", pre.min_doc_freq,
                               "Keep words in at least this many documents")
        ->capture_default_str();
    preprocess_cmd->add_option("--max-doc-frac", pre.max_doc_frac,
                               "Drop words in more than this fraction of documents")
        ->capture_default_str();
    preprocess_cmd->add_option("--output-dir", pre.output_dir, "Output directory")
        ->capture_default_str();

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model from a config file");
    train_cmd->add_option("--config", tr.config_path, "Run configuration file")->required();
    train_cmd->add_option("--output-dir", tr.output_dir,
                          "Overrides output.dir from the config file");
    train_cmd->add_option("--seed", tr.seed, "Overrides train.seed from the config file");
    train_cmd->add_option("--ablation", tr.ablations,
                          "Ablation switches: disable_tpd and/or disable_cdd");

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
    eval_cmd->add_option("--checkpoint", ev.checkpoint_path, "Checkpoint file")->required();
    eval_cmd->add_option("--bow", ev.bow_path, "Bag-of-words file")->required();
    eval_cmd->add_option("--vocab", ev.vocab_path, "Vocabulary file")->required();
    eval_cmd->add_option("--labels", ev.labels_path, "Optional label file for clustering metrics");
    eval_cmd->add_option("--top-n", ev.top_n, "Top words per topic used by the metrics")
        ->capture_default_str();
    eval_cmd->add_option("--output-dir", ev.output_dir, "Output directory")
        ->capture_default_str();

    ExportArgs ex;
    CLI::App* export_cmd = app.add_subcommand("export", "Export hierarchy or doc-topic features");
    export_cmd->add_option("--checkpoint", ex.checkpoint_path, "Checkpoint file")->required();
    export_cmd->add_option("--vocab", ex.vocab_path, "Vocabulary file")->required();
    export_cmd->add_option("--format", ex.format, "hierarchy-json or features-tsv")->required();
    export_cmd->add_option("--bow", ex.bow_path, "Bag-of-words file (features-tsv only)");
    export_cmd->add_option("--labels", ex.labels_path, "Optional label file (features-tsv only)");
    export_cmd->add_option("--n-top", ex.n_top, "Words per topic in hierarchy-json")
        ->capture_default_str();
    export_cmd->add_option("--output-dir", ex.output_dir, "Output directory")
        ->capture_default_str();

    std::string inspect_path;
    CLI::App* inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint summary");
    inspect_cmd->add_option("--checkpoint", inspect_path, "Checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);
    tr.seed_set = train_cmd->count("--seed") > 0;

    if (preprocess_cmd->parsed()) return cmd_preprocess(pre);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (eval_cmd->parsed()) return cmd_eval(ev);
    if (export_cmd->parsed()) return cmd_export(ex);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_path);
    return 1;
}
