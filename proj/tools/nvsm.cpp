// Command-line front end: ingest, train, query, run, fuse, eval, analyze.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/eval.hpp"
#include "nvsm/fusion.hpp"
#include "nvsm/hash.hpp"
#include "nvsm/io.hpp"
#include "nvsm/lexical.hpp"
#include "nvsm/retrieval.hpp"
#include "nvsm/trainer.hpp"
#include "nvsm/trec.hpp"

namespace {

using nlohmann::json;

std::string hash_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw nvsm::DataError("cannot open for hashing: " + path.string());
    std::ostringstream bytes;
    bytes << in.rdbuf();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(nvsm::fnv1a64(bytes.str())));
    return hex;
}

json artifact_entry(const std::filesystem::path& path) {
    return json{{"path", path.string()}, {"fnv1a64", hash_file_hex(path)}};
}

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    std::int64_t elapsed_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

std::vector<std::string> query_terms(const std::string& title) {
    return nvsm::tokenize(title, {});
}

void require_single_token(const std::string& tag) {
    if (tag.empty() || tag.find_first_of(" \t\r\n") != std::string::npos) {
        throw nvsm::UsageError("run tag must be a single non-empty token: '" + tag + "'");
    }
}

std::vector<nvsm::Topic> load_unique_topics(const std::filesystem::path& path) {
    auto topics = nvsm::read_topics(path);
    for (std::size_t i = 0; i < topics.size(); ++i) {
        for (std::size_t j = i + 1; j < topics.size(); ++j) {
            if (topics[i].query_id == topics[j].query_id) {
                throw nvsm::DataError("topics: duplicate query id '" + topics[i].query_id + "'");
            }
        }
    }
    return topics;
}

nvsm::ModelParameters load_model_for(const std::filesystem::path& path,
                                     const nvsm::DocumentStore& store) {
    auto params = nvsm::load_model(path);
    nvsm::require_compatible(params, store);
    return params;
}

// ---- train ----------------------------------------------------------------

struct TrainCli {
    std::string store_path;
    std::string output_prefix;
    std::string config_path;
    std::string manifest_path;
    std::string select = "last";
    std::string val_topics;
    std::string val_qrels;
    std::vector<std::size_t> widths;
    nvsm::TrainConfig config;
};

void apply_config_file(nvsm::TrainConfig& config, std::vector<std::size_t>& widths,
                       const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw nvsm::DataError("cannot open config file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw nvsm::DataError("config file " + path.string() + ": " + e.what());
    }
    auto get = [&doc](const char* key, auto& slot) {
        if (doc.contains(key)) slot = doc.at(key).get<std::decay_t<decltype(slot)>>();
    };
    get("word_dim", config.word_dim);
    get("doc_dim", config.doc_dim);
    get("negatives", config.negatives);
    get("learning_rate", config.learning_rate);
    get("regularization", config.regularization);
    get("batch_size", config.batch_size);
    get("iterations", config.iterations);
    get("adam_beta1", config.adam_beta1);
    get("adam_beta2", config.adam_beta2);
    get("adam_epsilon", config.adam_epsilon);
    get("eps_variance", config.eps_variance);
    get("seed", config.seed);
    get("workers", config.workers);
    if (doc.contains("n")) {
        widths.clear();
        if (doc.at("n").is_array()) {
            for (const auto& v : doc.at("n")) widths.push_back(v.get<std::size_t>());
        } else {
            widths.push_back(doc.at("n").get<std::size_t>());
        }
    }
}

json config_json(const nvsm::TrainConfig& config, const std::vector<std::size_t>& widths) {
    return json{{"word_dim", config.word_dim},
                {"doc_dim", config.doc_dim},
                {"n", widths},
                {"negatives", config.negatives},
                {"learning_rate", config.learning_rate},
                {"regularization", config.regularization},
                {"batch_size", config.batch_size},
                {"iterations", config.iterations},
                {"adam_beta1", config.adam_beta1},
                {"adam_beta2", config.adam_beta2},
                {"adam_epsilon", config.adam_epsilon},
                {"eps_variance", config.eps_variance},
                {"seed", config.seed},
                {"workers", config.workers}};
}

double checkpoint_validation_map(const nvsm::ModelParameters& params,
                                 const nvsm::DocumentStore& store,
                                 const std::vector<nvsm::Topic>& topics, const nvsm::Qrels& qrels,
                                 unsigned workers) {
    std::vector<nvsm::RankedList> lists;
    for (const auto& topic : topics) {
        if (qrels.num_relevant(topic.query_id) == 0) continue;
        lists.push_back(
            nvsm::rank(topic.query_id, query_terms(topic.title), params, store, 1000, workers));
    }
    if (lists.empty()) throw nvsm::DataError("validation topics have no relevant documents");
    return nvsm::evaluate_run(lists, qrels).mean_map;
}

int cmd_train(TrainCli& cli) {
    Stopwatch total;
    if (cli.widths.empty()) cli.widths.push_back(cli.config.ngram_width);
    std::sort(cli.widths.begin(), cli.widths.end());
    cli.widths.erase(std::unique(cli.widths.begin(), cli.widths.end()), cli.widths.end());
    if (cli.select != "last" && cli.select != "best") {
        throw nvsm::UsageError("--select must be 'last' or 'best'");
    }
    const bool use_validation = cli.select == "best";
    if (use_validation && (cli.val_topics.empty() || cli.val_qrels.empty())) {
        throw nvsm::UsageError("--select best requires --val-topics and --val-qrels");
    }

    const auto store = nvsm::load_store(cli.store_path);
    std::vector<nvsm::Topic> topics;
    nvsm::Qrels qrels;
    if (use_validation) {
        topics = load_unique_topics(cli.val_topics);
        qrels = nvsm::read_qrels(cli.val_qrels);
    }

    json manifest;
    manifest["command"] = "train";
    manifest["seed"] = cli.config.seed;
    manifest["select"] = cli.select;
    manifest["inputs"]["store"] = artifact_entry(cli.store_path);
    if (use_validation) {
        manifest["inputs"]["val_topics"] = artifact_entry(cli.val_topics);
        manifest["inputs"]["val_qrels"] = artifact_entry(cli.val_qrels);
    }
    json outputs = json::array();

    for (const std::size_t n : cli.widths) {
        Stopwatch width_timer;
        nvsm::TrainConfig config = cli.config;
        config.ngram_width = n;
        config.validate();

        const std::string base = cli.output_prefix + ".n" + std::to_string(n);
        std::ofstream log(base + ".log", std::ios::binary | std::ios::trunc);
        if (!log) throw nvsm::DataError("cannot open training log: " + base + ".log");

        std::vector<std::pair<std::size_t, double>> validation;  // iteration, MAP
        nvsm::train(
            store, config,
            [&](const nvsm::ModelParameters& params, std::size_t iteration) {
                const std::string path = base + ".iter" + std::to_string(iteration) + ".nvsm";
                nvsm::save_model(path, params);
                if (use_validation) {
                    validation.emplace_back(iteration, checkpoint_validation_map(
                                                           params, store, topics, qrels,
                                                           config.workers));
                }
            },
            [&log](std::size_t iteration, std::size_t batch, double loss) {
                char loss_text[32];
                std::snprintf(loss_text, sizeof loss_text, "%.6f", loss);
                log << iteration << " " << batch << " " << loss_text << "\n";
            });
        log.close();

        std::size_t selected = config.iterations;
        if (use_validation) {
            double best = -1.0;
            for (const auto& [iteration, map] : validation) {
                if (map >= best) {  // ties resolve toward the later iteration
                    best = map;
                    selected = iteration;
                }
            }
            manifest["validation_map"][std::to_string(n)] = json::object();
            for (const auto& [iteration, map] : validation) {
                manifest["validation_map"][std::to_string(n)][std::to_string(iteration)] = map;
            }
        }
        const std::string selected_path = base + ".nvsm";
        std::filesystem::copy_file(base + ".iter" + std::to_string(selected) + ".nvsm",
                                   selected_path,
                                   std::filesystem::copy_options::overwrite_existing);

        manifest["selected"][std::to_string(n)] = selected;
        manifest["timings_ms"]["n" + std::to_string(n)] = width_timer.elapsed_ms();
        for (std::size_t i = 0; i <= config.iterations; ++i) {
            outputs.push_back(artifact_entry(base + ".iter" + std::to_string(i) + ".nvsm"));
        }
        outputs.push_back(artifact_entry(base + ".log"));
        outputs.push_back(artifact_entry(selected_path));
    }

    manifest["config"] = config_json(cli.config, cli.widths);
    manifest["outputs"] = outputs;
    manifest["timings_ms"]["total"] = total.elapsed_ms();
    const std::string manifest_path =
        cli.manifest_path.empty() ? cli.output_prefix + ".manifest.json" : cli.manifest_path;
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw nvsm::DataError("cannot open manifest: " + manifest_path);
    out << manifest.dump(2) << "\n";
    std::cout << "manifest " << manifest_path << "\n";
    return 0;
}

// ---- run / fuse helpers ----------------------------------------------------

struct QlmCli {
    std::string kind;  // "dirichlet" or "jm"
    double mu = 1000.0;
    double lambda = 0.5;

    nvsm::SmoothingConfig config() const {
        if (kind == "dirichlet") return nvsm::SmoothingConfig::dirichlet(mu);
        if (kind == "jm") return nvsm::SmoothingConfig::jelinek_mercer(lambda);
        throw nvsm::UsageError("--qlm must be 'dirichlet' or 'jm'");
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural vector space retrieval toolkit"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Tokenize a corpus and persist a document store");
    std::string ingest_corpus, ingest_stopwords, ingest_output;
    std::size_t ingest_max_vocab = nvsm::kDefaultMaxVocabulary;
    unsigned ingest_workers = 1;
    ingest->add_option("--corpus", ingest_corpus,
                       "Corpus directory (one file per doc) or TSV name<TAB>text")
        ->required();
    ingest->add_option("--output", ingest_output, "Store file to write")->required();
    ingest->add_option("--stopwords", ingest_stopwords, "Stopword list, one word per line");
    ingest->add_option("--max-vocab", ingest_max_vocab, "Vocabulary size cap");
    ingest->add_option("--workers", ingest_workers, "Worker thread cap");

    // train
    auto* train = app.add_subcommand("train", "Train models, one per n-gram width");
    TrainCli train_cli;
    train->add_option("--store", train_cli.store_path, "Document store")->required();
    train->add_option("--output-prefix", train_cli.output_prefix, "Checkpoint path prefix")
        ->required();
    train->add_option("--config", train_cli.config_path, "JSON config file (flags win)");
    train->add_option("--n", train_cli.widths, "N-gram width; repeat to train one model per width");
    train->add_option("--word-dim", train_cli.config.word_dim, "Word vector dimensionality");
    train->add_option("--doc-dim", train_cli.config.doc_dim, "Document vector dimensionality");
    train->add_option("--negatives", train_cli.config.negatives, "Negative examples z");
    train->add_option("--learning-rate", train_cli.config.learning_rate, "Adam learning rate");
    train->add_option("--lambda", train_cli.config.regularization, "L2 regularization weight");
    train->add_option("--batch-size", train_cli.config.batch_size, "Instances per batch");
    train->add_option("--iterations", train_cli.config.iterations, "Training iterations");
    train->add_option("--seed", train_cli.config.seed, "Random seed");
    train->add_option("--workers", train_cli.config.workers, "Worker thread cap");
    train->add_option("--select", train_cli.select, "Checkpoint selection: last or best");
    train->add_option("--val-topics", train_cli.val_topics, "Validation topics (for --select best)");
    train->add_option("--val-qrels", train_cli.val_qrels, "Validation qrels (for --select best)");
    train->add_option("--manifest", train_cli.manifest_path, "Manifest path");

    // query
    auto* query = app.add_subcommand("query", "Rank documents for one query");
    std::string query_model, query_store, query_text;
    std::size_t query_k = 10;
    unsigned query_workers = 1;
    query->add_option("--model", query_model, "Model file")->required();
    query->add_option("--store", query_store, "Document store")->required();
    query->add_option("--query", query_text, "Query text")->required();
    query->add_option("--k", query_k, "Result depth");
    query->add_option("--workers", query_workers, "Worker thread cap");

    // run
    auto* run = app.add_subcommand("run", "Write a TREC run file for a topics file");
    std::vector<std::string> run_models;
    std::string run_store, run_topics, run_output, run_tag;
    QlmCli run_qlm;
    std::size_t run_k = 1000, run_candidate_depth = 1000;
    unsigned run_workers = 1;
    run->add_option("--store", run_store, "Document store")->required();
    run->add_option("--topics", run_topics, "Topics file: query_id<TAB>title")->required();
    run->add_option("--output", run_output, "Run file to write")->required();
    run->add_option("--model", run_models, "Model file; repeat for a standardized-sum ensemble");
    run->add_option("--qlm", run_qlm.kind, "Rank by query likelihood: dirichlet or jm");
    run->add_option("--mu", run_qlm.mu, "Dirichlet mu");
    run->add_option("--lambda-jm", run_qlm.lambda, "Jelinek-Mercer lambda");
    run->add_option("--k", run_k, "Run depth");
    run->add_option("--candidate-depth", run_candidate_depth, "Ensemble candidate depth");
    run->add_option("--tag", run_tag, "Run tag");
    run->add_option("--workers", run_workers, "Worker thread cap");

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Cross-validated linear fusion of features");
    std::vector<std::string> fuse_models, fuse_runs;
    std::string fuse_store, fuse_topics, fuse_qrels, fuse_output, fuse_tag = "fusion";
    QlmCli fuse_qlm;
    std::size_t fuse_folds = 20, fuse_k = 1000, fuse_candidate_depth = 1000;
    double fuse_step = nvsm::kDefaultGridStep;
    std::uint64_t fuse_seed = 42;
    unsigned fuse_workers = 1;
    fuse->add_option("--store", fuse_store, "Document store")->required();
    fuse->add_option("--topics", fuse_topics, "Topics file")->required();
    fuse->add_option("--qrels", fuse_qrels, "Relevance judgments")->required();
    fuse->add_option("--output", fuse_output, "Fused run file to write")->required();
    fuse->add_option("--model", fuse_models, "Model feature; repeatable");
    fuse->add_option("--qlm", fuse_qlm.kind, "Add a query-likelihood feature: dirichlet or jm");
    fuse->add_option("--mu", fuse_qlm.mu, "Dirichlet mu");
    fuse->add_option("--lambda-jm", fuse_qlm.lambda, "Jelinek-Mercer lambda");
    fuse->add_option("--run", fuse_runs, "External run file feature; repeatable");
    fuse->add_option("--folds", fuse_folds, "Cross-validation folds");
    fuse->add_option("--step", fuse_step, "Weight grid step");
    fuse->add_option("--seed", fuse_seed, "Fold shuffle seed");
    fuse->add_option("--k", fuse_k, "Output depth");
    fuse->add_option("--candidate-depth", fuse_candidate_depth, "Per-feature pool depth");
    fuse->add_option("--tag", fuse_tag, "Run tag");
    fuse->add_option("--workers", fuse_workers, "Worker thread cap");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a run file against qrels");
    std::string eval_run, eval_qrels, eval_output;
    eval->add_option("--run", eval_run, "Run file")->required();
    eval->add_option("--qrels", eval_qrels, "Relevance judgments")->required();
    eval->add_option("--output", eval_output, "Also write the report here");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Norm analysis and term-overlap statistics");
    std::string analyze_model, analyze_store, analyze_topics, analyze_qrels, analyze_output;
    analyze->add_option("--model", analyze_model, "Model file")->required();
    analyze->add_option("--store", analyze_store, "Document store")->required();
    analyze->add_option("--topics", analyze_topics, "Topics file (enables titlestat)");
    analyze->add_option("--qrels", analyze_qrels, "Qrels (enables titlestat)");
    analyze->add_option("--output", analyze_output, "Also write the report here");

    try {
        // The config file seeds the train defaults; explicit flags then win.
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                apply_config_file(train_cli.config, train_cli.widths, argv[i + 1]);
                break;
            }
        }
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 1;
        }

        if (ingest->parsed()) {
            std::unordered_set<std::string> stopwords;
            if (!ingest_stopwords.empty()) stopwords = nvsm::load_stopwords(ingest_stopwords);
            const auto raw = nvsm::read_corpus(ingest_corpus);
            const auto store =
                nvsm::ingest_corpus(raw, stopwords, ingest_max_vocab, ingest_workers);
            nvsm::save_store(ingest_output, store);
            std::cout << "documents " << store.num_documents() << "\n"
                      << "vocabulary " << store.vocabulary().size() << "\n"
                      << "tokens " << store.total_token_count() << "\n";
            return 0;
        }
        if (train->parsed()) return cmd_train(train_cli);
        if (query->parsed()) {
            const auto store = nvsm::load_store(query_store);
            const auto params = load_model_for(query_model, store);
            const auto terms = query_terms(query_text);
            const auto ranked = nvsm::rank("q", terms, params, store, query_k, query_workers);
            char score_text[32];
            for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
                std::snprintf(score_text, sizeof score_text, "%.6f", ranked.entries[i].score);
                std::cout << (i + 1) << " " << ranked.entries[i].doc_name << " " << score_text
                          << "\n";
            }
            return 0;
        }
        if (run->parsed()) {
            if (run_models.empty() == run_qlm.kind.empty()) {
                throw nvsm::UsageError("run: give either --model (one or more) or --qlm");
            }
            const auto store = nvsm::load_store(run_store);
            const auto topics = load_unique_topics(run_topics);
            nvsm::Run out;
            if (!run_models.empty()) {
                std::vector<nvsm::ModelParameters> members;
                members.reserve(run_models.size());
                for (const auto& path : run_models) members.push_back(load_model_for(path, store));
                if (members.size() == 1) {
                    out.tag = run_tag.empty() ? "nvsm" : run_tag;
                    for (const auto& topic : topics) {
                        out.lists.push_back(nvsm::rank(topic.query_id, query_terms(topic.title),
                                                       members.front(), store, run_k,
                                                       run_workers));
                    }
                } else {
                    nvsm::EnsembleSpec spec{std::move(members), run_candidate_depth};
                    out.tag = run_tag.empty() ? "nvsm_ens" : run_tag;
                    for (const auto& topic : topics) {
                        out.lists.push_back(nvsm::ensemble_rank(topic.query_id,
                                                                query_terms(topic.title), spec,
                                                                store, run_k, run_workers));
                    }
                }
            } else {
                const auto smoothing = run_qlm.config();
                out.tag = run_tag.empty() ? "qlm" : run_tag;
                for (const auto& topic : topics) {
                    out.lists.push_back(nvsm::qlm_rank(topic.query_id, query_terms(topic.title),
                                                       store, smoothing, run_k, run_workers));
                }
            }
            require_single_token(out.tag);
            nvsm::write_run(run_output, out);
            std::cout << "run " << run_output << "\n";
            return 0;
        }
        if (fuse->parsed()) {
            if (fuse_models.empty() && fuse_qlm.kind.empty() && fuse_runs.empty()) {
                throw nvsm::UsageError("fuse: needs at least one of --model, --qlm, --run");
            }
            require_single_token(fuse_tag);
            const auto store = nvsm::load_store(fuse_store);
            const auto topics = load_unique_topics(fuse_topics);
            const auto qrels = nvsm::read_qrels(fuse_qrels);

            std::vector<nvsm::FusionQuery> queries;
            queries.reserve(topics.size());
            for (const auto& topic : topics) {
                queries.push_back({topic.query_id, query_terms(topic.title)});
            }

            std::vector<nvsm::ModelParameters> models;
            models.reserve(fuse_models.size());
            for (const auto& path : fuse_models) models.push_back(load_model_for(path, store));
            std::vector<nvsm::Run> external;
            external.reserve(fuse_runs.size());
            for (const auto& path : fuse_runs) external.push_back(nvsm::read_run(path));

            std::vector<nvsm::FeatureProvider> features;
            for (const auto& model : models) {
                features.push_back(nvsm::FeatureProvider{
                    "model",
                    [&model, &store, fuse_candidate_depth,
                     fuse_workers](const nvsm::FusionQuery& q) {
                        return nvsm::rank(q.query_id, q.terms, model, store,
                                          fuse_candidate_depth, fuse_workers);
                    },
                    [&model, &store](const nvsm::FusionQuery& q, const std::string& doc_name)
                        -> std::optional<double> {
                        const auto doc_id = store.find_document(doc_name);
                        if (!doc_id) return std::nullopt;
                        return nvsm::score(q.terms, *doc_id, model, store.vocabulary());
                    }});
            }
            if (!fuse_qlm.kind.empty()) {
                const auto smoothing = fuse_qlm.config();
                features.push_back(nvsm::FeatureProvider{
                    "qlm",
                    [&store, smoothing, fuse_candidate_depth,
                     fuse_workers](const nvsm::FusionQuery& q) {
                        return nvsm::qlm_rank(q.query_id, q.terms, store, smoothing,
                                              fuse_candidate_depth, fuse_workers);
                    },
                    [&store, smoothing](const nvsm::FusionQuery& q, const std::string& doc_name)
                        -> std::optional<double> {
                        const auto doc_id = store.find_document(doc_name);
                        if (!doc_id) return std::nullopt;
                        return nvsm::qlm_log_score(q.terms, store.document(*doc_id), store,
                                                   smoothing);
                    }});
            }
            for (const auto& ext : external) {
                features.push_back(nvsm::FeatureProvider{
                    "run",
                    [&ext, fuse_candidate_depth](const nvsm::FusionQuery& q) {
                        for (const auto& list : ext.lists) {
                            if (list.query_id == q.query_id) {
                                nvsm::RankedList top = list;
                                nvsm::truncate_ranked(top.entries, fuse_candidate_depth);
                                return top;
                            }
                        }
                        return nvsm::RankedList{q.query_id, {}};
                    },
                    [&ext](const nvsm::FusionQuery& q, const std::string& doc_name)
                        -> std::optional<double> {
                        for (const auto& list : ext.lists) {
                            if (list.query_id != q.query_id) continue;
                            for (const auto& entry : list.entries) {
                                if (entry.doc_name == doc_name) return entry.score;
                            }
                        }
                        return std::nullopt;
                    }});
            }

            const auto matrix = nvsm::build_feature_matrix(queries, features);
            auto fused = nvsm::cross_validated_fusion(matrix, qrels,
                                                      {fuse_folds, fuse_seed}, fuse_step, fuse_k);
            // Emit in topics order rather than fold order.
            std::sort(fused.lists.begin(), fused.lists.end(),
                      [&topics](const nvsm::RankedList& a, const nvsm::RankedList& b) {
                          auto pos = [&topics](const std::string& id) {
                              for (std::size_t i = 0; i < topics.size(); ++i) {
                                  if (topics[i].query_id == id) return i;
                              }
                              return topics.size();
                          };
                          return pos(a.query_id) < pos(b.query_id);
                      });
            nvsm::write_run(fuse_output, {fuse_tag, std::move(fused.lists)});
            std::cout << "run " << fuse_output << "\n";
            return 0;
        }
        if (eval->parsed()) {
            const auto run_data = nvsm::read_run(eval_run);
            const auto qrels = nvsm::read_qrels(eval_qrels);
            const auto report = nvsm::evaluate_run(run_data.lists, qrels);
            nvsm::write_metric_report(std::cout, report);
            if (!eval_output.empty()) {
                std::ofstream out(eval_output, std::ios::binary | std::ios::trunc);
                if (!out) throw nvsm::DataError("cannot open for writing: " + eval_output);
                nvsm::write_metric_report(out, report);
            }
            return 0;
        }
        if (analyze->parsed()) {
            if (analyze_topics.empty() != analyze_qrels.empty()) {
                throw nvsm::UsageError("analyze: --topics and --qrels go together");
            }
            const auto store = nvsm::load_store(analyze_store);
            const auto params = load_model_for(analyze_model, store);
            std::ostringstream report;
            const auto luhn = nvsm::luhn_norm_analysis(params, store.vocabulary());
            char text[64];
            std::snprintf(text, sizeof text, "%.4f", luhn.test.statistic);
            report << "luhn_welch_t " << text << "\n";
            std::snprintf(text, sizeof text, "%.6g", luhn.test.p_value);
            report << "luhn_welch_p " << text << "\n";
            std::snprintf(text, sizeof text, "%.6f", luhn.middle_mean);
            report << "luhn_middle_mean " << text << "\n";
            std::snprintf(text, sizeof text, "%.6f", luhn.outer_mean);
            report << "luhn_outer_mean " << text << "\n";
            for (const auto& row : luhn.rows) {
                const char* band = row.band == nvsm::FrequencyBand::Bottom ? "bottom"
                                 : row.band == nvsm::FrequencyBand::Middle ? "middle"
                                                                           : "top";
                std::snprintf(text, sizeof text, "%.6f", row.norm);
                report << "term " << row.term << " " << row.collection_frequency << " " << text
                       << " " << band << "\n";
            }
            if (!analyze_topics.empty()) {
                const auto topics = load_unique_topics(analyze_topics);
                const auto qrels = nvsm::read_qrels(analyze_qrels);
                double sum = 0.0;
                std::size_t counted = 0;
                for (const auto& topic : topics) {
                    if (qrels.num_relevant(topic.query_id) == 0) continue;
                    const double value = nvsm::titlestat_rel(
                        topic.query_id, query_terms(topic.title), qrels, store);
                    std::snprintf(text, sizeof text, "%.4f", value);
                    report << "titlestat " << topic.query_id << " " << text << "\n";
                    sum += value;
                    ++counted;
                }
                if (counted > 0) {
                    std::snprintf(text, sizeof text, "%.4f", sum / static_cast<double>(counted));
                    report << "titlestat all " << text << "\n";
                }
            }
            std::cout << report.str();
            if (!analyze_output.empty()) {
                std::ofstream out(analyze_output, std::ios::binary | std::ios::trunc);
                if (!out) throw nvsm::DataError("cannot open for writing: " + analyze_output);
                out << report.str();
            }
            return 0;
        }
        throw nvsm::UsageError("no subcommand given");
    } catch (const nvsm::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const nvsm::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const nvsm::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
