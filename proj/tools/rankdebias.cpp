// Command line front end: extract-features, audit, eval, fit, rerank, synth.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rankdebias/audit.hpp"
#include "rankdebias/corpus.hpp"
#include "rankdebias/features.hpp"
#include "rankdebias/log.hpp"
#include "rankdebias/metrics.hpp"
#include "rankdebias/reranker.hpp"
#include "rankdebias/similarity.hpp"
#include "rankdebias/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace rankdebias;

namespace {

// Raised for bad flag values the parser itself cannot reject.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_on_comma(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

long parse_long(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw UsageError("invalid " + what + ": '" + s + "'");
    }
}

int parse_bias_id(const std::string& s) {
    long v = parse_long(s, "bias id");
    if (v < 1 || v > kNumBiases) {
        throw UsageError("bias id must be between 1 and 7, got '" + s + "'");
    }
    return static_cast<int>(v);
}

// "B=W" bucket width overrides, e.g. --width 6=0.2
std::map<int, double> parse_width_overrides(const std::vector<std::string>& specs) {
    std::map<int, double> out;
    for (const std::string& s : specs) {
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw UsageError("width override must look like BIAS=WIDTH, got '" + s + "'");
        }
        int bias = parse_bias_id(s.substr(0, eq));
        double w = 0.0;
        try {
            std::size_t used = 0;
            w = std::stod(s.substr(eq + 1), &used);
            if (used != s.size() - eq - 1) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw UsageError("invalid width in override '" + s + "'");
        }
        if (!(w > 0.0)) throw UsageError("width must be positive in override '" + s + "'");
        out[bias] = w;
    }
    return out;
}

ordered_json features_row(const std::string& pair_id, const BiasFeatures& f) {
    ordered_json row;
    row["pair_id"] = pair_id;
    row["code_len"] = f.code_len;
    row["query_len"] = f.query_len;
    row["ast_nodes"] = f.ast_node_count;
    row["ast_depth"] = f.ast_depth;
    row["reserved"] = f.reserved_count;
    row["max_tfidf"] = f.max_tfidf;
    row["overlap"] = f.overlap;
    row["ast_exact"] = f.ast_exact;
    return row;
}

struct ExtractArgs {
    std::string dataset;
    std::string split = "all";
    std::string out = "-";
    bool strict_ast = false;
};

int cmd_extract_features(const ExtractArgs& a) {
    log_msg(LogLevel::info, "extract-features: dataset=" + a.dataset + " split=" + a.split +
                                " out=" + a.out + (a.strict_ast ? " strict-ast" : ""));
    Corpus corpus = load_dataset(a.dataset);
    FeatureStore store = FeatureStore::build(corpus);

    std::ofstream file;
    if (a.out != "-") {
        file.open(a.out, std::ios::binary);
        if (!file) throw DataError("cannot open output file " + a.out);
    }
    std::ostream& os = a.out == "-" ? std::cout : file;

    std::optional<Split> wanted;
    if (a.split != "all") wanted = split_from_string(a.split);
    for (const QueryCodePair& pair : corpus.pairs()) {
        if (wanted && pair.split != *wanted) continue;
        const BiasFeatures& f = store.pair_features(pair);
        if (a.strict_ast && !f.ast_exact) {
            throw DataError("parse fallback on pair " + pair.pair_id + " with --strict-ast");
        }
        os << features_row(pair.pair_id, f).dump() << '\n';
    }
    os.flush();
    if (!os) throw DataError("failed writing " + a.out);
    return 0;
}

struct AuditArgs {
    std::string dataset;
    std::string run;
    std::string split = "test";
    std::string bias = "all";
    std::vector<std::string> widths;
    std::string out_dir;
    bool strict_ast = false;
};

int cmd_audit(const AuditArgs& a) {
    log_msg(LogLevel::info, "audit: dataset=" + a.dataset + " run=" + a.run + " split=" +
                                a.split + " bias=" + a.bias + " out=" + a.out_dir);
    std::vector<int> bias_ids;
    if (a.bias == "all") {
        for (int b = 1; b <= kNumBiases; ++b) bias_ids.push_back(b);
    } else {
        bias_ids.push_back(parse_bias_id(a.bias));
    }
    std::map<int, double> widths = parse_width_overrides(a.widths);

    Corpus corpus = load_dataset(a.dataset);
    Split split = split_from_string(a.split);
    RankingRun run = load_run(a.run, corpus, split);
    FeatureStore store = FeatureStore::build(corpus);
    std::map<std::string, BiasFeatures> features = store.split_features(split);
    if (a.strict_ast) {
        for (const auto& [pair_id, f] : features) {
            if (!f.ast_exact) {
                throw DataError("parse fallback on pair " + pair_id + " with --strict-ast");
            }
        }
    }
    PerCaseResult cases = per_case_mrr(run, corpus, split);

    fs::create_directories(a.out_dir);
    ordered_json summary;
    summary["split"] = a.split;
    summary["queries"] = cases.outcomes.size();
    summary["excluded_queries"] = cases.excluded.size();
    summary["biases"] = ordered_json::object();
    for (int bias : bias_ids) {
        double width = widths.count(bias) ? widths.at(bias) : default_interval_width(bias);
        BiasReport report = build_report(bias, width, features, cases.outcomes);
        fs::path csv = fs::path(a.out_dir) / ("bias" + std::to_string(bias) + ".csv");
        write_report_csv(report, csv);
        ordered_json entry;
        entry["width"] = report.width;
        entry["severity"] = report.severity;
        entry["included"] = report.included;
        entry["excluded"] = report.excluded;
        summary["biases"][std::to_string(bias)] = entry;
    }
    fs::path summary_path = fs::path(a.out_dir) / "summary.json";
    std::ofstream os(summary_path, std::ios::binary);
    if (!os) throw DataError("cannot open output file " + summary_path.string());
    os << summary.dump(2) << '\n';
    os.flush();
    if (!os) throw DataError("failed writing " + summary_path.string());
    return 0;
}

struct EvalArgs {
    std::string dataset;
    std::string run;
    std::string split = "test";
    std::string ks = "1,5,10";
    bool json_out = false;
};

int cmd_eval(const EvalArgs& a) {
    log_msg(LogLevel::info, "eval: dataset=" + a.dataset + " run=" + a.run + " split=" +
                                a.split + " k=" + a.ks + (a.json_out ? " json" : ""));
    std::vector<long> ks;
    for (const std::string& part : split_on_comma(a.ks)) {
        long k = parse_long(part, "cutoff in --k");
        if (k < 1) throw UsageError("cutoffs in --k must be positive, got '" + part + "'");
        ks.push_back(k);
    }

    Corpus corpus = load_dataset(a.dataset);
    Split split = split_from_string(a.split);
    RankingRun run = load_run(a.run, corpus, split);
    EvalSummary ev = evaluate(run, corpus, split, ks);

    if (a.json_out) {
        ordered_json j;
        j["mrr"] = ev.mrr;
        j["hr"] = ordered_json::object();
        for (const auto& [k, hr] : ev.hit_rate) j["hr"][std::to_string(k)] = hr;
        j["queries"] = ev.n_queries;
        j["excluded"] = ev.excluded.size();
        std::cout << j.dump() << '\n';
        return 0;
    }
    std::printf("%-9s %.6f\n", "MRR", ev.mrr);
    for (const auto& [k, hr] : ev.hit_rate) {
        std::printf("%-9s %.6f\n", ("HR@" + std::to_string(k)).c_str(), hr);
    }
    std::printf("%-9s %zu\n", "queries", ev.n_queries);
    std::printf("%-9s %zu\n", "excluded", ev.excluded.size());
    return 0;
}

struct FitArgs {
    std::string train_dataset;
    std::string train_run;
    int bias = 0;
    std::size_t top_m = 1;
    double top_n_percent = 10.0;
    std::size_t n_clusters = 1;
    double width = 0.0;
    std::string boost_scope = "similar";
    std::string cluster_space = "feature-mrr";
    std::string embeddings;
    bool fallback_tfidf = false;
    std::string out;
};

int cmd_fit(const FitArgs& a) {
    log_msg(LogLevel::info,
            "fit: train-dataset=" + a.train_dataset + " train-run=" + a.train_run +
                " bias=" + std::to_string(a.bias) + " M=" + std::to_string(a.top_m) +
                " N=" + std::to_string(a.top_n_percent) + " S=" + std::to_string(a.n_clusters) +
                " width=" + std::to_string(a.width) + " boost-scope=" + a.boost_scope +
                " cluster-space=" + a.cluster_space + " out=" + a.out);
    if (!a.embeddings.empty() || a.fallback_tfidf) {
        log_msg(LogLevel::info, "fit: similarity flags are accepted for symmetry with "
                                "rerank but fitting does not consult neighbours");
    }
    Corpus corpus = load_dataset(a.train_dataset);
    RankingRun run = load_run(a.train_run, corpus, Split::train);
    FeatureStore store = FeatureStore::build(corpus);

    RerankerParams params;
    params.top_m = a.top_m;
    params.top_n_percent = a.top_n_percent;
    params.n_clusters = a.n_clusters;
    params.width = a.width;
    params.scope = boost_scope_from_string(a.boost_scope);
    params.space = cluster_space_from_string(a.cluster_space);
    RerankerModel model = fit_reranker(corpus, run, store, a.bias, params);
    save_model(model, a.out);
    return 0;
}

struct RerankArgs {
    std::string models;
    std::string mode = "sequential";
    std::string order = "7,6,3,4,2,5,1";
    std::string test_dataset;
    std::string test_run;
    std::string embeddings;
    bool fallback_tfidf = false;
    std::string out;
};

int cmd_rerank(const RerankArgs& a) {
    log_msg(LogLevel::info, "rerank: models=" + a.models + " mode=" + a.mode + " order=" +
                                a.order + " test-dataset=" + a.test_dataset + " test-run=" +
                                a.test_run + " out=" + a.out);
    std::vector<RerankerModel> models;
    for (const std::string& path : split_on_comma(a.models)) {
        if (path.empty()) throw UsageError("empty path in --models");
        models.push_back(load_model(path));
    }
    std::map<int, std::size_t> position;
    std::size_t next = 0;
    for (const std::string& part : split_on_comma(a.order)) {
        position.emplace(parse_bias_id(part), next++);
    }
    for (const RerankerModel& m : models) {
        if (!position.count(m.bias_id)) {
            log_msg(LogLevel::warn, "rerank: bias " + std::to_string(m.bias_id) +
                                        " missing from --order, applying it last");
        }
    }
    std::stable_sort(models.begin(), models.end(),
                     [&](const RerankerModel& x, const RerankerModel& y) {
                         auto key = [&](const RerankerModel& m) {
                             auto it = position.find(m.bias_id);
                             return it == position.end() ? position.size() : it->second;
                         };
                         return key(x) < key(y);
                     });

    Corpus corpus = load_dataset(a.test_dataset);
    RankingRun run = load_run(a.test_run, corpus, Split::test);
    FeatureStore store = FeatureStore::build(corpus);

    EmbeddingTable table;
    std::optional<QuerySimilarity> similarity;
    if (!a.embeddings.empty()) {
        table = load_embeddings(a.embeddings);
        similarity.emplace(corpus, table);
    } else {
        if (!a.fallback_tfidf) {
            log_msg(LogLevel::info, "rerank: no --embeddings given, using tf-idf fallback");
        }
        similarity.emplace(corpus, store.idf());
    }

    RankingRun result = a.mode == "parallel"
        ? rerank_parallel(models, corpus, run, store, *similarity)
        : rerank_sequential(models, corpus, run, store, *similarity);
    save_run(result, a.out);
    return 0;
}

struct SynthArgs {
    std::uint64_t seed = 0;
    long n_train = 1;
    long n_test = 1;
    long pool = 1;
    int bias = 1;
    double penalty = 0.5;
    double threshold = 0.0;
    bool separate_pool = false;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& a) {
    log_msg(LogLevel::info,
            "synth: seed=" + std::to_string(a.seed) + " n-train=" + std::to_string(a.n_train) +
                " n-test=" + std::to_string(a.n_test) + " pool=" + std::to_string(a.pool) +
                " bias=" + std::to_string(a.bias) + " penalty=" + std::to_string(a.penalty) +
                " threshold=" + std::to_string(a.threshold) + " out=" + a.out_dir);
    SynthSpec spec;
    spec.seed = a.seed;
    spec.n_train = a.n_train;
    spec.n_test = a.n_test;
    spec.pool_size = a.pool;
    spec.planted_bias = a.bias;
    spec.penalty = a.penalty;
    spec.feature_threshold = a.threshold;
    spec.shared_pool = !a.separate_pool;
    SynthOutput out = generate(spec);

    fs::create_directories(a.out_dir);
    fs::path dir(a.out_dir);
    save_dataset(out.corpus, dir / "dataset.jsonl");
    save_run(out.train_run, dir / "train.tsv");
    save_run(out.test_run, dir / "test.tsv");
    save_embeddings(out.embeddings, dir / "emb.tsv");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"audits code search runs for ranking biases and removes them by reranking"};
    app.require_subcommand(1);

    ExtractArgs ex;
    CLI::App* sub_ex = app.add_subcommand("extract-features",
                                          "write per-pair bias features as JSON lines");
    sub_ex->add_option("--dataset", ex.dataset, "dataset JSONL")->required();
    sub_ex->add_option("--split", ex.split, "train, test or all")
        ->check(CLI::IsMember({"train", "test", "all"}));
    sub_ex->add_option("--out", ex.out, "output path, - for stdout");
    sub_ex->add_flag("--strict-ast", ex.strict_ast, "fail when the parser falls back");

    AuditArgs au;
    CLI::App* sub_au = app.add_subcommand("audit", "bucket outcomes by bias value");
    sub_au->add_option("--dataset", au.dataset, "dataset JSONL")->required();
    sub_au->add_option("--run", au.run, "run TSV")->required();
    sub_au->add_option("--split", au.split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    sub_au->add_option("--bias", au.bias, "all or a bias id 1..7");
    sub_au->add_option("--width", au.widths, "bucket width override BIAS=WIDTH, repeatable");
    sub_au->add_option("--out", au.out_dir, "output directory")->required();
    sub_au->add_flag("--strict-ast", au.strict_ast, "fail when the parser falls back");

    EvalArgs ev;
    CLI::App* sub_ev = app.add_subcommand("eval", "mean reciprocal rank and hit rates");
    sub_ev->add_option("--dataset", ev.dataset, "dataset JSONL")->required();
    sub_ev->add_option("--run", ev.run, "run TSV")->required();
    sub_ev->add_option("--split", ev.split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    sub_ev->add_option("--k", ev.ks, "hit rate cutoffs, comma separated");
    sub_ev->add_flag("--json", ev.json_out, "machine readable output");

    FitArgs ft;
    CLI::App* sub_ft = app.add_subcommand("fit", "fit one bias reranker on a train run");
    sub_ft->add_option("--train-dataset", ft.train_dataset, "dataset JSONL")->required();
    sub_ft->add_option("--train-run", ft.train_run, "train run TSV")->required();
    sub_ft->add_option("--bias", ft.bias, "bias id 1..7")->required()->check(CLI::Range(1, 7));
    sub_ft->add_option("--M", ft.top_m, "similar train queries consulted per query")
        ->check(CLI::PositiveNumber);
    sub_ft->add_option("--N", ft.top_n_percent, "top train share defining trust bands, percent")
        ->check(CLI::Range(1e-9, 100.0));
    sub_ft->add_option("--S", ft.n_clusters, "number of trust bands")
        ->check(CLI::PositiveNumber);
    sub_ft->add_option("--width", ft.width, "bias bucket width, 0 for the default")
        ->check(CLI::NonNegativeNumber);
    sub_ft->add_option("--boost-scope", ft.boost_scope, "similar or all")
        ->check(CLI::IsMember({"similar", "all"}));
    sub_ft->add_option("--cluster-space", ft.cluster_space, "mrr or feature-mrr")
        ->check(CLI::IsMember({"mrr", "feature-mrr"}));
    CLI::Option* ft_emb = sub_ft->add_option("--embeddings", ft.embeddings,
                                             "dense query embedding TSV");
    sub_ft->add_flag("--fallback-tfidf", ft.fallback_tfidf, "use tf-idf query similarity")
        ->excludes(ft_emb);
    sub_ft->add_option("--out", ft.out, "model JSON path")->required();

    RerankArgs rr;
    CLI::App* sub_rr = app.add_subcommand("rerank", "apply fitted models to a test run");
    sub_rr->add_option("--models", rr.models, "model JSON paths, comma separated")->required();
    sub_rr->add_option("--mode", rr.mode, "sequential or parallel")
        ->check(CLI::IsMember({"sequential", "parallel"}));
    sub_rr->add_option("--order", rr.order, "bias application order, comma separated");
    sub_rr->add_option("--test-dataset", rr.test_dataset, "dataset JSONL")->required();
    sub_rr->add_option("--test-run", rr.test_run, "test run TSV")->required();
    CLI::Option* rr_emb = sub_rr->add_option("--embeddings", rr.embeddings,
                                             "dense query embedding TSV");
    sub_rr->add_flag("--fallback-tfidf", rr.fallback_tfidf, "use tf-idf query similarity")
        ->excludes(rr_emb);
    sub_rr->add_option("--out", rr.out, "reranked run TSV path")->required();

    SynthArgs sy;
    CLI::App* sub_sy = app.add_subcommand("synth", "generate a benchmark with a planted bias");
    sub_sy->add_option("--seed", sy.seed, "generator seed");
    sub_sy->add_option("--n-train", sy.n_train, "train queries")->check(CLI::PositiveNumber);
    sub_sy->add_option("--n-test", sy.n_test, "test queries")->check(CLI::PositiveNumber);
    sub_sy->add_option("--pool", sy.pool, "candidate pool size")->check(CLI::PositiveNumber);
    sub_sy->add_option("--bias", sy.bias, "planted bias id 1..7")->check(CLI::Range(1, 7));
    sub_sy->add_option("--penalty", sy.penalty, "ground truth score penalty")
        ->check(CLI::NonNegativeNumber);
    sub_sy->add_option("--threshold", sy.threshold, "penalize below this feature value");
    sub_sy->add_flag("--separate-pool", sy.separate_pool,
                     "give the test split its own candidate codes");
    sub_sy->add_option("--out", sy.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sub_ex->parsed()) return cmd_extract_features(ex);
        if (sub_au->parsed()) return cmd_audit(au);
        if (sub_ev->parsed()) return cmd_eval(ev);
        if (sub_ft->parsed()) return cmd_fit(ft);
        if (sub_rr->parsed()) return cmd_rerank(rr);
        if (sub_sy->parsed()) return cmd_synth(sy);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
