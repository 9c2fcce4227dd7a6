#include "rankdebias/synth.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <utility>

#include "rankdebias/features.hpp"

namespace rankdebias {

namespace {

constexpr std::uint64_t kLcgMul = 6364136223846793005ULL;
constexpr std::uint64_t kLcgInc = 1442695040888963407ULL;

const char* const kStems[] = {
    "sort", "read", "file", "list", "merge", "parse", "node", "tree", "path", "text",
    "byte", "word", "rank", "code", "query", "item", "user", "data", "key", "hash",
};

const char* const kSuffixes[] = {
    "", "er", "ing", "ed", "s", "or", "set", "map", "idx", "ful",
};

std::string format_id(const char* prefix, long i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%05ld", prefix, i);
    return buf;
}

// One generated snippet plus the vocabulary words woven into it, so the
// paired query can share some of them.
struct MadeCode {
    std::string text;
    std::vector<std::string> words;
};

class Maker {
public:
    explicit Maker(Lcg& rng) : rng_(rng) {}

    const std::string& pick_word() {
        return synth_vocabulary()[rng_.next_below(synth_vocabulary().size())];
    }

    // idx is woven into the function name so every snippet has distinct
    // text, hence a distinct content digest.
    MadeCode make_code(long idx) {
        MadeCode out;
        const std::string& name_word = pick_word();
        out.words.push_back(name_word);
        std::string header = "def fn_" + name_word + "_" + std::to_string(idx) + "(";

        bool short_code = rng_.next_below(100) < 45;
        if (short_code) {
            // 6 or 7 tokens, well under typical length thresholds.
            out.text = header + "):\n";
            if (rng_.next_below(2) == 0) {
                out.text += "    pass\n";
            } else {
                out.text += "    return " + std::to_string(rng_.next_below(100)) + "\n";
            }
            return out;
        }

        long n_params = static_cast<long>(rng_.next_below(3));
        for (long p = 0; p < n_params; ++p) {
            const std::string& w = pick_word();
            out.words.push_back(w);
            if (p > 0) header += ", ";
            header += "p" + std::to_string(p) + "_" + w;
        }
        out.text = header + "):\n";

        long n_blocks = 1 + static_cast<long>(rng_.next_below(8));
        for (long b = 0; b < n_blocks; ++b) {
            out.text += make_block(out);
        }
        const std::string& ret = pick_word();
        out.words.push_back(ret);
        out.text += "    return " + ret + "\n";
        return out;
    }

    std::string make_query(const std::vector<std::string>& code_words) {
        long n_words = 3 + static_cast<long>(rng_.next_below(6));
        long n_shared = static_cast<long>(rng_.next_below(3));
        if (n_shared > static_cast<long>(code_words.size())) {
            n_shared = static_cast<long>(code_words.size());
        }
        if (n_shared > n_words) n_shared = n_words;

        std::string q;
        for (long i = 0; i < n_words; ++i) {
            const std::string& w = i < n_shared
                ? code_words[rng_.next_below(code_words.size())]
                : pick_word();
            if (!q.empty()) q += ' ';
            q += w;
        }
        return q;
    }

private:
    std::string make_block(MadeCode& out) {
        const std::string& w1 = pick_word();
        const std::string& w2 = pick_word();
        out.words.push_back(w1);
        out.words.push_back(w2);
        std::string k = std::to_string(rng_.next_below(100));
        switch (rng_.next_below(7)) {
            case 0: return "    if " + w1 + ":\n        " + w2 + " = " + k + "\n";
            case 1: return "    for " + w1 + " in " + w2 + ":\n        pass\n";
            case 2: return "    while " + w1 + ":\n        break\n";
            case 3:
                return "    try:\n        " + w1 + " = " + k +
                       "\n    except Exception:\n        pass\n";
            case 4: return "    with " + w1 + " as " + w2 + ":\n        pass\n";
            case 5: return "    " + w1 + "_" + w2 + " = " + k + "\n";
            default: return "    " + w1 + " = " + w2 + "\n";
        }
    }

    Lcg& rng_;
};

void shuffle_words(std::vector<std::string>& words, Lcg& rng) {
    for (std::size_t i = words.size(); i > 1; --i) {
        std::size_t j = rng.next_below(i);
        std::swap(words[i - 1], words[j]);
    }
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

}  // namespace

std::uint64_t Lcg::next() {
    state_ = state_ * kLcgMul + kLcgInc;
    return state_;
}

double Lcg::next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Lcg::next_below(std::uint64_t n) {
    // Lemire's unbiased multiply-shift rejection method.
    std::uint64_t x = next();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    std::uint64_t lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
        std::uint64_t threshold = (0 - n) % n;
        while (lo < threshold) {
            x = next();
            m = static_cast<unsigned __int128>(x) * n;
            lo = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

const std::vector<std::string>& synth_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        std::vector<std::string> v;
        for (const char* stem : kStems) {
            for (const char* suffix : kSuffixes) {
                v.push_back(std::string(stem) + suffix);
            }
        }
        return v;
    }();
    return vocab;
}

SynthOutput generate(const SynthSpec& spec) {
    if (spec.n_train < 1) throw DataError("synth: n_train must be at least 1");
    if (spec.n_test < 1) throw DataError("synth: n_test must be at least 1");
    if (spec.pool_size < 1) throw DataError("synth: pool size must be at least 1");
    if (spec.planted_bias < 1 || spec.planted_bias > kNumBiases) {
        throw DataError("synth: planted bias must be between 1 and 7");
    }
    if (!(spec.penalty >= 0.0) || !std::isfinite(spec.penalty)) {
        throw DataError("synth: penalty must be a finite non-negative number");
    }
    if (!std::isfinite(spec.feature_threshold)) {
        throw DataError("synth: feature threshold must be finite");
    }
    if (spec.embedding_dim < 1) throw DataError("synth: embedding dim must be at least 1");

    Lcg rng(spec.seed);
    Maker maker(rng);

    std::vector<MadeCode> pool;
    pool.reserve(static_cast<std::size_t>(spec.pool_size));
    for (long j = 0; j < spec.pool_size; ++j) {
        pool.push_back(maker.make_code(j));
    }

    std::vector<std::string> train_queries;
    train_queries.reserve(static_cast<std::size_t>(spec.n_train));
    for (long i = 0; i < spec.n_train; ++i) {
        const MadeCode& gt = pool[static_cast<std::size_t>(i % spec.pool_size)];
        train_queries.push_back(maker.make_query(gt.words));
    }

    std::vector<long> twin_of(static_cast<std::size_t>(spec.n_test), 0);
    std::vector<MadeCode> test_codes;  // only used when the pool is not shared
    std::vector<std::string> test_queries;
    test_queries.reserve(static_cast<std::size_t>(spec.n_test));
    for (long j = 0; j < spec.n_test; ++j) {
        long t = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(spec.n_train)));
        twin_of[static_cast<std::size_t>(j)] = t;
        if (!spec.shared_pool) {
            test_codes.push_back(maker.make_code(spec.pool_size + j));
        }
        std::vector<std::string> words = tokenize_query(train_queries[static_cast<std::size_t>(t)]);
        shuffle_words(words, rng);
        test_queries.push_back(join_words(words));
    }

    std::vector<QueryCodePair> pairs;
    pairs.reserve(static_cast<std::size_t>(spec.n_train + spec.n_test));
    for (long i = 0; i < spec.n_train; ++i) {
        QueryCodePair p;
        p.pair_id = format_id("tr", i);
        p.query_text = train_queries[static_cast<std::size_t>(i)];
        p.code_text = pool[static_cast<std::size_t>(i % spec.pool_size)].text;
        p.split = Split::train;
        pairs.push_back(std::move(p));
    }
    for (long j = 0; j < spec.n_test; ++j) {
        QueryCodePair p;
        p.pair_id = format_id("te", j);
        p.query_text = test_queries[static_cast<std::size_t>(j)];
        long twin = twin_of[static_cast<std::size_t>(j)];
        p.code_text = spec.shared_pool
            ? pool[static_cast<std::size_t>(twin % spec.pool_size)].text
            : test_codes[static_cast<std::size_t>(j)].text;
        p.split = Split::test;
        pairs.push_back(std::move(p));
    }

    SynthOutput out;
    out.corpus = Corpus(std::move(pairs));
    FeatureStore store = FeatureStore::build(out.corpus);

    std::vector<std::string> pool_ids;
    pool_ids.reserve(pool.size());
    for (const MadeCode& c : pool) pool_ids.push_back(canonical_code_id(c.text));
    std::vector<std::string> test_code_ids;
    for (const MadeCode& c : test_codes) test_code_ids.push_back(canonical_code_id(c.text));

    auto planted_score = [&](const QueryCodePair& pair) {
        double v = bias_value(store.pair_features(pair), spec.planted_bias);
        return v < spec.feature_threshold ? 1.0 - spec.penalty : 1.0;
    };

    std::map<std::string, RankingRun::CandidateList> train_entries;
    for (long i = 0; i < spec.n_train; ++i) {
        const QueryCodePair& pair = *out.corpus.find(format_id("tr", i));
        RankingRun::CandidateList cands;
        cands.reserve(pool_ids.size());
        for (long j = 0; j < spec.pool_size; ++j) {
            const std::string& cid = pool_ids[static_cast<std::size_t>(j)];
            double score = cid == pair.code_id ? planted_score(pair) : rng.next_double() * 0.9;
            cands.push_back({cid, score});
        }
        train_entries.emplace(pair.pair_id, std::move(cands));
    }
    out.train_run = RankingRun(std::move(train_entries));

    std::map<std::string, RankingRun::CandidateList> test_entries;
    const std::vector<std::string>& test_pool = spec.shared_pool ? pool_ids : test_code_ids;
    for (long j = 0; j < spec.n_test; ++j) {
        const QueryCodePair& pair = *out.corpus.find(format_id("te", j));
        RankingRun::CandidateList cands;
        cands.reserve(test_pool.size());
        for (const std::string& cid : test_pool) {
            double score = cid == pair.code_id ? planted_score(pair) : rng.next_double() * 0.9;
            cands.push_back({cid, score});
        }
        test_entries.emplace(pair.pair_id, std::move(cands));
    }
    out.test_run = RankingRun(std::move(test_entries));

    out.embeddings.dim = spec.embedding_dim;
    for (long i = 0; i < spec.n_train; ++i) {
        std::vector<double> v(spec.embedding_dim);
        for (double& x : v) x = rng.next_double();
        out.embeddings.vectors.emplace(format_id("tr", i), std::move(v));
    }
    for (long j = 0; j < spec.n_test; ++j) {
        // Exact copy: the twin is this query's nearest train neighbour.
        const std::vector<double>& twin_vec =
            out.embeddings.vectors.at(format_id("tr", twin_of[static_cast<std::size_t>(j)]));
        out.embeddings.vectors.emplace(format_id("te", j), twin_vec);
    }

    return out;
}

}  // namespace rankdebias
