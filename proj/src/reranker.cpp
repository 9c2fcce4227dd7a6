#include "rankdebias/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "rankdebias/audit.hpp"
#include "rankdebias/clustering.hpp"
#include "rankdebias/log.hpp"

namespace rankdebias {

const char* to_string(BoostScope scope) {
    return scope == BoostScope::similar ? "similar" : "all";
}

const char* to_string(ClusterSpace space) {
    return space == ClusterSpace::mrr ? "mrr" : "feature-mrr";
}

BoostScope boost_scope_from_string(const std::string& s) {
    if (s == "similar") return BoostScope::similar;
    if (s == "all") return BoostScope::all;
    throw DataError("unknown boost scope '" + s + "' (expected similar or all)");
}

ClusterSpace cluster_space_from_string(const std::string& s) {
    if (s == "mrr") return ClusterSpace::mrr;
    if (s == "feature-mrr") return ClusterSpace::feature_mrr;
    throw DataError("unknown cluster space '" + s + "' (expected mrr or feature-mrr)");
}

namespace {

// z-scores with the population standard deviation; a constant column maps
// to all zeros instead of dividing by ~0
std::vector<double> zscore(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    bool constant = std::all_of(values.begin(), values.end(),
                                [&](double v) { return v == values.front(); });
    std::vector<double> out(values.size(), 0.0);
    if (constant) return out;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / n);
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

}  // namespace

RerankerModel fit_reranker(const Corpus& corpus, const RankingRun& train_run,
                           FeatureStore& features, int bias_id, RerankerParams params) {
    if (bias_id < 1 || bias_id > kNumBiases) {
        throw DataError("bias_id must be between 1 and 7, got " + std::to_string(bias_id));
    }
    if (params.top_m == 0) throw DataError("top_m must be at least 1");
    if (!(params.top_n_percent > 0.0) || params.top_n_percent > 100.0) {
        throw DataError("top_n_percent must be in (0, 100]");
    }
    if (params.n_clusters == 0) throw DataError("n_clusters must be at least 1");
    if (params.width == 0.0) params.width = default_interval_width(bias_id);
    if (!(params.width > 0.0)) throw DataError("interval width must be positive");

    PerCaseResult per_case = per_case_mrr(train_run, corpus, Split::train);
    if (per_case.outcomes.empty()) {
        throw DataError("no usable training cases: every ground truth is missing from the run");
    }
    const std::size_t n = per_case.outcomes.size();

    RerankerModel model;
    model.bias_id = bias_id;
    model.params = params;

    double sum = 0.0;
    for (const auto& [pair_id, outcome] : per_case.outcomes) sum += outcome.reciprocal;
    model.t_m = sum / static_cast<double>(n);

    std::size_t below = 0;
    for (const auto& [pair_id, outcome] : per_case.outcomes) {
        if (outcome.reciprocal < model.t_m) ++below;
    }
    model.boost = static_cast<double>(below) / static_cast<double>(n);

    // trusted bands: cluster the best-performing slice of training cases
    std::size_t selection = static_cast<std::size_t>(
        std::ceil(params.top_n_percent * static_cast<double>(n) / 100.0));
    if (selection < params.n_clusters) {
        throw DataError("top " + std::to_string(selection) +
                        " cases cannot fill " + std::to_string(params.n_clusters) + " clusters");
    }
    std::vector<std::pair<std::string, double>> by_mrr;
    by_mrr.reserve(n);
    for (const auto& [pair_id, outcome] : per_case.outcomes) {
        by_mrr.emplace_back(pair_id, outcome.reciprocal);
    }
    std::sort(by_mrr.begin(), by_mrr.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    by_mrr.resize(selection);

    std::vector<std::vector<double>> points;
    points.reserve(selection);
    if (params.space == ClusterSpace::mrr) {
        for (const auto& [pair_id, reciprocal] : by_mrr) {
            points.push_back({reciprocal});
        }
    } else {
        std::vector<double> feat;
        std::vector<double> mrr;
        for (const auto& [pair_id, reciprocal] : by_mrr) {
            const QueryCodePair* pair = corpus.find(pair_id);
            feat.push_back(bias_value(features.pair_features(*pair), bias_id));
            mrr.push_back(reciprocal);
        }
        std::vector<double> zf = zscore(feat);
        std::vector<double> zm = zscore(mrr);
        for (std::size_t i = 0; i < selection; ++i) points.push_back({zf[i], zm[i]});
    }
    KmeansParams km;
    km.k = params.n_clusters;
    KmeansResult clusters = kmeans(points, km);
    std::vector<MrrBand> bands(params.n_clusters,
                               MrrBand{std::numeric_limits<double>::infinity(),
                                       -std::numeric_limits<double>::infinity()});
    for (std::size_t i = 0; i < selection; ++i) {
        MrrBand& band = bands[clusters.assignment[i]];
        band.lo = std::min(band.lo, by_mrr[i].second);
        band.hi = std::max(band.hi, by_mrr[i].second);
    }
    std::sort(bands.begin(), bands.end(), [](const MrrBand& a, const MrrBand& b) {
        if (a.lo != b.lo) return a.lo < b.lo;
        return a.hi < b.hi;
    });
    model.bands = std::move(bands);

    // disadvantaged buckets: histogram the bias value of every training
    // case, merge thin buckets into their nearest well-supported anchor,
    // and flag the groups whose mean reciprocal rank trails t_m
    struct Bucket {
        std::size_t count = 0;
        double sum = 0.0;
    };
    std::map<long, Bucket> buckets;
    for (const auto& [pair_id, outcome] : per_case.outcomes) {
        const QueryCodePair* pair = corpus.find(pair_id);
        double value = bias_value(features.pair_features(*pair), bias_id);
        Bucket& b = buckets[interval_index(value, params.width)];
        ++b.count;
        b.sum += outcome.reciprocal;
    }
    std::vector<long> anchors;
    for (const auto& [idx, bucket] : buckets) {
        if (bucket.count >= params.min_support) anchors.push_back(idx);
    }
    if (anchors.empty()) {
        long best_idx = buckets.begin()->first;
        std::size_t best_count = buckets.begin()->second.count;
        for (const auto& [idx, bucket] : buckets) {
            if (bucket.count > best_count) {
                best_count = bucket.count;
                best_idx = idx;
            }
        }
        anchors.push_back(best_idx);
    }
    std::map<long, Bucket> groups;  // anchor -> merged stats
    std::map<long, long> anchor_of;
    for (const auto& [idx, bucket] : buckets) {
        long nearest = anchors.front();
        long nearest_dist = std::abs(idx - nearest);
        for (long a : anchors) {
            long dist = std::abs(idx - a);
            if (dist < nearest_dist) {
                nearest_dist = dist;
                nearest = a;
            }
        }
        anchor_of[idx] = nearest;
        Bucket& g = groups[nearest];
        g.count += bucket.count;
        g.sum += bucket.sum;
    }
    for (const auto& [idx, anchor] : anchor_of) {
        const Bucket& g = groups[anchor];
        if (g.sum / static_cast<double>(g.count) < model.t_m) {
            model.disadvantaged.insert(idx);
        }
    }

    for (const auto& [pair_id, outcome] : per_case.outcomes) {
        model.train_mrr[pair_id] = outcome.reciprocal;
        model.train_gt[pair_id] = corpus.find(pair_id)->code_id;
    }
    if (!per_case.excluded.empty()) {
        log_msg(LogLevel::info, "fit: " + std::to_string(per_case.excluded.size()) +
                                    " training pairs had no ground truth in the run");
    }
    return model;
}

bool gate_skips(const RerankerModel& model, double avg_similar_mrr) {
    for (const MrrBand& band : model.bands) {
        if (avg_similar_mrr >= band.lo && avg_similar_mrr <= band.hi) return true;
    }
    return false;
}

BoostVector compute_boosts(const RerankerModel& model, const Corpus& corpus,
                           const RankingRun& run, FeatureStore& features,
                           const QuerySimilarity& similarity) {
    BoostVector bv;
    bv.bias_id = model.bias_id;
    bv.amount = model.boost;
    std::vector<std::string> universe;
    universe.reserve(model.train_mrr.size());
    for (const auto& [pair_id, reciprocal] : model.train_mrr) universe.push_back(pair_id);

    for (const auto& [pair_id, candidates] : run.entries()) {
        const QueryCodePair* pair = corpus.find(pair_id);
        if (pair == nullptr) throw DataError("run pair '" + pair_id + "' not in dataset");

        std::vector<std::string> similar = similarity.top_m(*pair, model.params.top_m, universe);
        double avg = 0.0;
        for (const std::string& id : similar) avg += model.train_mrr.at(id);
        avg /= static_cast<double>(similar.size());
        if (gate_skips(model, avg)) continue;

        std::set<std::string> allowed;
        if (model.params.scope == BoostScope::similar) {
            for (const std::string& id : similar) allowed.insert(model.train_gt.at(id));
        }
        std::set<std::string> hit;
        for (const ScoredCode& c : candidates) {
            if (model.params.scope == BoostScope::similar && allowed.count(c.code_id) == 0) {
                continue;
            }
            if (!features.code_known(c.code_id)) continue;  // no text, no features
            double value = features.candidate_bias_value(*pair, c.code_id, model.bias_id);
            if (model.disadvantaged.count(interval_index(value, model.params.width)) > 0) {
                hit.insert(c.code_id);
            }
        }
        if (!hit.empty()) bv.boosted.emplace(pair_id, std::move(hit));
    }
    return bv;
}

RankingRun apply_boosts(const RankingRun& run, const std::vector<BoostVector>& boosts,
                        double scale) {
    std::map<std::string, RankingRun::CandidateList> entries = run.entries();
    for (auto& [pair_id, candidates] : entries) {
        for (ScoredCode& c : candidates) {
            double total = 0.0;
            for (const BoostVector& bv : boosts) {
                auto it = bv.boosted.find(pair_id);
                if (it != bv.boosted.end() && it->second.count(c.code_id) > 0) {
                    total += bv.amount;
                }
            }
            c.score += scale * total;
        }
    }
    return RankingRun(std::move(entries));
}

RankingRun rerank_sequential(const std::vector<RerankerModel>& models, const Corpus& corpus,
                             const RankingRun& run, FeatureStore& features,
                             const QuerySimilarity& similarity,
                             std::vector<BoostVector>* boosts_out) {
    RankingRun current = run;
    for (const RerankerModel& model : models) {
        BoostVector bv = compute_boosts(model, corpus, current, features, similarity);
        current = apply_boosts(current, {bv}, 1.0);
        if (boosts_out != nullptr) boosts_out->push_back(std::move(bv));
    }
    return current;
}

RankingRun rerank_parallel(const std::vector<RerankerModel>& models, const Corpus& corpus,
                           const RankingRun& run, FeatureStore& features,
                           const QuerySimilarity& similarity,
                           std::vector<BoostVector>* boosts_out) {
    if (models.empty()) return run;
    std::vector<BoostVector> boosts;
    for (const RerankerModel& model : models) {
        boosts.push_back(compute_boosts(model, corpus, run, features, similarity));
    }
    RankingRun result = apply_boosts(run, boosts, 1.0 / static_cast<double>(models.size()));
    if (boosts_out != nullptr) *boosts_out = std::move(boosts);
    return result;
}

namespace {

nlohmann::ordered_json params_to_json(const RerankerParams& p) {
    nlohmann::ordered_json j;
    j["M"] = p.top_m;
    j["N"] = p.top_n_percent;
    j["S"] = p.n_clusters;
    j["width"] = p.width;
    j["min_support"] = p.min_support;
    j["boost_scope"] = to_string(p.scope);
    j["cluster_space"] = to_string(p.space);
    return j;
}

RerankerParams params_from_json(const nlohmann::json& j) {
    RerankerParams p;
    p.top_m = j.at("M").get<std::size_t>();
    p.top_n_percent = j.at("N").get<double>();
    p.n_clusters = j.at("S").get<std::size_t>();
    p.width = j.at("width").get<double>();
    p.min_support = j.at("min_support").get<std::size_t>();
    p.scope = boost_scope_from_string(j.at("boost_scope").get<std::string>());
    p.space = cluster_space_from_string(j.at("cluster_space").get<std::string>());
    return p;
}

}  // namespace

void save_model(const RerankerModel& model, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format_version"] = model.format_version;
    j["bias_id"] = model.bias_id;
    j["T_m"] = model.t_m;
    j["P"] = model.boost;
    nlohmann::ordered_json bands = nlohmann::ordered_json::array();
    for (const MrrBand& band : model.bands) {
        bands.push_back(nlohmann::ordered_json::array({band.lo, band.hi}));
    }
    j["bands"] = std::move(bands);
    j["disadvantaged"] = model.disadvantaged;
    j["params"] = params_to_json(model.params);
    j["train_mrr"] = model.train_mrr;
    j["train_gt"] = model.train_gt;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("failed while writing " + path.string());
}

RerankerModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw DataError(path.string() + ": not a JSON object");
    }
    try {
        RerankerModel model;
        model.format_version = j.at("format_version").get<int>();
        if (model.format_version != 1) {
            throw DataError(path.string() + ": unsupported format_version " +
                            std::to_string(model.format_version));
        }
        model.bias_id = j.at("bias_id").get<int>();
        if (model.bias_id < 1 || model.bias_id > kNumBiases) {
            throw DataError(path.string() + ": bias_id out of range");
        }
        model.t_m = j.at("T_m").get<double>();
        model.boost = j.at("P").get<double>();
        for (const auto& band : j.at("bands")) {
            if (!band.is_array() || band.size() != 2) {
                throw DataError(path.string() + ": bands must be [lo, hi] pairs");
            }
            model.bands.push_back(MrrBand{band[0].get<double>(), band[1].get<double>()});
        }
        for (const auto& idx : j.at("disadvantaged")) {
            model.disadvantaged.insert(idx.get<long>());
        }
        model.params = params_from_json(j.at("params"));
        model.train_mrr =
            j.at("train_mrr").get<std::map<std::string, double>>();
        model.train_gt =
            j.at("train_gt").get<std::map<std::string, std::string>>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace rankdebias
