#include "rankdebias/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rankdebias/log.hpp"

namespace rankdebias {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double_field(const std::string& field, const std::filesystem::path& path,
                          std::size_t line_no, const char* what) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad " + what + " '" +
                        field + "'");
    }
    if (!std::isfinite(v)) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-finite " + what);
    }
    return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// getline that tolerates \r\n files.
bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace

const char* to_string(Split split) {
    return split == Split::train ? "train" : "test";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw DataError("unknown split '" + s + "' (expected train or test)");
}

std::string canonical_code_id(std::string_view code_text) {
    std::string normalized;
    normalized.reserve(code_text.size());
    std::string line;
    auto flush_line = [&](bool add_newline) {
        std::size_t end = line.size();
        while (end > 0) {
            char c = line[end - 1];
            if (c == ' ' || c == '\t' || c == '\v' || c == '\f') {
                --end;
            } else {
                break;
            }
        }
        normalized.append(line, 0, end);
        if (add_newline) normalized.push_back('\n');
        line.clear();
    };
    for (std::size_t i = 0; i < code_text.size(); ++i) {
        char c = code_text[i];
        if (c == '\r') {
            if (i + 1 < code_text.size() && code_text[i + 1] == '\n') ++i;
            flush_line(true);
        } else if (c == '\n') {
            flush_line(true);
        } else {
            line.push_back(c);
        }
    }
    if (!line.empty()) flush_line(false);

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(normalized.data(), normalized.size(), digest, &digest_len, EVP_sha256(),
                   nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(digest_len * 2);
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

Corpus::Corpus(std::vector<QueryCodePair> pairs) : pairs_(std::move(pairs)) {
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
        QueryCodePair& p = pairs_[i];
        if (p.pair_id.empty()) throw DataError("pair at index " + std::to_string(i) + " has empty pair_id");
        if (!by_id_.emplace(p.pair_id, i).second) {
            throw DataError("duplicate pair_id '" + p.pair_id + "'");
        }
        if (p.query_text.find_first_not_of(" \t\r\n\v\f") == std::string::npos) {
            throw DataError("pair '" + p.pair_id + "' has empty query");
        }
        if (p.code_id.empty()) p.code_id = canonical_code_id(p.code_text);
        auto [it, inserted] = code_by_id_.emplace(p.code_id, i);
        if (!inserted) {
            const std::string& seen = pairs_[it->second].code_text;
            if (canonical_code_id(seen) != canonical_code_id(p.code_text)) {
                throw DataError("code_id '" + p.code_id + "' maps to conflicting code texts");
            }
        }
        (p.split == Split::train ? pool_train_ : pool_test_).insert(p.code_id);
    }
}

const QueryCodePair* Corpus::find(const std::string& pair_id) const {
    auto it = by_id_.find(pair_id);
    return it == by_id_.end() ? nullptr : &pairs_[it->second];
}

std::vector<const QueryCodePair*> Corpus::split_pairs(Split split) const {
    std::vector<const QueryCodePair*> out;
    for (const auto& p : pairs_) {
        if (p.split == split) out.push_back(&p);
    }
    return out;
}

const std::set<std::string>& Corpus::pool(Split split) const {
    return split == Split::train ? pool_train_ : pool_test_;
}

const std::string* Corpus::code_text(const std::string& code_id) const {
    auto it = code_by_id_.find(code_id);
    return it == code_by_id_.end() ? nullptr : &pairs_[it->second].code_text;
}

void sort_candidates(RankingRun::CandidateList& candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const ScoredCode& a, const ScoredCode& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.code_id < b.code_id;
    });
}

RankingRun::RankingRun(std::map<std::string, CandidateList> entries)
    : entries_(std::move(entries)) {
    for (auto& [pair_id, candidates] : entries_) {
        if (candidates.empty()) {
            throw DataError("run entry '" + pair_id + "' has no candidates");
        }
        std::set<std::string> seen;
        for (const ScoredCode& c : candidates) {
            if (!std::isfinite(c.score)) {
                throw DataError("run entry '" + pair_id + "' has a non-finite score");
            }
            if (!seen.insert(c.code_id).second) {
                throw DataError("run entry '" + pair_id + "' lists code_id '" + c.code_id +
                                "' twice");
            }
        }
        sort_candidates(candidates);
    }
}

const RankingRun::CandidateList* RankingRun::find(const std::string& pair_id) const {
    auto it = entries_.find(pair_id);
    return it == entries_.end() ? nullptr : &it->second;
}

Corpus load_dataset(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    std::vector<QueryCodePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (read_line(in, line)) {
        ++line_no;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": not a JSON object");
        }
        QueryCodePair p;
        auto require_string = [&](const char* key) -> std::string {
            if (!obj.contains(key) || !obj[key].is_string()) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": missing string field '" + key + "'");
            }
            return obj[key].get<std::string>();
        };
        p.pair_id = require_string("pair_id");
        p.query_text = require_string("query");
        p.code_text = require_string("code");
        p.split = split_from_string(require_string("split"));
        if (obj.contains("code_id")) {
            if (!obj["code_id"].is_string()) {
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": code_id must be a string");
            }
            p.code_id = obj["code_id"].get<std::string>();
        }
        auto optional_count = [&](const char* key) -> std::optional<long> {
            if (!obj.contains(key)) return std::nullopt;
            if (!obj[key].is_number_integer() || obj[key].get<long>() < 0) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": field '" +
                                key + "' must be a non-negative integer");
            }
            return obj[key].get<long>();
        };
        p.code_len_override = optional_count("code_len");
        p.query_len_override = optional_count("query_len");
        pairs.push_back(std::move(p));
    }
    try {
        return Corpus(std::move(pairs));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_dataset(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const QueryCodePair& p : corpus.pairs()) {
        nlohmann::ordered_json obj;
        obj["pair_id"] = p.pair_id;
        obj["query"] = p.query_text;
        obj["code"] = p.code_text;
        obj["split"] = to_string(p.split);
        obj["code_id"] = p.code_id;
        if (p.code_len_override) obj["code_len"] = *p.code_len_override;
        if (p.query_len_override) obj["query_len"] = *p.query_len_override;
        out << obj.dump() << '\n';
    }
    if (!out) throw DataError("failed while writing " + path.string());
}

RankingRun load_run(const std::filesystem::path& path, const Corpus& corpus, Split split,
                    RunLoadSummary* summary) {
    std::ifstream in = open_input(path);
    std::map<std::string, RankingRun::CandidateList> entries;
    std::set<std::string> unknown;
    std::string line;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    while (read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": blank line");
        }
        std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != 3) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
        }
        const std::string& pair_id = fields[0];
        const std::string& code_id = fields[1];
        double score = parse_double_field(fields[2], path, line_no, "score");
        const QueryCodePair* pair = corpus.find(pair_id);
        if (pair == nullptr) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": pair_id '" +
                            pair_id + "' not in dataset");
        }
        if (pair->split != split) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": pair_id '" +
                            pair_id + "' belongs to split " + to_string(pair->split) +
                            ", expected " + to_string(split));
        }
        if (corpus.code_text(code_id) == nullptr) unknown.insert(code_id);
        entries[pair_id].push_back(ScoredCode{code_id, score});
        ++rows;
    }
    if (!unknown.empty()) {
        log_msg(LogLevel::warn, "run " + path.string() + " references " +
                                    std::to_string(unknown.size()) +
                                    " code_ids absent from the dataset");
    }
    if (summary != nullptr) {
        summary->rows = rows;
        summary->queries = entries.size();
        summary->unknown_codes = unknown.size();
    }
    try {
        return RankingRun(std::move(entries));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_run(const RankingRun& run, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const auto& [pair_id, candidates] : run.entries()) {
        for (const ScoredCode& c : candidates) {
            out << pair_id << '\t' << c.code_id << '\t' << format_double(c.score) << '\n';
        }
    }
    if (!out) throw DataError("failed while writing " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (read_line(in, line)) {
        ++line_no;
        if (line.empty()) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": blank line");
        }
        std::vector<std::string> fields = split_tabs(line);
        if (fields.size() < 2) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected id and at least one component");
        }
        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            vec.push_back(parse_double_field(fields[i], path, line_no, "component"));
        }
        if (table.dim == 0) {
            table.dim = vec.size();
        } else if (vec.size() != table.dim) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": inconsistent dimension (" + std::to_string(vec.size()) + " vs " +
                            std::to_string(table.dim) + ")");
        }
        if (!table.vectors.emplace(fields[0], std::move(vec)).second) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" +
                            fields[0] + "'");
        }
    }
    return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const auto& [id, vec] : table.vectors) {
        out << id;
        for (double v : vec) out << '\t' << format_double(v);
        out << '\n';
    }
    if (!out) throw DataError("failed while writing " + path.string());
}

}  // namespace rankdebias
