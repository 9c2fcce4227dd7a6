#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rankdebias/corpus.hpp"

namespace rankdebias {

// Recipe for a generated benchmark. The planted bias demotes ground-truth
// scores whose feature value sits below the threshold, so the run looks
// like a model that underperforms on that feature region.
struct SynthSpec {
    std::uint64_t seed = 0;
    long n_train = 1;
    long n_test = 1;
    long pool_size = 1;
    int planted_bias = 1;
    double penalty = 0.5;
    double feature_threshold = 0.0;
    bool shared_pool = true;
    std::size_t embedding_dim = 8;
};

struct SynthOutput {
    Corpus corpus;
    RankingRun train_run;
    RankingRun test_run;
    EmbeddingTable embeddings;
};

// Deterministic 64-bit linear congruential generator, Knuth's MMIX
// multiplier/increment. Fixed-width arithmetic keeps output identical
// across platforms.
class Lcg {
public:
    explicit Lcg(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();
    double next_double();               // uniform in [0, 1), 53-bit mantissa
    std::uint64_t next_below(std::uint64_t n);  // uniform in [0, n)

private:
    std::uint64_t state_;
};

// The 200-word vocabulary queries and identifiers draw from.
const std::vector<std::string>& synth_vocabulary();

// Builds the corpus, both runs, and the embedding table from the spec.
// Every test query is a shuffled twin of a random train query and copies
// its embedding vector, so nearest-neighbour lookups find the twin.
SynthOutput generate(const SynthSpec& spec);

}  // namespace rankdebias
