#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "bicam/kg.hpp"

namespace bicam {

struct TokenizedSentence {
    std::vector<std::string> tokens;  // lowercased, punctuation-stripped, stop words removed
};

enum class RelatedToScope { Global, PerPair };

struct RetrievalConfig {
    int max_triples = 7;
    uint64_t seed = 0;
    std::unordered_set<std::string> stopwords;  // empty -> bundled default list
    std::vector<std::string> fallback_relations = {"entails", "synonym", "antonym"};
    RelatedToScope related_to_scope = RelatedToScope::Global;

    const std::unordered_set<std::string>& effective_stopwords() const;
};

enum class TripleProvenance { Intra, Cross, Fallback };

struct TripleSet {
    std::vector<Triple> triples;
    std::vector<TripleProvenance> provenance;  // parallel to triples

    size_t size() const { return triples.size(); }
    bool empty() const { return triples.empty(); }
};

const std::unordered_set<std::string>& default_stopwords();

TokenizedSentence remove_stopwords(const std::string& sentence, const RetrievalConfig& cfg);

// All triples (head = w_i, tail = w_j) over ordered token pairs i != j,
// in (i asc, j asc) pair order, exact duplicates removed.
std::vector<Triple> intra_sentence_triples(const TokenizedSentence& s, const KnowledgeGraph& g);

// All triples with head in src and tail in dst, in (src, dst) pair order.
std::vector<Triple> cross_sentence_triples(const TokenizedSentence& src,
                                           const TokenizedSentence& dst,
                                           const KnowledgeGraph& g);

// Step 4: drop exact duplicates, keep one triple per (head, tail) pair
// (non-RelatedTo preferred, else first seen), then keep a single seeded
// uniform choice among any remaining RelatedTo triples.
std::vector<Triple> dedup_related_to(const std::vector<Triple>& ts, const KnowledgeGraph& g,
                                     const RetrievalConfig& cfg, uint64_t salt = 0);

// Step 5: seeded random token order; for each token the first fallback
// relation (in configured order) with a matching head-triple wins.
std::vector<Triple> fallback_retrieve(const TokenizedSentence& s, const KnowledgeGraph& g,
                                      const RetrievalConfig& cfg, uint64_t salt = 0);

std::pair<TripleSet, TripleSet> retrieve_for_pair(const std::string& premise,
                                                  const std::string& hypothesis,
                                                  const KnowledgeGraph& g,
                                                  const RetrievalConfig& cfg);

uint64_t sentence_hash(const std::string& s);

}  // namespace bicam
