#include "bicam/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "bicam/tensor.hpp"

namespace bicam {

namespace {

// relation names are compared case-insensitively with '_'/' ' removed, so
// "RelatedTo", "related_to" and "relatedto" all match
std::string canon_relation(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '_' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

bool is_related_to(const KnowledgeGraph& g, int relation) {
    return canon_relation(g.relation_name(relation)) == "relatedto";
}

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// Step 4 core; returns the indexes of kept triples in order.
std::vector<size_t> dedup_keep_indices(const std::vector<Triple>& ts, const KnowledgeGraph& g,
                                       const RetrievalConfig& cfg, uint64_t salt) {
    std::vector<size_t> kept;
    std::vector<Triple> seen;
    // exact-duplicate removal, order preserved
    for (size_t i = 0; i < ts.size(); ++i) {
        if (std::find(seen.begin(), seen.end(), ts[i]) == seen.end()) {
            seen.push_back(ts[i]);
            kept.push_back(i);
        }
    }
    // one triple per (head, tail) pair, non-RelatedTo preferred, else first seen
    std::vector<size_t> by_pair;
    for (size_t i : kept) {
        bool replaced = false, drop = false;
        for (size_t& j : by_pair) {
            if (ts[j].head != ts[i].head || ts[j].tail != ts[i].tail) continue;
            if (is_related_to(g, ts[j].relation) && !is_related_to(g, ts[i].relation)) {
                j = i;
                replaced = true;
            } else {
                drop = true;
            }
            break;
        }
        if (!replaced && !drop) by_pair.push_back(i);
    }
    std::sort(by_pair.begin(), by_pair.end());
    if (cfg.related_to_scope == RelatedToScope::PerPair) return by_pair;
    // global RelatedTo selection: one seeded uniform pick among all candidates
    std::vector<size_t> related;
    for (size_t i : by_pair)
        if (is_related_to(g, ts[i].relation)) related.push_back(i);
    if (related.size() <= 1) return by_pair;
    std::mt19937_64 rng(mix(cfg.seed, salt));
    std::uniform_int_distribution<size_t> pick(0, related.size() - 1);
    size_t winner = related[pick(rng)];
    std::vector<size_t> out;
    for (size_t i : by_pair)
        if (!is_related_to(g, ts[i].relation) || i == winner) out.push_back(i);
    return out;
}

}  // namespace

const std::unordered_set<std::string>& default_stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
        "any", "are", "aren't", "as", "at", "be", "because", "been", "before", "being",
        "below", "between", "both", "but", "by", "can", "cannot", "could", "couldn't",
        "did", "didn't", "do", "does", "doesn't", "doing", "don't", "down", "during",
        "each", "few", "for", "from", "further", "had", "hadn't", "has", "hasn't",
        "have", "haven't", "having", "he", "her", "here", "hers", "herself", "him",
        "himself", "his", "how", "i", "if", "in", "into", "is", "isn't", "it", "its",
        "itself", "just", "me", "more", "most", "mustn't", "my", "myself", "no", "nor",
        "not", "now", "of", "off", "on", "once", "only", "or", "other", "ought", "our",
        "ours", "ourselves", "out", "over", "own", "same", "shan't", "she", "should",
        "shouldn't", "so", "some", "such", "than", "that", "the", "their", "theirs",
        "them", "themselves", "then", "there", "these", "they", "this", "those",
        "through", "to", "too", "under", "until", "up", "very", "was", "wasn't", "we",
        "were", "weren't", "what", "when", "where", "which", "while", "who", "whom",
        "why", "will", "with", "won't", "would", "wouldn't", "you", "your", "yours",
        "yourself", "yourselves"};
    return words;
}

const std::unordered_set<std::string>& RetrievalConfig::effective_stopwords() const {
    return stopwords.empty() ? default_stopwords() : stopwords;
}

uint64_t sentence_hash(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

TokenizedSentence remove_stopwords(const std::string& sentence, const RetrievalConfig& cfg) {
    const auto& stop = cfg.effective_stopwords();
    TokenizedSentence out;
    std::string word;
    auto flush = [&] {
        if (!word.empty() && stop.find(word) == stop.end()) out.tokens.push_back(word);
        word.clear();
    };
    for (char c : sentence) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            flush();
        } else if (std::ispunct(uc)) {
            continue;  // strip ASCII punctuation
        } else {
            word.push_back(static_cast<char>(std::tolower(uc)));
        }
    }
    flush();
    return out;
}

std::vector<Triple> intra_sentence_triples(const TokenizedSentence& s, const KnowledgeGraph& g) {
    std::vector<Triple> out;
    for (size_t i = 0; i < s.tokens.size(); ++i)
        for (size_t j = 0; j < s.tokens.size(); ++j) {
            if (i == j) continue;
            for (const Triple& t : g.lookup_pair(s.tokens[i], s.tokens[j]))
                if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
        }
    return out;
}

std::vector<Triple> cross_sentence_triples(const TokenizedSentence& src,
                                           const TokenizedSentence& dst,
                                           const KnowledgeGraph& g) {
    std::vector<Triple> out;
    for (const std::string& h : src.tokens)
        for (const std::string& t : dst.tokens)
            for (const Triple& tri : g.lookup_pair(h, t))
                if (std::find(out.begin(), out.end(), tri) == out.end()) out.push_back(tri);
    return out;
}

std::vector<Triple> dedup_related_to(const std::vector<Triple>& ts, const KnowledgeGraph& g,
                                     const RetrievalConfig& cfg, uint64_t salt) {
    std::vector<Triple> out;
    for (size_t i : dedup_keep_indices(ts, g, cfg, salt)) out.push_back(ts[i]);
    return out;
}

std::vector<Triple> fallback_retrieve(const TokenizedSentence& s, const KnowledgeGraph& g,
                                      const RetrievalConfig& cfg, uint64_t salt) {
    if (s.tokens.empty()) return {};
    std::vector<size_t> order(s.tokens.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(mix(cfg.seed, salt ^ 0x5fa11bacULL));
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i : order) {
        auto head = g.entity_id(s.tokens[i]);
        if (!head) continue;
        std::vector<Triple> candidates = g.lookup_head(*head);
        for (const std::string& rel : cfg.fallback_relations) {
            std::string want = canon_relation(rel);
            for (const Triple& t : candidates)
                if (canon_relation(g.relation_name(t.relation)) == want) return {t};
        }
    }
    return {};
}

namespace {

TripleSet retrieve_for_sentence(const TokenizedSentence& self, const TokenizedSentence& other,
                                const KnowledgeGraph& g, const RetrievalConfig& cfg,
                                uint64_t salt) {
    std::vector<Triple> all = intra_sentence_triples(self, g);
    size_t intra_count = all.size();
    for (const Triple& t : cross_sentence_triples(self, other, g)) all.push_back(t);

    TripleSet out;
    for (size_t i : dedup_keep_indices(all, g, cfg, salt)) {
        if (static_cast<int>(out.triples.size()) >= cfg.max_triples) break;
        out.triples.push_back(all[i]);
        out.provenance.push_back(i < intra_count ? TripleProvenance::Intra
                                                 : TripleProvenance::Cross);
    }
    if (out.triples.empty()) {
        for (const Triple& t : fallback_retrieve(self, g, cfg, salt)) {
            if (static_cast<int>(out.triples.size()) >= cfg.max_triples) break;
            out.triples.push_back(t);
            out.provenance.push_back(TripleProvenance::Fallback);
        }
    }
    return out;
}

}  // namespace

std::pair<TripleSet, TripleSet> retrieve_for_pair(const std::string& premise,
                                                  const std::string& hypothesis,
                                                  const KnowledgeGraph& g,
                                                  const RetrievalConfig& cfg) {
    if (cfg.max_triples < 1) throw UsageError("max_triples must be >= 1");
    TokenizedSentence p = remove_stopwords(premise, cfg);
    TokenizedSentence h = remove_stopwords(hypothesis, cfg);
    TripleSet ps = retrieve_for_sentence(p, h, g, cfg, sentence_hash(premise));
    TripleSet hs = retrieve_for_sentence(h, p, g, cfg, sentence_hash(hypothesis));
    return {std::move(ps), std::move(hs)};
}

}  // namespace bicam
