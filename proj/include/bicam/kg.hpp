#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace bicam {

struct Triple {
    int head;
    int relation;
    int tail;

    friend bool operator==(const Triple&, const Triple&) = default;
};

// Interned triple store with pair/head/tail indexes. Immutable once built;
// concurrent reads are safe.
class KnowledgeGraph {
public:
    // `normalize`: lowercase + underscore -> space before interning.
    // `skip_first_field`: accept 4-field ConceptNet assertion exports.
    static KnowledgeGraph ingest_tsv(const std::string& path, bool normalize = true,
                                     bool skip_first_field = false);
    static KnowledgeGraph from_triples(const std::vector<std::array<std::string, 3>>& rows,
                                       bool normalize = true);

    const std::vector<Triple>& triples() const { return triples_; }
    size_t num_entities() const { return entity_names_.size(); }
    size_t num_relations() const { return relation_names_.size(); }
    bool normalized() const { return normalize_; }

    const std::string& entity_name(int id) const { return entity_names_.at(static_cast<size_t>(id)); }
    const std::string& relation_name(int id) const { return relation_names_.at(static_cast<size_t>(id)); }

    std::optional<int> entity_id(const std::string& word) const;
    std::optional<int> relation_id(const std::string& name) const;
    bool contains_entity(const std::string& word) const { return entity_id(word).has_value(); }
    bool contains(const Triple& t) const;

    std::vector<Triple> lookup_pair(const std::string& head, const std::string& tail) const;
    std::vector<Triple> lookup_pair(int head, int tail) const;
    std::vector<Triple> lookup_head(int head) const;
    std::vector<Triple> lookup_tail(int tail) const;

    std::array<std::string, 3> names(const Triple& t) const;

    std::string normalize_concept(const std::string& s) const;

    friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
        return a.triples_ == b.triples_ && a.entity_names_ == b.entity_names_ &&
               a.relation_names_ == b.relation_names_;
    }

private:
    int intern_entity(const std::string& s);
    int intern_relation(const std::string& s);
    void add_triple(const std::string& h, const std::string& r, const std::string& t);

    bool normalize_ = true;
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, int> entity_ids_;
    std::unordered_map<std::string, int> relation_ids_;
    std::vector<Triple> triples_;
    std::unordered_map<int64_t, std::vector<int>> by_pair_;  // (head<<32)|tail
    std::unordered_map<int, std::vector<int>> by_head_;
    std::unordered_map<int, std::vector<int>> by_tail_;
    std::unordered_map<int64_t, std::vector<int>> dedup_;  // (head,tail) -> indexes, relation checked
};

}  // namespace bicam
