#include "bicam/kg.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "bicam/tensor.hpp"

namespace bicam {

namespace {

int64_t pair_key(int head, int tail) {
    return (static_cast<int64_t>(head) << 32) | static_cast<uint32_t>(tail);
}

}  // namespace

std::string KnowledgeGraph::normalize_concept(const std::string& s) const {
    if (!normalize_) return s;
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '_')
            out.push_back(' ');
        else
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

int KnowledgeGraph::intern_entity(const std::string& s) {
    auto it = entity_ids_.find(s);
    if (it != entity_ids_.end()) return it->second;
    int id = static_cast<int>(entity_names_.size());
    entity_names_.push_back(s);
    entity_ids_.emplace(s, id);
    return id;
}

int KnowledgeGraph::intern_relation(const std::string& s) {
    auto it = relation_ids_.find(s);
    if (it != relation_ids_.end()) return it->second;
    int id = static_cast<int>(relation_names_.size());
    relation_names_.push_back(s);
    relation_ids_.emplace(s, id);
    return id;
}

void KnowledgeGraph::add_triple(const std::string& h, const std::string& r, const std::string& t) {
    int hid = intern_entity(normalize_concept(h));
    int rid = intern_relation(r);
    int tid = intern_entity(normalize_concept(t));
    int64_t key = pair_key(hid, tid);
    for (int idx : dedup_[key])
        if (triples_[static_cast<size_t>(idx)].relation == rid) return;  // exact duplicate
    int idx = static_cast<int>(triples_.size());
    triples_.push_back({hid, rid, tid});
    dedup_[key].push_back(idx);
    by_pair_[key].push_back(idx);
    by_head_[hid].push_back(idx);
    by_tail_[tid].push_back(idx);
}

KnowledgeGraph KnowledgeGraph::from_triples(const std::vector<std::array<std::string, 3>>& rows,
                                            bool normalize) {
    KnowledgeGraph g;
    g.normalize_ = normalize;
    for (const auto& row : rows) g.add_triple(row[0], row[1], row[2]);
    if (g.triples_.empty()) throw DataError("empty knowledge graph");
    return g;
}

KnowledgeGraph KnowledgeGraph::ingest_tsv(const std::string& path, bool normalize,
                                          bool skip_first_field) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open knowledge graph file: " + path);
    KnowledgeGraph g;
    g.normalize_ = normalize;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        size_t pos = 0;
        while (true) {
            size_t tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        size_t need = skip_first_field ? 4 : 3;
        if (fields.size() < need)
            throw DataError("malformed knowledge graph line " + std::to_string(lineno) +
                            " in " + path + ": expected at least " + std::to_string(need) +
                            " tab-separated fields");
        size_t off = skip_first_field ? 1 : 0;
        if (fields[off].empty() || fields[off + 1].empty() || fields[off + 2].empty())
            throw DataError("malformed knowledge graph line " + std::to_string(lineno) +
                            " in " + path + ": empty field");
        g.add_triple(fields[off], fields[off + 1], fields[off + 2]);
    }
    if (g.triples_.empty()) throw DataError("empty knowledge graph");
    return g;
}

std::optional<int> KnowledgeGraph::entity_id(const std::string& word) const {
    auto it = entity_ids_.find(normalize_concept(word));
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> KnowledgeGraph::relation_id(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
}

bool KnowledgeGraph::contains(const Triple& t) const {
    auto it = by_pair_.find(pair_key(t.head, t.tail));
    if (it == by_pair_.end()) return false;
    for (int idx : it->second)
        if (triples_[static_cast<size_t>(idx)].relation == t.relation) return true;
    return false;
}

std::vector<Triple> KnowledgeGraph::lookup_pair(int head, int tail) const {
    std::vector<Triple> out;
    auto it = by_pair_.find(pair_key(head, tail));
    if (it == by_pair_.end()) return out;
    for (int idx : it->second) out.push_back(triples_[static_cast<size_t>(idx)]);
    return out;
}

std::vector<Triple> KnowledgeGraph::lookup_pair(const std::string& head,
                                                const std::string& tail) const {
    auto h = entity_id(head);
    auto t = entity_id(tail);
    if (!h || !t) return {};
    return lookup_pair(*h, *t);
}

std::vector<Triple> KnowledgeGraph::lookup_head(int head) const {
    std::vector<Triple> out;
    auto it = by_head_.find(head);
    if (it == by_head_.end()) return out;
    for (int idx : it->second) out.push_back(triples_[static_cast<size_t>(idx)]);
    return out;
}

std::vector<Triple> KnowledgeGraph::lookup_tail(int tail) const {
    std::vector<Triple> out;
    auto it = by_tail_.find(tail);
    if (it == by_tail_.end()) return out;
    for (int idx : it->second) out.push_back(triples_[static_cast<size_t>(idx)]);
    return out;
}

std::array<std::string, 3> KnowledgeGraph::names(const Triple& t) const {
    return {entity_name(t.head), relation_name(t.relation), entity_name(t.tail)};
}

}  // namespace bicam
