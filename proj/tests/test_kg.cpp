#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "bicam/kg.hpp"
#include "bicam/tensor.hpp"
#include "fixtures.hpp"

using namespace bicam;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content) : path(name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("ingest_tsv builds vocabularies and indexes") {
    TempFile f("kg_basic.tsv", "tinsel\tIsA\tdecoration\ntree\tRelatedTo\tchristmas\n");
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(f.path);
    CHECK(g.triples().size() == 2);
    CHECK(g.num_entities() == 4);
    CHECK(g.num_relations() == 2);
    CHECK(g.contains_entity("tinsel"));
}

TEST_CASE("exact duplicate rows collapse to one triple") {
    std::string line = "dog\tIsA\tanimal\n";
    TempFile f("kg_dup.tsv", line + line + line + line + line);
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(f.path);
    CHECK(g.triples().size() == 1);
}

TEST_CASE("pair lookup returns every matching relation") {
    KnowledgeGraph g = testing::example_graph();
    auto hits = testing::names_of(g, g.lookup_pair("horse", "animal"));
    REQUIRE(hits.size() == 2);
    CHECK((hits[0][1] == "is_a" || hits[1][1] == "is_a"));
    CHECK((hits[0][1] == "related_to" || hits[1][1] == "related_to"));
}

TEST_CASE("pair lookup is directional and tolerates unknown strings") {
    KnowledgeGraph g = testing::example_graph();
    CHECK(g.lookup_pair("white", "horse").empty());  // stored direction is horse->white
    auto hits = testing::names_of(g, g.lookup_pair("animal", "outside"));
    REQUIRE(hits.size() == 1);
    CHECK(hits[0] == std::array<std::string, 3>{"animal", "at_location", "outside"});
    CHECK(g.lookup_pair("x", "y").empty());
}

TEST_CASE("contains_entity with normalization") {
    KnowledgeGraph g = testing::example_graph();
    CHECK(g.contains_entity("horse"));
    CHECK(g.contains_entity("HORSE"));
    CHECK_FALSE(g.contains_entity(""));
}

TEST_CASE("normalization folds case and underscores") {
    TempFile f("kg_norm.tsv", "New_York\tIsA\tCity\n");
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(f.path, true);
    CHECK(g.contains_entity("new york"));
    CHECK(g.contains_entity("New_York"));  // normalized lookup hits too
}

TEST_CASE("error paths: malformed line, empty file") {
    TempFile bad("kg_bad.tsv", "a\tb\n");
    CHECK_THROWS_WITH_AS((void)KnowledgeGraph::ingest_tsv(bad.path),
                         doctest::Contains("line 1"), DataError);
    TempFile empty("kg_empty.tsv", "# only a comment\n");
    CHECK_THROWS_WITH_AS((void)KnowledgeGraph::ingest_tsv(empty.path),
                         doctest::Contains("empty knowledge graph"), DataError);
}

TEST_CASE("4-field ConceptNet export mode ignores the first field") {
    TempFile f("kg_4field.tsv", "/a/edge1\tdog\tIsA\tanimal\n");
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(f.path, true, true);
    REQUIRE(g.triples().size() == 1);
    CHECK(g.names(g.triples()[0]) == std::array<std::string, 3>{"dog", "IsA", "animal"});
}

TEST_CASE("every triple is reachable through all three indexes") {
    KnowledgeGraph g = testing::example_graph();
    size_t by_head_total = 0, by_tail_total = 0;
    for (size_t e = 0; e < g.num_entities(); ++e) {
        by_head_total += g.lookup_head(static_cast<int>(e)).size();
        by_tail_total += g.lookup_tail(static_cast<int>(e)).size();
    }
    CHECK(by_head_total == g.triples().size());
    CHECK(by_tail_total == g.triples().size());
    for (const Triple& t : g.triples()) {
        auto hits = g.lookup_pair(t.head, t.tail);
        CHECK(std::find(hits.begin(), hits.end(), t) != hits.end());
    }
}

TEST_CASE("ingestion is idempotent") {
    std::string content = "a\tr1\tb\nb\tr2\tc\na\tr1\tb\n";
    TempFile f1("kg_idem1.tsv", content);
    TempFile f2("kg_idem2.tsv", content + content);
    CHECK(KnowledgeGraph::ingest_tsv(f1.path) == KnowledgeGraph::ingest_tsv(f2.path));
}
