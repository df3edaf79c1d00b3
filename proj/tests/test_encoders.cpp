#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bicam/encoders.hpp"
#include "bicam/fd_check.hpp"
#include "bicam/hole.hpp"
#include "fixtures.hpp"

using namespace bicam;

namespace {

std::vector<double> column(const Tensor& m, int j) {
    std::vector<double> out;
    for (int i = 0; i < m.dim(0); ++i) out.push_back(m.at(i, j));
    return out;
}

}  // namespace

TEST_CASE("triple sequence: padding contract") {
    KnowledgeGraph g = testing::example_graph();
    HoleModel m = init_hole_model(g, 6, 11);
    std::vector<std::array<std::string, 3>> two = {{"horse", "is_a", "animal"},
                                                   {"cart", "related_to", "horse"}};
    TripleSequence seq = build_triple_sequence(two, m, 3);
    CHECK(seq.num_triples == 2);
    CHECK(seq.embedding_matrix.dim(0) == 6);
    CHECK(seq.embedding_matrix.dim(1) == 9);  // n = 3 * max_triples
    for (int j = 6; j < 9; ++j) {
        CHECK(seq.tokens[static_cast<size_t>(j)].empty());
        for (double v : column(seq.embedding_matrix, j)) CHECK(v == 0.0);
    }
}

TEST_CASE("triple sequence: worked-example premise columns carry the HolE vectors") {
    KnowledgeGraph g = testing::example_graph();
    HoleModel m = init_hole_model(g, 8, 3);
    std::vector<std::array<std::string, 3>> premise = {{"horse", "has_property", "white"},
                                                       {"cart", "related_to", "horse"},
                                                       {"animal", "at_location", "outside"},
                                                       {"horse", "is_a", "animal"}};
    TripleSequence seq = build_triple_sequence(premise, m, 4);
    CHECK(seq.embedding_matrix.dim(1) == 12);
    CHECK(seq.tokens[0] == "horse");
    CHECK(seq.tokens[1] == "has_property");
    CHECK(column(seq.embedding_matrix, 0) == m.entity_vec(*m.entity_row("horse")));
    CHECK(column(seq.embedding_matrix, 1) == m.relation_vec(*m.relation_row("has_property")));
    CHECK(column(seq.embedding_matrix, 11) == m.entity_vec(*m.entity_row("animal")));
}

TEST_CASE("triple sequence: empty set gives all-zero X, OOV is deterministic") {
    KnowledgeGraph g = testing::example_graph();
    HoleModel m = init_hole_model(g, 5, 1);
    TripleSequence empty = build_triple_sequence({}, m, 2);
    for (double v : empty.embedding_matrix.data) CHECK(v == 0.0);

    std::vector<std::array<std::string, 3>> oov = {{"zebra", "is_a", "animal"}};
    TripleSequence a = build_triple_sequence(oov, m, 1);
    TripleSequence b = build_triple_sequence(oov, m, 1);
    CHECK(a.embedding_matrix.data == b.embedding_matrix.data);
    bool nonzero = false;
    for (double v : column(a.embedding_matrix, 0)) nonzero |= v != 0.0;
    CHECK(nonzero);  // OOV tokens get a pseudo-random, not zero, vector
}

TEST_CASE("commonsense encoder: feature map length m, zero input maps to zero") {
    std::mt19937_64 rng(5);
    for (int m_count : {1, 2, 5}) {
        CommonsenseEncoderParams params(3, 4, rng);
        Tape t;
        params.bind(t);
        Tape::Id x = t.constant(Tensor({4, 3 * m_count}));
        Tape::Id conv = t.conv1d(x, params.filters.id, params.bias.id, 3, 3);
        CHECK(t.value(conv).dim(0) == 3);
        CHECK(t.value(conv).dim(1) == m_count);
    }

    CommonsenseEncoderParams params(4, 6, rng);
    for (double& v : params.bias.value.data) v = 0.0;
    TripleSequence zero_seq;
    zero_seq.embedding_matrix = Tensor({6, 9});
    zero_seq.tokens.assign(9, "");
    Tensor out = encode_commonsense_value(zero_seq, params);
    CHECK(out.dim(0) == 4);
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("commonsense encoder: permuting whole triples leaves the encoding unchanged") {
    KnowledgeGraph g = testing::example_graph();
    HoleModel m = init_hole_model(g, 8, 3);
    std::mt19937_64 rng(9);
    CommonsenseEncoderParams params(7, 8, rng);
    std::vector<std::array<std::string, 3>> triples = {{"horse", "has_property", "white"},
                                                       {"cart", "related_to", "horse"},
                                                       {"horse", "is_a", "animal"}};
    TripleSequence seq = build_triple_sequence(triples, m, 3);
    Tensor base = encode_commonsense_value(seq, params);

    std::vector<std::array<std::string, 3>> permuted = {triples[2], triples[0], triples[1]};
    TripleSequence pseq = build_triple_sequence(permuted, m, 3);
    Tensor perm = encode_commonsense_value(pseq, params);
    for (size_t i = 0; i < base.data.size(); ++i)
        CHECK(perm.data[i] == doctest::Approx(base.data[i]).epsilon(1e-12));
}

TEST_CASE("commonsense encoder: corrupting one triple changes only its window's contribution") {
    KnowledgeGraph g = testing::example_graph();
    HoleModel m = init_hole_model(g, 8, 3);
    std::mt19937_64 rng(13);
    CommonsenseEncoderParams params(5, 8, rng);
    std::vector<std::array<std::string, 3>> triples = {{"horse", "has_property", "white"},
                                                       {"cart", "related_to", "horse"},
                                                       {"horse", "is_a", "animal"}};
    TripleSequence seq = build_triple_sequence(triples, m, 3);
    // per-filter per-window activations, windows stride-aligned to triples
    auto window_acts = [&](const TripleSequence& s) {
        Tape t;
        params.bind(t);
        Tape::Id conv = t.conv1d(t.constant(s.embedding_matrix), params.filters.id,
                                 params.bias.id, 3, 3);
        return t.value(t.relu(conv));
    };
    Tensor base = window_acts(seq);
    std::vector<std::array<std::string, 3>> corrupted = triples;
    corrupted[1] = {"man", "antonym", "animal"};
    Tensor cor = window_acts(build_triple_sequence(corrupted, m, 3));
    for (int f = 0; f < 5; ++f)
        for (int w = 0; w < 3; ++w)
            if (w != 1) CHECK(cor.at(f, w) == base.at(f, w));
}

TEST_CASE("commonsense encoder: filter gradient passes finite differences") {
    KnowledgeGraph g = testing::example_graph();
    HoleModel hm = init_hole_model(g, 6, 21);
    std::vector<std::array<std::string, 3>> triples = {{"horse", "is_a", "animal"},
                                                       {"animal", "antonym", "man"}};
    TripleSequence seq = build_triple_sequence(triples, hm, 2);
    std::mt19937_64 rng(77);
    CommonsenseEncoderParams params(4, 6, rng);
    TapeFn fn = [&](Tape& t, const std::vector<Tape::Id>& p) {
        Tape::Id x = t.constant(seq.embedding_matrix);
        Tape::Id conv = t.conv1d(x, p[0], p[1], 3, 3);
        // sum of squares avoids both the relu kink and max-over-time ties
        Tape::Id sq = t.mul(conv, conv);
        return t.sum(sq);
    };
    CHECK(fd_check(fn, {params.filters.value, params.bias.value}) <= 1e-6);

    // the real encoder path (relu + max) with kink-free inputs
    TapeFn enc = [&](Tape& t, const std::vector<Tape::Id>& p) {
        CommonsenseEncoderParams local;
        local.filters = Parameter("f", t.value(p[0]));
        local.bias = Parameter("b", t.value(p[1]));
        local.filters.id = p[0];
        local.bias.id = p[1];
        return t.sum(encode_commonsense(t, t.constant(seq.embedding_matrix), local));
    };
    CHECK(fd_check(enc, {params.filters.value, params.bias.value}) <= 1e-4);
}

TEST_CASE("mean-pool sentence encoder: contracts") {
    std::vector<std::string> vocab = {"cat", "dog", "runs"};
    std::mt19937_64 rng(3);
    MeanPoolEncoder enc(vocab, 5, 8, rng);
    CHECK(enc.output_width() == 8);

    auto encode = [&](const std::vector<std::string>& toks) {
        Tape t;
        enc.bind(t);
        return t.value(enc.encode(t, toks));
    };
    Tensor one = encode({"dog"});
    CHECK(one.dim(0) == 8);
    Tensor twice = encode({"dog", "dog"});
    for (size_t i = 0; i < one.data.size(); ++i)
        CHECK(twice.data[i] == doctest::Approx(one.data[i]).epsilon(1e-12));

    Tensor empty = encode({});
    CHECK(empty.dim(0) == 8);  // empty list maps through the zero embedding
    for (double v : empty.data) CHECK(std::isfinite(v));

    // distinct OOV words share the OOV slot
    Tensor a = encode({"zebra"});
    Tensor b = encode({"wolf"});
    CHECK(a.data == b.data);
}
