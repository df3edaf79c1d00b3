#include "bicam/synth.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "bicam/tensor.hpp"

namespace bicam {

namespace {

std::string word_name(int i) {
    std::ostringstream os;
    os << 'w';
    if (i < 10) os << '0';
    os << i;
    return os.str();
}

}  // namespace

KnowledgeGraph make_hole_blocks_graph(uint64_t) {
    std::vector<std::array<std::string, 3>> rows;
    for (int group = 0; group < 5; ++group)
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) {
                if (i == j) continue;
                std::ostringstream a, b;
                a << 'g' << group << 'e' << i;
                b << 'g' << group << 'e' << j;
                rows.push_back({a.str(), "same_group", b.str()});
            }
    return KnowledgeGraph::from_triples(rows);
}

FusionSignalData make_fusion_signal(uint64_t seed, int num_examples, int vocab_size,
                                    int fillers_per_sentence) {
    if (vocab_size < 8) throw UsageError("fusion_signal: vocab_size too small");
    if (num_examples < 2) throw UsageError("fusion_signal: need at least 2 examples");
    FusionSignalData out;
    // chain KG: w_i implies w_{i+1 mod V}; every word is both a head and a tail
    for (int i = 0; i < vocab_size; ++i)
        out.kg_rows.push_back({word_name(i), "implies", word_name((i + 1) % vocab_size)});

    std::mt19937_64 rng(seed ^ 0xf051a11ULL);
    std::uniform_int_distribution<int> pick_word(0, vocab_size - 1);

    auto has_edge = [&](int a, int b) { return (a + 1) % vocab_size == b; };
    auto any_cross_edge = [&](const std::vector<int>& heads, const std::vector<int>& tails) {
        for (int a : heads)
            for (int b : tails)
                if (has_edge(a, b)) return true;
        return false;
    };
    auto any_intra_edge = [&](const std::vector<int>& ws) { return any_cross_edge(ws, ws); };

    auto render = [&](std::vector<int> ws) {
        std::shuffle(ws.begin(), ws.end(), rng);
        std::string s;
        for (size_t i = 0; i < ws.size(); ++i) {
            if (i) s += ' ';
            s += word_name(ws[i]);
        }
        return s;
    };

    for (int n = 0; n < num_examples; ++n) {
        bool positive = n % 2 == 0;
        // rotate the anchor over the whole chain so every word serves every role
        int anchor = (n / 2) % vocab_size;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 1000) throw NumericError("fusion_signal: sampling did not converge");
            std::vector<int> premise = {anchor};
            int hyp_word = positive ? (anchor + 1) % vocab_size
                                    : pick_word(rng);
            if (!positive && has_edge(anchor, hyp_word)) continue;
            std::vector<int> hypothesis = {hyp_word};
            for (int i = 0; i < fillers_per_sentence; ++i) {
                premise.push_back(pick_word(rng));
                hypothesis.push_back(pick_word(rng));
            }
            std::set<int> pset(premise.begin(), premise.end());
            std::set<int> hset(hypothesis.begin(), hypothesis.end());
            if (pset.size() != premise.size() || hset.size() != hypothesis.size()) continue;
            std::vector<int> pv(pset.begin(), pset.end()), hv(hset.begin(), hset.end());
            if (any_intra_edge(pv) || any_intra_edge(hv)) continue;
            if (any_cross_edge(hv, pv)) continue;  // only the planted direction may link
            // premise->hypothesis edges must be exactly the planted one (or none)
            int cross = 0;
            for (int a : pv)
                for (int b : hv)
                    cross += has_edge(a, b) ? 1 : 0;
            if (positive && cross != 1) continue;
            if (!positive && cross != 0) continue;
            out.examples.push_back({render(premise), render(hypothesis), positive ? 0 : 1});
            break;
        }
    }
    std::shuffle(out.examples.begin(), out.examples.end(), rng);
    return out;
}

void make_synthetic(const std::string& task, uint64_t seed, const std::string& kg_path,
                    const std::string& dataset_path) {
    std::ofstream kg(kg_path);
    if (!kg) throw DataError("cannot open " + kg_path + " for writing");
    std::ofstream data(dataset_path);
    if (!data) throw DataError("cannot open " + dataset_path + " for writing");
    if (task == "hole_blocks") {
        KnowledgeGraph g = make_hole_blocks_graph(seed);
        for (const Triple& t : g.triples()) {
            auto n = g.names(t);
            kg << n[0] << '\t' << n[1] << '\t' << n[2] << '\n';
        }
    } else if (task == "fusion_signal") {
        FusionSignalData d = make_fusion_signal(seed);
        for (const auto& row : d.kg_rows) kg << row[0] << '\t' << row[1] << '\t' << row[2] << '\n';
        for (const SyntheticExample& ex : d.examples)
            data << "{\"premise\": \"" << ex.premise << "\", \"hypothesis\": \"" << ex.hypothesis
                 << "\", \"label\": \"" << (ex.label == 0 ? "entails" : "neutral") << "\"}\n";
    } else {
        throw UsageError("unknown synthetic task: " + task);
    }
}

}  // namespace bicam
