#pragma once

#include <array>
#include <string>
#include <vector>

#include "bicam/kg.hpp"

namespace bicam::testing {

// Fixture graph holding exactly the triples that appear in the worked
// retrieval example (steps 2-3 for both sentences).
inline KnowledgeGraph example_graph() {
    return KnowledgeGraph::from_triples({
        {"horse", "has_property", "white"},
        {"cart", "related_to", "horse"},
        {"animal", "at_location", "outside"},
        {"horse", "is_a", "animal"},
        {"horse", "related_to", "animal"},
        {"horse", "at_location", "outside"},
        {"animal", "related_to", "horse"},
        {"animal", "antonym", "man"},
        {"animal", "distinct_from", "man"},
    });
}

inline const std::string example_premise =
    "A white horse is pulling a cart while a man stands and watches.";
inline const std::string example_hypothesis = "An animal is walking outside.";

inline std::vector<std::array<std::string, 3>> names_of(const KnowledgeGraph& g,
                                                        const std::vector<Triple>& ts) {
    std::vector<std::array<std::string, 3>> out;
    for (const Triple& t : ts) out.push_back(g.names(t));
    return out;
}

}  // namespace bicam::testing
