#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bicam/kg.hpp"

namespace bicam {

// 5 groups x 10 entities; "same_group" links every ordered within-group pair.
KnowledgeGraph make_hole_blocks_graph(uint64_t seed);

struct SyntheticExample {
    std::string premise;
    std::string hypothesis;
    int label;  // 0 = entails, 1 = neutral
};

struct FusionSignalData {
    std::vector<std::array<std::string, 3>> kg_rows;
    std::vector<SyntheticExample> examples;
};

// Balanced 2-class task whose label is exactly "some premise word implies
// some hypothesis word in the KG". The link words rotate over the whole
// vocabulary, so sentence surface forms carry no per-class token signal.
FusionSignalData make_fusion_signal(uint64_t seed, int num_examples = 480, int vocab_size = 80,
                                    int fillers_per_sentence = 3);

// Writes the KG (tsv) and dataset (jsonl) for a named task; byte-identical
// output for a fixed seed. hole_blocks writes an empty dataset file.
void make_synthetic(const std::string& task, uint64_t seed, const std::string& kg_path,
                    const std::string& dataset_path);

}  // namespace bicam
