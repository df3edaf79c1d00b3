#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace bicam {

// All pipeline hyperparameters; loadable from a key = value file, every key
// overridable by a CLI flag.
struct PipelineConfig {
    // retrieval
    int max_triples = 7;
    uint64_t seed = 0;
    std::string related_to_scope = "global";  // or "per_pair"

    // commonsense encoder
    int cs_filters = 100;
    bool fine_tune_hole = false;

    // reference sentence encoder
    int sentence_embed_dim = 50;
    int sentence_width = 100;

    // fusion
    int fusion_proj_len = 800;
    int fusion_k = 4;
    double fusion_dropout = 0.3;
    bool separate_projections = false;
    int ablation_fc_width = 1200;

    // classifier
    int mlp_hidden1 = 300;
    int mlp_hidden2 = 300;
    int num_classes = 3;

    // joint training
    double learning_rate = 0.05;
    int epochs = 20;
    int batch_size = 25;
    double train_fraction = 0.8;
    double val_fraction = 0.1;

    void validate() const;
};

PipelineConfig load_config(const std::string& path);
void apply_config_override(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::map<std::string, std::string> config_to_map(const PipelineConfig& cfg);
void save_config(const PipelineConfig& cfg, std::ostream& out);
PipelineConfig read_config_stream(std::istream& in);

}  // namespace bicam
