#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "bicam/config.hpp"
#include "bicam/encoders.hpp"
#include "bicam/fusion.hpp"
#include "bicam/hole.hpp"
#include "bicam/retrieval.hpp"

namespace bicam {

struct NliExample {
    std::string premise;
    std::string hypothesis;
    int label = -1;  // -1 for unlabeled prediction input
    std::vector<std::array<std::string, 3>> premise_triples;
    std::vector<std::array<std::string, 3>> hypothesis_triples;
    bool has_triples = false;  // triples came from the file or a retrieval pass
};

// JSONL, one object per line: premise, hypothesis, label, and optionally
// premise_triples / hypothesis_triples as [head, relation, tail] arrays.
// 3-class labels: entailment/neutral/contradiction; 2-class: entails/neutral.
std::vector<NliExample> load_dataset(const std::string& path, int num_classes,
                                     bool require_label = true);

int label_from_name(const std::string& name, int num_classes);
std::string label_name(int label, int num_classes);

RetrievalConfig retrieval_config(const PipelineConfig& cfg);

// Fills in retrieved triples for every example that lacks them.
void attach_retrieval(std::vector<NliExample>& data, const KnowledgeGraph& g,
                      const RetrievalConfig& cfg);

struct NliModel {
    PipelineConfig config;
    FusionStrategy strategy = FusionStrategy::FactorizedBilinear;
    bool ablate_commonsense = false;

    HoleModel hole;
    Parameter hole_entities;   // bound frozen unless config.fine_tune_hole
    Parameter hole_relations;
    std::unique_ptr<MeanPoolEncoder> sentence;
    std::vector<std::string> vocab;
    CommonsenseEncoderParams cs;
    AblationFusionParams fusion_p;
    AblationFusionParams fusion_h;  // only populated with separate_projections
    MlpParams mlp;

    std::vector<Parameter*> parameters();
};

NliModel init_nli_model(const PipelineConfig& cfg, const HoleModel& hole,
                        const std::vector<std::string>& vocab,
                        FusionStrategy strategy = FusionStrategy::FactorizedBilinear,
                        bool ablate_commonsense = false);

// Binds every trainable parameter (HolE tables frozen unless fine-tuning).
void bind_nli_model(NliModel& model, Tape& t);

// Logits for one example; parameters must already be bound to the tape.
Tape::Id nli_forward(NliModel& model, Tape& t, const NliExample& ex, bool train,
                     std::mt19937_64& rng);

struct NliTrainResult {
    std::vector<double> epoch_losses;      // mean per-example loss
    std::vector<double> val_accuracies;    // empty if no validation set
};

NliTrainResult train_nli(NliModel& model, const std::vector<NliExample>& train,
                         const std::vector<NliExample>& val,
                         const EpochCallback& on_epoch = nullptr);

struct Prediction {
    int label = 0;
    std::vector<double> distribution;
    std::vector<std::array<std::string, 3>> premise_triples;
    std::vector<std::array<std::string, 3>> hypothesis_triples;
};

Prediction predict(NliModel& model, const NliExample& ex);

struct EvalReport {
    double accuracy = 0.0;
    std::vector<std::vector<int>> confusion;  // [gold][predicted]
    std::vector<double> precision;
    std::vector<double> recall;
};

EvalReport evaluate(NliModel& model, const std::vector<NliExample>& data);

// Seeded shuffle, then train/val/test partition by the config fractions.
std::array<std::vector<NliExample>, 3> split_dataset(const std::vector<NliExample>& data,
                                                     const PipelineConfig& cfg);

std::vector<std::string> collect_vocab(const std::vector<NliExample>& data,
                                       const RetrievalConfig& cfg);

// Trains one model per m and reports held-out accuracy; duplicate m values
// are dropped with a warning on `warn`.
std::vector<std::pair<int, double>> sweep_triples(const PipelineConfig& base,
                                                  const KnowledgeGraph& g,
                                                  const HoleModel& hole,
                                                  const std::vector<NliExample>& data,
                                                  std::vector<int> ms,
                                                  std::ostream* warn = nullptr);

// Trains one model per fusion strategy and reports held-out accuracy.
std::vector<std::pair<FusionStrategy, double>> run_ablation(const PipelineConfig& base,
                                                            const KnowledgeGraph& g,
                                                            const HoleModel& hole,
                                                            const std::vector<NliExample>& data);

void save_nli_model(NliModel& model, const std::string& path);
NliModel load_nli_model(const std::string& path);

}  // namespace bicam
