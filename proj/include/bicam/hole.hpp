#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bicam/kg.hpp"
#include "bicam/tensor.hpp"

namespace bicam {

struct HoleTrainConfig {
    double learning_rate = 0.1;
    double margin = 1.0;  // gamma, > 0
    int batch_size = 50;
    int dim = 50;
    int negatives_per_positive = 5;
    int epochs = 100;
    uint64_t seed = 0;
    double validation_fraction = 0.1;  // seeded train/validation split
};

// Hyperparameter grid: lr x margin x batch x dim.
struct HoleGrid {
    std::vector<double> learning_rates = {0.001, 0.01, 0.1};
    std::vector<double> margins = {0.2, 1, 2, 10};
    std::vector<int> batch_sizes = {50, 100, 150, 200};
    std::vector<int> dims = {50, 100, 150, 200};
};

struct HoleModel {
    int dim = 0;
    Tensor entity_emb;    // |E| x d
    Tensor relation_emb;  // |R| x d
    std::vector<std::string> entity_names;
    std::vector<std::string> relation_names;

    std::optional<int> entity_row(const std::string& name) const;
    std::optional<int> relation_row(const std::string& name) const;

    std::vector<double> entity_vec(int row) const;
    std::vector<double> relation_vec(int row) const;
};

struct ScoredTriple {
    Triple triple;
    double score;
    double plausibility;  // logistic(score)
};

struct HoleTrainResult {
    HoleModel model;
    std::vector<double> epoch_losses;
};

double logistic(double x);

// Circular correlation via FFT, validated against the double-loop reference in tests.
std::vector<double> circular_correlation(const std::vector<double>& h,
                                         const std::vector<double>& t);

double score_triple(const HoleModel& m, const Triple& triple);
ScoredTriple score_triple_full(const HoleModel& m, const Triple& triple);

// Full pairwise hinge over all (positive, negative) score pairs.
double ranking_loss(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores, double margin);

// Tail corruption; corrupted triples never occur in the graph.
std::vector<Triple> sample_negatives(const Triple& triple, const KnowledgeGraph& g, int n,
                                     uint64_t seed);

HoleModel init_hole_model(const KnowledgeGraph& g, int dim, uint64_t seed);

// Seeded (train, validation) partition of the graph's triples.
std::pair<std::vector<Triple>, std::vector<Triple>> split_hole_triples(const KnowledgeGraph& g,
                                                                       double val_fraction,
                                                                       uint64_t seed);

using EpochCallback = std::function<void(int epoch, double loss)>;

HoleTrainResult train_hole(const KnowledgeGraph& g, const HoleTrainConfig& cfg,
                           const EpochCallback& on_epoch = nullptr);

// Per-relation decision thresholds on plausibility, fitted to maximize
// accuracy on the given labelled validation triples.
struct TripleThresholds {
    std::map<int, double> per_relation;
    double global = 0.5;

    double for_relation(int relation) const;
};

TripleThresholds fit_thresholds(const HoleModel& m, const std::vector<Triple>& val_pos,
                                const std::vector<Triple>& val_neg);

double classify_triples(const HoleModel& m, const std::vector<Triple>& positives,
                        const std::vector<Triple>& negatives, const TripleThresholds& th);

// Train with cfg, then fit thresholds on the held-out split (one sampled
// negative per positive) and report triple-classification accuracy there.
double hole_validation_accuracy(const KnowledgeGraph& g, const HoleTrainConfig& cfg);

struct GridSearchResult {
    HoleTrainConfig best_config;
    HoleModel best_model;
    double best_accuracy = 0.0;
    std::vector<std::pair<HoleTrainConfig, double>> cells;  // accuracy per trained cell
};

GridSearchResult grid_search(const KnowledgeGraph& g, const HoleGrid& grid,
                             const HoleTrainConfig& base);

// File format: "HOLE <d> <|E|> <|R|>" header, then E/R lines with names and
// d floats each.
void save_hole_model(const HoleModel& m, const std::string& path);
HoleModel load_hole_model(const std::string& path);

}  // namespace bicam
