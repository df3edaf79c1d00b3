#include "bicam/hole.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "bicam/fft.hpp"
#include "bicam/tape.hpp"

namespace bicam {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

uint64_t triple_key(const Triple& t) {
    return mix(mix(static_cast<uint64_t>(t.head), static_cast<uint64_t>(t.relation)),
               static_cast<uint64_t>(t.tail));
}

}  // namespace

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> circular_correlation(const std::vector<double>& h,
                                         const std::vector<double>& t) {
    return circular_correlation_fft(h, t);
}

std::optional<int> HoleModel::entity_row(const std::string& name) const {
    for (size_t i = 0; i < entity_names.size(); ++i)
        if (entity_names[i] == name) return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> HoleModel::relation_row(const std::string& name) const {
    for (size_t i = 0; i < relation_names.size(); ++i)
        if (relation_names[i] == name) return static_cast<int>(i);
    return std::nullopt;
}

std::vector<double> HoleModel::entity_vec(int row) const {
    if (row < 0 || row >= entity_emb.dim(0)) throw UsageError("unknown entity id");
    return {entity_emb.data.begin() + static_cast<int64_t>(row) * dim,
            entity_emb.data.begin() + static_cast<int64_t>(row + 1) * dim};
}

std::vector<double> HoleModel::relation_vec(int row) const {
    if (row < 0 || row >= relation_emb.dim(0)) throw UsageError("unknown relation id");
    return {relation_emb.data.begin() + static_cast<int64_t>(row) * dim,
            relation_emb.data.begin() + static_cast<int64_t>(row + 1) * dim};
}

double score_triple(const HoleModel& m, const Triple& triple) {
    std::vector<double> corr =
        circular_correlation(m.entity_vec(triple.head), m.entity_vec(triple.tail));
    std::vector<double> r = m.relation_vec(triple.relation);
    double s = 0;
    for (int i = 0; i < m.dim; ++i) s += r[static_cast<size_t>(i)] * corr[static_cast<size_t>(i)];
    return s;
}

ScoredTriple score_triple_full(const HoleModel& m, const Triple& triple) {
    double s = score_triple(m, triple);
    return {triple, s, logistic(s)};
}

double ranking_loss(const std::vector<double>& pos_scores,
                    const std::vector<double>& neg_scores, double margin) {
    if (margin <= 0) throw UsageError("ranking_loss: margin must be > 0");
    double loss = 0;
    for (double pos : pos_scores)
        for (double neg : neg_scores)
            loss += std::max(0.0, margin + logistic(neg) - logistic(pos));
    return loss;
}

std::vector<Triple> sample_negatives(const Triple& triple, const KnowledgeGraph& g, int n,
                                     uint64_t seed) {
    if (n < 0) throw UsageError("sample_negatives: n must be >= 0");
    if (n == 0) return {};
    int num_entities = static_cast<int>(g.num_entities());
    if (num_entities <= 1) throw UsageError("sample_negatives: need more than one entity");
    std::mt19937_64 rng(mix(seed, triple_key(triple)));
    std::uniform_int_distribution<int> pick(0, num_entities - 1);
    std::vector<Triple> out;
    int attempts = 0;
    int max_attempts = 100 * n;
    while (static_cast<int>(out.size()) < n) {
        if (++attempts > max_attempts)
            throw DataError("sample_negatives: no unobserved corruption found after " +
                            std::to_string(max_attempts) + " attempts");
        Triple corrupted{triple.head, triple.relation, pick(rng)};
        if (g.contains(corrupted)) continue;
        out.push_back(corrupted);
    }
    return out;
}

HoleModel init_hole_model(const KnowledgeGraph& g, int dim, uint64_t seed) {
    if (dim <= 0) throw UsageError("embedding dimension must be positive");
    HoleModel m;
    m.dim = dim;
    m.entity_emb = Tensor({static_cast<int>(g.num_entities()), dim});
    m.relation_emb = Tensor({static_cast<int>(g.num_relations()), dim});
    for (size_t i = 0; i < g.num_entities(); ++i) m.entity_names.push_back(g.entity_name(static_cast<int>(i)));
    for (size_t i = 0; i < g.num_relations(); ++i) m.relation_names.push_back(g.relation_name(static_cast<int>(i)));
    double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    std::mt19937_64 rng(mix(seed, 0x401eULL));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& x : m.entity_emb.data) x = uni(rng);
    for (double& x : m.relation_emb.data) x = uni(rng);
    return m;
}

HoleTrainResult train_hole(const KnowledgeGraph& g, const HoleTrainConfig& cfg,
                           const EpochCallback& on_epoch) {
    if (cfg.margin <= 0) throw UsageError("margin must be > 0");
    if (cfg.batch_size < 1 || cfg.epochs < 0) throw UsageError("bad training config");
    if (g.triples().empty()) throw DataError("empty knowledge graph");

    HoleTrainResult result;
    result.model = init_hole_model(g, cfg.dim, cfg.seed);
    HoleModel& m = result.model;

    Tensor acc_e(m.entity_emb.shape), acc_r(m.relation_emb.shape);  // AdaGrad accumulators
    const double ada_eps = 1e-8;

    // holdout reproducible via split_hole_triples with the same fraction/seed
    std::vector<Triple> train =
        cfg.validation_fraction > 0
            ? split_hole_triples(g, cfg.validation_fraction, cfg.seed).first
            : g.triples();
    if (train.empty()) throw DataError("validation split left no training triples");

    uint64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix(cfg.seed, 0xe90c000ULL + static_cast<uint64_t>(epoch)));
        std::shuffle(train.begin(), train.end(), shuffle_rng);
        double epoch_loss = 0;
        for (size_t start = 0; start < train.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t stop = std::min(train.size(), start + static_cast<size_t>(cfg.batch_size));
            Tape tape;
            Tape::Id E = tape.leaf(m.entity_emb);
            Tape::Id R = tape.leaf(m.relation_emb);
            std::vector<Tape::Id> terms;
            for (size_t i = start; i < stop; ++i) {
                const Triple& pos = train[i];
                Tape::Id h = tape.row(E, pos.head);
                Tape::Id t = tape.row(E, pos.tail);
                Tape::Id r = tape.row(R, pos.relation);
                Tape::Id pos_sig = tape.logistic(tape.dot(r, tape.circ_corr(h, t)));
                // negatives regenerated at every gradient step
                for (const Triple& neg :
                     sample_negatives(pos, g, cfg.negatives_per_positive, mix(cfg.seed, step))) {
                    Tape::Id tn = tape.row(E, neg.tail);
                    Tape::Id neg_sig = tape.logistic(tape.dot(r, tape.circ_corr(h, tn)));
                    Tape::Id hinge = tape.relu(
                        tape.add_scalar(tape.sub(neg_sig, pos_sig), cfg.margin));
                    terms.push_back(hinge);
                }
                ++step;
            }
            if (terms.empty()) continue;
            Tape::Id loss = tape.sum(tape.concat(terms));
            double loss_val = tape.value(loss).data[0];
            if (!std::isfinite(loss_val))
                throw NumericError("non-finite ranking loss at epoch " + std::to_string(epoch) +
                                   ", batch starting at triple " + std::to_string(start));
            epoch_loss += loss_val;
            tape.backward(loss);
            const Tensor& ge = tape.grad(E);
            const Tensor& gr = tape.grad(R);
            for (size_t i = 0; i < m.entity_emb.data.size(); ++i) {
                double gval = ge.data[i];
                if (gval == 0.0) continue;
                acc_e.data[i] += gval * gval;
                m.entity_emb.data[i] -= cfg.learning_rate * gval / (std::sqrt(acc_e.data[i]) + ada_eps);
            }
            for (size_t i = 0; i < m.relation_emb.data.size(); ++i) {
                double gval = gr.data[i];
                if (gval == 0.0) continue;
                acc_r.data[i] += gval * gval;
                m.relation_emb.data[i] -= cfg.learning_rate * gval / (std::sqrt(acc_r.data[i]) + ada_eps);
            }
            // project entity rows onto a ball of radius 2; keeps scores out of the
            // logistic's saturated region (TransE-style norm constraint)
            const double rmax = 2.0;
            for (int e = 0; e < m.entity_emb.dim(0); ++e) {
                double sq = 0;
                for (int j = 0; j < m.dim; ++j) sq += m.entity_emb.at(e, j) * m.entity_emb.at(e, j);
                if (sq > rmax * rmax) {
                    double inv = rmax / std::sqrt(sq);
                    for (int j = 0; j < m.dim; ++j) m.entity_emb.at(e, j) *= inv;
                }
            }
        }
        result.epoch_losses.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    return result;
}

double TripleThresholds::for_relation(int relation) const {
    auto it = per_relation.find(relation);
    return it == per_relation.end() ? global : it->second;
}

namespace {

// best accuracy threshold over plausibility values: predict true iff p >= th
double best_threshold(std::vector<std::pair<double, bool>>& scored) {
    std::sort(scored.begin(), scored.end());
    std::vector<double> candidates = {0.5};
    for (size_t i = 0; i < scored.size(); ++i) {
        candidates.push_back(scored[i].first);
        if (i + 1 < scored.size())
            candidates.push_back(0.5 * (scored[i].first + scored[i + 1].first));
    }
    double best_th = 0.5;
    int best_correct = -1;
    for (double th : candidates) {
        int correct = 0;
        for (const auto& [p, is_pos] : scored)
            if ((p >= th) == is_pos) ++correct;
        if (correct > best_correct) {
            best_correct = correct;
            best_th = th;
        }
    }
    return best_th;
}

}  // namespace

TripleThresholds fit_thresholds(const HoleModel& m, const std::vector<Triple>& val_pos,
                                const std::vector<Triple>& val_neg) {
    TripleThresholds th;
    std::map<int, std::vector<std::pair<double, bool>>> by_rel;
    std::vector<std::pair<double, bool>> all;
    for (const Triple& t : val_pos) {
        double p = score_triple_full(m, t).plausibility;
        by_rel[t.relation].push_back({p, true});
        all.push_back({p, true});
    }
    for (const Triple& t : val_neg) {
        double p = score_triple_full(m, t).plausibility;
        by_rel[t.relation].push_back({p, false});
        all.push_back({p, false});
    }
    if (!all.empty()) th.global = best_threshold(all);
    for (auto& [rel, scored] : by_rel) th.per_relation[rel] = best_threshold(scored);
    return th;
}

double classify_triples(const HoleModel& m, const std::vector<Triple>& positives,
                        const std::vector<Triple>& negatives, const TripleThresholds& th) {
    size_t total = positives.size() + negatives.size();
    if (total == 0) throw UsageError("classify_triples: no triples");
    size_t correct = 0;
    for (const Triple& t : positives)
        if (score_triple_full(m, t).plausibility >= th.for_relation(t.relation)) ++correct;
    for (const Triple& t : negatives)
        if (score_triple_full(m, t).plausibility < th.for_relation(t.relation)) ++correct;
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::pair<std::vector<Triple>, std::vector<Triple>> split_hole_triples(const KnowledgeGraph& g,
                                                                       double val_fraction,
                                                                       uint64_t seed) {
    std::vector<Triple> all = g.triples();
    std::mt19937_64 rng(mix(seed, 0x59117ULL));
    std::shuffle(all.begin(), all.end(), rng);
    size_t nval = static_cast<size_t>(val_fraction * static_cast<double>(all.size()));
    std::vector<Triple> val(all.end() - static_cast<int64_t>(nval), all.end());
    all.resize(all.size() - nval);
    return {std::move(all), std::move(val)};
}

double hole_validation_accuracy(const KnowledgeGraph& g, const HoleTrainConfig& cfg) {
    HoleTrainResult r = train_hole(g, cfg);
    auto [train, val] = split_hole_triples(g, cfg.validation_fraction, cfg.seed);
    if (val.empty()) throw DataError("validation split is empty");
    std::vector<Triple> val_neg;
    for (size_t i = 0; i < val.size(); ++i)
        for (const Triple& neg : sample_negatives(val[i], g, 1, mix(cfg.seed, 0xe1a1ULL + i)))
            val_neg.push_back(neg);
    TripleThresholds th = fit_thresholds(r.model, val, val_neg);
    return classify_triples(r.model, val, val_neg, th);
}

GridSearchResult grid_search(const KnowledgeGraph& g, const HoleGrid& grid,
                             const HoleTrainConfig& base) {
    if (grid.learning_rates.empty() || grid.margins.empty() || grid.batch_sizes.empty() ||
        grid.dims.empty())
        throw UsageError("grid_search: empty grid");
    GridSearchResult result;
    bool have_best = false;
    uint64_t cell_index = 0;
    for (double lr : grid.learning_rates)
        for (double margin : grid.margins)
            for (int batch : grid.batch_sizes)
                for (int dim : grid.dims) {
                    HoleTrainConfig cfg = base;
                    cfg.learning_rate = lr;
                    cfg.margin = margin;
                    cfg.batch_size = batch;
                    cfg.dim = dim;
                    cfg.seed = mix(base.seed, cell_index++);
                    try {
                        double acc = hole_validation_accuracy(g, cfg);
                        result.cells.push_back({cfg, acc});
                        bool better = !have_best || acc > result.best_accuracy ||
                                      (acc == result.best_accuracy &&
                                       (dim < result.best_config.dim ||
                                        (dim == result.best_config.dim &&
                                         lr < result.best_config.learning_rate)));
                        if (better) {
                            result.best_accuracy = acc;
                            result.best_config = cfg;
                            result.best_model = train_hole(g, cfg).model;
                            have_best = true;
                        }
                    } catch (const std::exception& e) {
                        std::cerr << "grid_search: cell failed (lr=" << lr << " margin=" << margin
                                  << " batch=" << batch << " dim=" << dim << "): " << e.what()
                                  << "\n";
                    }
                }
    if (!have_best) throw DataError("grid_search: all cells failed");
    return result;
}

// Names can contain spaces after normalization; keep rows whitespace-splittable.
static std::string escape_name(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '%') out += "%25";
        else if (c == ' ') out += "%20";
        else out += c;
    }
    return out;
}

static std::string unescape_name(const std::string& s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            if (s.compare(i, 3, "%20") == 0) { out += ' '; i += 2; continue; }
            if (s.compare(i, 3, "%25") == 0) { out += '%'; i += 2; continue; }
        }
        out += s[i];
    }
    return out;
}

void save_hole_model(const HoleModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.precision(17);
    out << "HOLE " << m.dim << ' ' << m.entity_names.size() << ' ' << m.relation_names.size()
        << '\n';
    for (size_t i = 0; i < m.entity_names.size(); ++i) {
        out << "E " << escape_name(m.entity_names[i]);
        for (int j = 0; j < m.dim; ++j) out << ' ' << m.entity_emb.at(static_cast<int>(i), j);
        out << '\n';
    }
    for (size_t i = 0; i < m.relation_names.size(); ++i) {
        out << "R " << escape_name(m.relation_names[i]);
        for (int j = 0; j < m.dim; ++j) out << ' ' << m.relation_emb.at(static_cast<int>(i), j);
        out << '\n';
    }
}

HoleModel load_hole_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding file: " + path);
    std::string magic;
    int d = 0;
    size_t ne = 0, nr = 0;
    in >> magic >> d >> ne >> nr;
    if (magic != "HOLE" || d <= 0) throw DataError("bad embedding file header in " + path);
    HoleModel m;
    m.dim = d;
    m.entity_emb = Tensor({static_cast<int>(ne), d});
    m.relation_emb = Tensor({static_cast<int>(nr), d});
    for (size_t i = 0; i < ne + nr; ++i) {
        std::string kind, name;
        in >> kind >> name;
        if (!in || (kind != "E" && kind != "R"))
            throw DataError("bad embedding file row in " + path);
        bool is_entity = kind == "E";
        size_t row = is_entity ? m.entity_names.size() : m.relation_names.size();
        Tensor& dst = is_entity ? m.entity_emb : m.relation_emb;
        if (row >= static_cast<size_t>(dst.dim(0)))
            throw DataError("embedding file row count mismatch in " + path);
        for (int j = 0; j < d; ++j)
            if (!(in >> dst.at(static_cast<int>(row), j)))
                throw DataError("truncated embedding row in " + path);
        (is_entity ? m.entity_names : m.relation_names).push_back(unescape_name(name));
    }
    if (m.entity_names.size() != ne || m.relation_names.size() != nr)
        throw DataError("embedding file row count mismatch in " + path);
    return m;
}

}  // namespace bicam
