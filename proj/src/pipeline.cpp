#include "bicam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace bicam {

namespace {

uint64_t mix64(uint64_t a, uint64_t b) {
    uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::string escape_word(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '%') out += "%25";
        else if (c == ' ') out += "%20";
        else out += c;
    }
    return out;
}

std::string unescape_word(const std::string& s) {
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

}  // namespace

int label_from_name(const std::string& name, int num_classes) {
    if (num_classes == 3) {
        if (name == "entailment") return 0;
        if (name == "neutral") return 1;
        if (name == "contradiction") return 2;
    } else {
        if (name == "entails") return 0;
        if (name == "neutral") return 1;
    }
    return -1;
}

std::string label_name(int label, int num_classes) {
    static const char* three[] = {"entailment", "neutral", "contradiction"};
    static const char* two[] = {"entails", "neutral"};
    if (label < 0 || label >= num_classes) throw UsageError("label out of range");
    return num_classes == 3 ? three[label] : two[label];
}

std::vector<NliExample> load_dataset(const std::string& path, int num_classes,
                                     bool require_label) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::vector<NliExample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("malformed dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!obj.is_object())
            throw DataError("malformed dataset line " + std::to_string(lineno) +
                            ": expected an object");
        NliExample ex;
        auto field = [&](const char* key) -> std::string {
            if (!obj.contains(key) || !obj[key].is_string())
                throw DataError("missing field '" + std::string(key) + "' on dataset line " +
                                std::to_string(lineno));
            return obj[key].get<std::string>();
        };
        auto triple_list = [&](const char* key) {
            std::vector<std::array<std::string, 3>> ts;
            if (!obj.contains(key)) return ts;
            const auto& arr = obj[key];
            if (!arr.is_array())
                throw DataError("field '" + std::string(key) + "' is not an array on dataset line " +
                                std::to_string(lineno));
            for (const auto& item : arr) {
                if (!item.is_array() || item.size() != 3 || !item[0].is_string() ||
                    !item[1].is_string() || !item[2].is_string())
                    throw DataError("bad triple in '" + std::string(key) + "' on dataset line " +
                                    std::to_string(lineno));
                ts.push_back({item[0].get<std::string>(), item[1].get<std::string>(),
                              item[2].get<std::string>()});
            }
            return ts;
        };
        ex.premise = field("premise");
        ex.hypothesis = field("hypothesis");
        if (obj.contains("label") && obj["label"].is_string()) {
            std::string lab = obj["label"].get<std::string>();
            ex.label = label_from_name(lab, num_classes);
            if (ex.label < 0)
                throw DataError("unknown label '" + lab + "' on dataset line " +
                                std::to_string(lineno));
        } else if (require_label) {
            throw DataError("missing field 'label' on dataset line " + std::to_string(lineno));
        }
        if (obj.contains("premise_triples") || obj.contains("hypothesis_triples")) {
            ex.premise_triples = triple_list("premise_triples");
            ex.hypothesis_triples = triple_list("hypothesis_triples");
            ex.has_triples = true;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

RetrievalConfig retrieval_config(const PipelineConfig& cfg) {
    RetrievalConfig r;
    r.max_triples = cfg.max_triples;
    r.seed = cfg.seed;
    r.related_to_scope =
        cfg.related_to_scope == "per_pair" ? RelatedToScope::PerPair : RelatedToScope::Global;
    return r;
}

void attach_retrieval(std::vector<NliExample>& data, const KnowledgeGraph& g,
                      const RetrievalConfig& cfg) {
    for (auto& ex : data) {
        if (ex.has_triples) continue;
        auto [p, h] = retrieve_for_pair(ex.premise, ex.hypothesis, g, cfg);
        for (const auto& t : p.triples) ex.premise_triples.push_back(g.names(t));
        for (const auto& t : h.triples) ex.hypothesis_triples.push_back(g.names(t));
        ex.has_triples = true;
    }
}

std::vector<Parameter*> NliModel::parameters() {
    std::vector<Parameter*> ps;
    if (config.fine_tune_hole) {
        ps.push_back(&hole_entities);
        ps.push_back(&hole_relations);
    }
    for (Parameter* p : sentence->parameters()) ps.push_back(p);
    ps.push_back(&cs.filters);
    ps.push_back(&cs.bias);
    auto add_fusion = [&](AblationFusionParams& f) {
        for (Parameter& w : f.weights) ps.push_back(&w);
        if (f.strategy == FusionStrategy::FactorizedBilinear) {
            ps.push_back(&f.bilinear.u_proj);
            ps.push_back(&f.bilinear.v_proj);
        }
    };
    add_fusion(fusion_p);
    if (config.separate_projections) add_fusion(fusion_h);
    for (Parameter* p : {&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2, &mlp.w_out, &mlp.b_out})
        ps.push_back(p);
    return ps;
}

NliModel init_nli_model(const PipelineConfig& cfg, const HoleModel& hole,
                        const std::vector<std::string>& vocab, FusionStrategy strategy,
                        bool ablate_commonsense) {
    cfg.validate();
    if (hole.dim <= 0) throw UsageError("commonsense embeddings are empty");
    NliModel m;
    m.config = cfg;
    m.strategy = strategy;
    m.ablate_commonsense = ablate_commonsense;
    m.hole = hole;
    m.hole_entities = Parameter("hole_entities", hole.entity_emb);
    m.hole_relations = Parameter("hole_relations", hole.relation_emb);
    m.vocab = vocab;
    std::mt19937_64 rng(mix64(cfg.seed, 0xb1ca3ULL));
    m.sentence =
        std::make_unique<MeanPoolEncoder>(vocab, cfg.sentence_embed_dim, cfg.sentence_width, rng);
    m.cs = CommonsenseEncoderParams(cfg.cs_filters, hole.dim, rng);
    m.fusion_p =
        make_ablation_params(strategy, cfg.sentence_width, cfg.cs_filters, cfg.ablation_fc_width,
                             cfg.fusion_proj_len, cfg.fusion_k, cfg.fusion_dropout, rng);
    if (cfg.separate_projections)
        m.fusion_h = make_ablation_params(strategy, cfg.sentence_width, cfg.cs_filters,
                                          cfg.ablation_fc_width, cfg.fusion_proj_len, cfg.fusion_k,
                                          cfg.fusion_dropout, rng);
    int input = 2 * cfg.sentence_width + 2 * m.fusion_p.output_width;
    m.mlp = MlpParams(input, cfg.mlp_hidden1, cfg.mlp_hidden2, cfg.num_classes, rng);
    return m;
}

void bind_nli_model(NliModel& m, Tape& t) {
    for (Parameter* p : m.parameters()) p->bind(t);
    if (!m.config.fine_tune_hole) {
        m.hole_entities.bind_frozen(t);
        m.hole_relations.bind_frozen(t);
    }
}

namespace {

// Triple-sequence matrix on the tape: in-vocabulary columns are row gathers
// of the embedding tables (trainable when fine-tuning); padding and OOV
// columns come from build_triple_sequence as constants.
Tape::Id sequence_on_tape(NliModel& m, Tape& t,
                          const std::vector<std::array<std::string, 3>>& triples) {
    TripleSequence seq = build_triple_sequence(triples, m.hole, m.config.max_triples);
    int d = seq.embedding_matrix.dim(0);
    int n = seq.embedding_matrix.dim(1);
    std::vector<Tape::Id> cols;
    cols.reserve(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const std::string& tok = seq.tokens[static_cast<size_t>(j)];
        Tape::Id col = -1;
        if (!tok.empty()) {
            if (j % 3 == 1) {
                if (auto r = m.hole.relation_row(tok)) col = t.row(m.hole_relations.id, *r);
            } else {
                if (auto r = m.hole.entity_row(tok)) col = t.row(m.hole_entities.id, *r);
            }
        }
        if (col < 0) {
            Tensor v({d});
            for (int i = 0; i < d; ++i) v[static_cast<size_t>(i)] = seq.embedding_matrix.at(i, j);
            col = t.constant(std::move(v));
        }
        cols.push_back(col);
    }
    Tape::Id cat = t.concat(cols);
    return t.transpose(t.reshape(cat, {n, d}));
}

Tape::Id commonsense_vector(NliModel& m, Tape& t,
                            const std::vector<std::array<std::string, 3>>& triples) {
    if (m.ablate_commonsense) return t.constant(Tensor::zeros({m.cs.num_filters()}));
    return encode_commonsense(t, sequence_on_tape(m, t, triples), m.cs);
}

}  // namespace

Tape::Id nli_forward(NliModel& m, Tape& t, const NliExample& ex, bool train,
                     std::mt19937_64& rng) {
    RetrievalConfig rcfg = retrieval_config(m.config);
    Tape::Id p = m.sentence->encode(t, remove_stopwords(ex.premise, rcfg).tokens);
    Tape::Id h = m.sentence->encode(t, remove_stopwords(ex.hypothesis, rcfg).tokens);
    Tape::Id cs_p = commonsense_vector(m, t, ex.premise_triples);
    Tape::Id cs_h = commonsense_vector(m, t, ex.hypothesis_triples);
    AblationFusionParams& fh = m.config.separate_projections ? m.fusion_h : m.fusion_p;
    Tape::Id z_p = fuse_ablation(t, p, cs_p, m.fusion_p, train, rng);
    Tape::Id z_h = fuse_ablation(t, h, cs_h, fh, train, rng);
    return classify_logits(t, p, z_p, h, z_h, m.mlp);
}

NliTrainResult train_nli(NliModel& m, const std::vector<NliExample>& train,
                         const std::vector<NliExample>& val, const EpochCallback& on_epoch) {
    if (train.empty()) throw DataError("empty training set");
    for (const auto& ex : train)
        if (ex.label < 0 || ex.label >= m.config.num_classes)
            throw DataError("training example with missing or out-of-range label");
    NliTrainResult result;
    const int bs = m.config.batch_size;
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < m.config.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix64(m.config.seed, 0x5c0ffULL + static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double total = 0.0;
        int batch_index = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(bs)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(bs));
            Tape t;
            bind_nli_model(m, t);
            std::mt19937_64 drop_rng(
                mix64(m.config.seed, (static_cast<uint64_t>(epoch) << 24) ^
                                         static_cast<uint64_t>(batch_index)));
            Tape::Id loss = -1;
            for (size_t i = start; i < end; ++i) {
                const NliExample& ex = train[order[i]];
                Tape::Id l = nli_loss(t, nli_forward(m, t, ex, true, drop_rng), ex.label);
                loss = loss < 0 ? l : t.add(loss, l);
            }
            loss = t.scale(loss, 1.0 / static_cast<double>(end - start));
            double lv = t.value(loss)[0];
            if (!std::isfinite(lv))
                throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_index));
            t.backward(loss);
            for (Parameter* p : m.parameters()) p->adagrad_step(t, m.config.learning_rate);
            total += lv * static_cast<double>(end - start);
            ++batch_index;
        }
        double epoch_loss = total / static_cast<double>(train.size());
        result.epoch_losses.push_back(epoch_loss);
        if (!val.empty()) result.val_accuracies.push_back(evaluate(m, val).accuracy);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    if (m.config.fine_tune_hole) {
        m.hole.entity_emb = m.hole_entities.value;
        m.hole.relation_emb = m.hole_relations.value;
    }
    return result;
}

Prediction predict(NliModel& m, const NliExample& ex) {
    Tape t;
    bind_nli_model(m, t);
    std::mt19937_64 rng(m.config.seed);
    Tape::Id logits = nli_forward(m, t, ex, false, rng);
    Prediction out;
    out.distribution = Tape::softmax(t.value(logits));
    out.label = static_cast<int>(std::distance(
        out.distribution.begin(),
        std::max_element(out.distribution.begin(), out.distribution.end())));
    out.premise_triples = ex.premise_triples;
    out.hypothesis_triples = ex.hypothesis_triples;
    return out;
}

EvalReport evaluate(NliModel& m, const std::vector<NliExample>& data) {
    if (data.empty()) throw DataError("empty evaluation set");
    int nc = m.config.num_classes;
    EvalReport rep;
    rep.confusion.assign(static_cast<size_t>(nc), std::vector<int>(static_cast<size_t>(nc), 0));
    int correct = 0;
    for (const auto& ex : data) {
        if (ex.label < 0 || ex.label >= nc)
            throw DataError("evaluation example with missing or out-of-range label");
        Prediction p = predict(m, ex);
        rep.confusion[static_cast<size_t>(ex.label)][static_cast<size_t>(p.label)]++;
        if (p.label == ex.label) ++correct;
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    rep.precision.assign(static_cast<size_t>(nc), 0.0);
    rep.recall.assign(static_cast<size_t>(nc), 0.0);
    for (int c = 0; c < nc; ++c) {
        int col = 0, row = 0;
        for (int g = 0; g < nc; ++g) {
            col += rep.confusion[static_cast<size_t>(g)][static_cast<size_t>(c)];
            row += rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(g)];
        }
        int tp = rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        rep.precision[static_cast<size_t>(c)] = col ? static_cast<double>(tp) / col : 0.0;
        rep.recall[static_cast<size_t>(c)] = row ? static_cast<double>(tp) / row : 0.0;
    }
    return rep;
}

std::array<std::vector<NliExample>, 3> split_dataset(const std::vector<NliExample>& data,
                                                     const PipelineConfig& cfg) {
    std::vector<NliExample> shuffled = data;
    std::mt19937_64 rng(mix64(cfg.seed, 0x5914ULL));
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    size_t n = shuffled.size();
    size_t n_train = static_cast<size_t>(std::lround(cfg.train_fraction * static_cast<double>(n)));
    size_t n_val = static_cast<size_t>(std::lround(cfg.val_fraction * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    std::array<std::vector<NliExample>, 3> out;
    out[0].assign(shuffled.begin(), shuffled.begin() + static_cast<long>(n_train));
    out[1].assign(shuffled.begin() + static_cast<long>(n_train),
                  shuffled.begin() + static_cast<long>(n_train + n_val));
    out[2].assign(shuffled.begin() + static_cast<long>(n_train + n_val), shuffled.end());
    return out;
}

std::vector<std::string> collect_vocab(const std::vector<NliExample>& data,
                                       const RetrievalConfig& cfg) {
    std::set<std::string> words;
    for (const auto& ex : data) {
        for (const auto& w : remove_stopwords(ex.premise, cfg).tokens) words.insert(w);
        for (const auto& w : remove_stopwords(ex.hypothesis, cfg).tokens) words.insert(w);
    }
    return {words.begin(), words.end()};
}

namespace {

double train_and_score(const PipelineConfig& cfg, const KnowledgeGraph& g, const HoleModel& hole,
                       const std::vector<NliExample>& data, FusionStrategy strategy) {
    std::vector<NliExample> local = data;
    for (auto& ex : local) {
        ex.has_triples = false;
        ex.premise_triples.clear();
        ex.hypothesis_triples.clear();
    }
    RetrievalConfig rcfg = retrieval_config(cfg);
    attach_retrieval(local, g, rcfg);
    auto splits = split_dataset(local, cfg);
    NliModel model = init_nli_model(cfg, hole, collect_vocab(splits[0], rcfg), strategy);
    train_nli(model, splits[0], splits[1]);
    const std::vector<NliExample>& held_out =
        !splits[2].empty() ? splits[2] : (!splits[1].empty() ? splits[1] : splits[0]);
    return evaluate(model, held_out).accuracy;
}

}  // namespace

std::vector<std::pair<int, double>> sweep_triples(const PipelineConfig& base,
                                                  const KnowledgeGraph& g, const HoleModel& hole,
                                                  const std::vector<NliExample>& data,
                                                  std::vector<int> ms, std::ostream* warn) {
    std::vector<int> unique_ms;
    for (int m : ms) {
        if (std::find(unique_ms.begin(), unique_ms.end(), m) != unique_ms.end()) {
            if (warn) *warn << "warning: duplicate max_triples value " << m << " skipped\n";
            continue;
        }
        if (m < 1) throw UsageError("max_triples values must be >= 1");
        unique_ms.push_back(m);
    }
    if (unique_ms.empty()) throw UsageError("no max_triples values to sweep");
    std::vector<std::pair<int, double>> out;
    for (int m : unique_ms) {
        PipelineConfig cfg = base;
        cfg.max_triples = m;
        out.emplace_back(m, train_and_score(cfg, g, hole, data, FusionStrategy::FactorizedBilinear));
    }
    return out;
}

std::vector<std::pair<FusionStrategy, double>> run_ablation(const PipelineConfig& base,
                                                            const KnowledgeGraph& g,
                                                            const HoleModel& hole,
                                                            const std::vector<NliExample>& data) {
    std::vector<std::pair<FusionStrategy, double>> out;
    for (FusionStrategy s : all_fusion_strategies())
        out.emplace_back(s, train_and_score(base, g, hole, data, s));
    return out;
}

// ---- serialization ----

namespace {

void write_tensor(std::ostream& out, const Tensor& v) {
    out << "T " << v.rank();
    for (int d : v.shape) out << ' ' << d;
    for (double x : v.data) out << ' ' << x;
    out << '\n';
}

Tensor read_tensor(std::istream& in, const std::string& path) {
    std::string tag;
    int rank = 0;
    if (!(in >> tag >> rank) || tag != "T" || rank < 0)
        throw DataError("bad tensor record in " + path);
    std::vector<int> shape(static_cast<size_t>(rank));
    for (int& d : shape)
        if (!(in >> d) || d < 0) throw DataError("bad tensor shape in " + path);
    Tensor v(shape);
    for (double& x : v.data)
        if (!(in >> x)) throw DataError("truncated tensor in " + path);
    return v;
}

}  // namespace

void save_nli_model(NliModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.precision(17);
    out << "BICAMNLI 1\n";
    out << "strategy " << fusion_strategy_name(m.strategy) << '\n';
    out << "ablate " << (m.ablate_commonsense ? 1 : 0) << '\n';
    auto cfg = config_to_map(m.config);
    out << "config " << cfg.size() << '\n';
    for (const auto& [k, v] : cfg) out << k << ' ' << v << '\n';
    out << "vocab " << m.vocab.size() << '\n';
    for (const auto& w : m.vocab) out << escape_word(w) << '\n';
    out << "hole " << m.hole.dim << ' ' << m.hole.entity_names.size() << ' '
        << m.hole.relation_names.size() << '\n';
    for (size_t i = 0; i < m.hole.entity_names.size(); ++i) {
        out << "E " << escape_word(m.hole.entity_names[i]);
        for (int j = 0; j < m.hole.dim; ++j)
            out << ' ' << m.hole.entity_emb.at(static_cast<int>(i), j);
        out << '\n';
    }
    for (size_t i = 0; i < m.hole.relation_names.size(); ++i) {
        out << "R " << escape_word(m.hole.relation_names[i]);
        for (int j = 0; j < m.hole.dim; ++j)
            out << ' ' << m.hole.relation_emb.at(static_cast<int>(i), j);
        out << '\n';
    }
    auto params = m.parameters();
    out << "params " << params.size() << '\n';
    for (Parameter* p : params) write_tensor(out, p->value);
    if (!out) throw DataError("failed writing model file " + path);
}

NliModel load_nli_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "BICAMNLI" || version != 1)
        throw DataError("bad model file header in " + path);
    std::string tag, strategy_name;
    int ablate = 0;
    size_t count = 0;
    in >> tag >> strategy_name;
    if (tag != "strategy") throw DataError("bad model file in " + path);
    in >> tag >> ablate;
    if (tag != "ablate") throw DataError("bad model file in " + path);
    in >> tag >> count;
    if (tag != "config") throw DataError("bad model file in " + path);
    PipelineConfig cfg;
    for (size_t i = 0; i < count; ++i) {
        std::string k, v;
        if (!(in >> k >> v)) throw DataError("truncated config in " + path);
        apply_config_override(cfg, k, v);
    }
    in >> tag >> count;
    if (tag != "vocab") throw DataError("bad model file in " + path);
    std::vector<std::string> vocab(count);
    for (auto& w : vocab) {
        if (!(in >> w)) throw DataError("truncated vocab in " + path);
        w = unescape_word(w);
    }
    int d = 0;
    size_t ne = 0, nr = 0;
    in >> tag >> d >> ne >> nr;
    if (tag != "hole" || d <= 0) throw DataError("bad model file in " + path);
    HoleModel hole;
    hole.dim = d;
    hole.entity_emb = Tensor({static_cast<int>(ne), d});
    hole.relation_emb = Tensor({static_cast<int>(nr), d});
    for (size_t i = 0; i < ne + nr; ++i) {
        std::string kind, name;
        if (!(in >> kind >> name) || (kind != "E" && kind != "R"))
            throw DataError("bad embedding row in " + path);
        bool is_entity = kind == "E";
        Tensor& dst = is_entity ? hole.entity_emb : hole.relation_emb;
        auto& names = is_entity ? hole.entity_names : hole.relation_names;
        size_t row = names.size();
        if (row >= static_cast<size_t>(dst.dim(0)))
            throw DataError("embedding row count mismatch in " + path);
        for (int j = 0; j < d; ++j)
            if (!(in >> dst.at(static_cast<int>(row), j)))
                throw DataError("truncated embedding row in " + path);
        names.push_back(unescape_word(name));
    }
    NliModel m = init_nli_model(cfg, hole, vocab, fusion_strategy_from_name(strategy_name),
                                ablate != 0);
    auto params = m.parameters();
    in >> tag >> count;
    if (tag != "params" || count != params.size())
        throw DataError("parameter count mismatch in " + path);
    for (Parameter* p : params) {
        Tensor v = read_tensor(in, path);
        if (!v.same_shape(p->value))
            throw DataError("parameter shape mismatch in " + path);
        p->value = std::move(v);
    }
    return m;
}

}  // namespace bicam
