#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bicam/fd_check.hpp"
#include "bicam/pipeline.hpp"
#include "bicam/synth.hpp"

using namespace bicam;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
};

void add_config_opts(CLI::App* app, CommonOpts& c) {
    app->add_option("--config", c.config_path, "key = value config file");
    app->add_option("--set", c.overrides, "override a config key, key=value (repeatable)");
}

PipelineConfig resolve_config(const CommonOpts& c) {
    PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
    for (const auto& kv : c.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got: " + kv);
        apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path);
    if (!file) throw DataError("cannot open " + path + " for writing");
    return file;
}

nlohmann::json triples_json(const std::vector<std::array<std::string, 3>>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) arr.push_back({t[0], t[1], t[2]});
    return arr;
}

int cmd_ingest(const std::string& kg_path, bool skip_first, bool no_normalize) {
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path, !no_normalize, skip_first);
    std::cout << "triples " << g.triples().size() << "\n"
              << "entities " << g.num_entities() << "\n"
              << "relations " << g.num_relations() << "\n";
    return 0;
}

int cmd_retrieve(const std::string& kg_path, const std::string& dataset_path,
                 const std::string& out_path, const CommonOpts& copts) {
    PipelineConfig cfg = resolve_config(copts);
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
    auto data = load_dataset(dataset_path, cfg.num_classes, false);
    for (auto& ex : data) ex.has_triples = false;
    attach_retrieval(data, g, retrieval_config(cfg));
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    for (const auto& ex : data) {
        nlohmann::json obj;
        obj["premise"] = ex.premise;
        obj["hypothesis"] = ex.hypothesis;
        if (ex.label >= 0) obj["label"] = label_name(ex.label, cfg.num_classes);
        obj["premise_triples"] = triples_json(ex.premise_triples);
        obj["hypothesis_triples"] = triples_json(ex.hypothesis_triples);
        out << obj.dump() << "\n";
    }
    return 0;
}

int cmd_train_hole(const std::string& kg_path, const std::string& out_path, HoleTrainConfig hcfg,
                   bool grid) {
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
    HoleModel model;
    if (grid) {
        GridSearchResult r = grid_search(g, HoleGrid{}, hcfg);
        model = r.best_model;
        std::cout << "grid cells " << r.cells.size() << "\n"
                  << "best accuracy " << r.best_accuracy << "\n"
                  << "best lr " << r.best_config.learning_rate << " margin "
                  << r.best_config.margin << " batch " << r.best_config.batch_size << " dim "
                  << r.best_config.dim << "\n";
    } else {
        HoleTrainResult r = train_hole(g, hcfg, [](int epoch, double loss) {
            std::cout << "epoch " << epoch << " loss " << loss << "\n";
        });
        model = r.model;
    }
    save_hole_model(model, out_path);
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_eval_triples(const std::string& kg_path, const std::string& model_path, uint64_t seed,
                     double val_fraction) {
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
    HoleModel m = load_hole_model(model_path);
    auto [fit_pos, held_pos] = split_hole_triples(g, val_fraction, seed);
    if (fit_pos.empty() || held_pos.empty())
        throw DataError("graph too small for a triple-classification split");
    auto negatives = [&](const std::vector<Triple>& pos) {
        std::vector<Triple> neg;
        for (const auto& t : pos) {
            auto s = sample_negatives(t, g, 1, seed);
            neg.push_back(s.front());
        }
        return neg;
    };
    std::vector<Triple> fit_neg = negatives(fit_pos);
    std::vector<Triple> held_neg = negatives(held_pos);
    TripleThresholds th = fit_thresholds(m, fit_pos, fit_neg);
    std::cout << "fit accuracy " << classify_triples(m, fit_pos, fit_neg, th) << "\n"
              << "held-out accuracy " << classify_triples(m, held_pos, held_neg, th) << "\n";
    return 0;
}

void run_gradcheck(NliModel& model, const NliExample& ex, const std::string& csv_path) {
    auto params = model.parameters();
    std::vector<Tensor> values;
    for (Parameter* p : params) values.push_back(p->value);
    TapeFn fn = [&](Tape& t, const std::vector<Tape::Id>& ids) {
        for (size_t i = 0; i < params.size(); ++i) params[i]->id = ids[i];
        if (!model.config.fine_tune_hole) {
            model.hole_entities.bind_frozen(t);
            model.hole_relations.bind_frozen(t);
        }
        std::mt19937_64 rng(model.config.seed);
        Tape::Id logits = nli_forward(model, t, ex, false, rng);
        return nli_loss(t, logits, ex.label >= 0 ? ex.label : 0);
    };
    FdCheckOptions opt;
    opt.coords_per_param = 3;
    opt.seed = model.config.seed;
    FdReport rep = fd_check_report(fn, values, opt);
    write_fd_csv(rep, csv_path);
    std::cout << "gradcheck max rel err " << rep.max_rel_err << " (" << csv_path << ")\n";
}

int cmd_train_nli(const std::string& kg_path, const std::string& dataset_path,
                  const std::string& hole_path, const std::string& out_path,
                  const CommonOpts& copts, bool ablate, const std::string& strategy_name,
                  const std::string& gradcheck_csv) {
    PipelineConfig cfg = resolve_config(copts);
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
    HoleModel hole = load_hole_model(hole_path);
    auto data = load_dataset(dataset_path, cfg.num_classes);
    attach_retrieval(data, g, retrieval_config(cfg));
    auto splits = split_dataset(data, cfg);
    if (splits[0].empty()) throw DataError("empty training split");
    NliModel model = init_nli_model(cfg, hole, collect_vocab(splits[0], retrieval_config(cfg)),
                                    fusion_strategy_from_name(strategy_name), ablate);
    if (!gradcheck_csv.empty()) run_gradcheck(model, splits[0].front(), gradcheck_csv);
    NliTrainResult r = train_nli(model, splits[0], splits[1], [](int epoch, double loss) {
        std::cout << "epoch " << epoch << " loss " << loss << "\n";
    });
    for (size_t e = 0; e < r.val_accuracies.size(); ++e)
        std::cout << "epoch " << e << " val_acc " << r.val_accuracies[e] << "\n";
    if (!splits[2].empty())
        std::cout << "test accuracy " << evaluate(model, splits[2]).accuracy << "\n";
    save_nli_model(model, out_path);
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& kg_path,
                const std::string& dataset_path, const std::string& out_path) {
    NliModel model = load_nli_model(model_path);
    auto data = load_dataset(dataset_path, model.config.num_classes, false);
    if (!kg_path.empty()) {
        KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
        attach_retrieval(data, g, retrieval_config(model.config));
    }
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    for (const auto& ex : data) {
        Prediction p = predict(model, ex);
        nlohmann::json obj;
        obj["premise"] = ex.premise;
        obj["hypothesis"] = ex.hypothesis;
        obj["predicted"] = label_name(p.label, model.config.num_classes);
        obj["distribution"] = p.distribution;
        obj["premise_triples"] = triples_json(p.premise_triples);
        obj["hypothesis_triples"] = triples_json(p.hypothesis_triples);
        out << obj.dump() << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& kg_path, const std::string& dataset_path,
              const std::string& hole_path, const std::string& out_path, const CommonOpts& copts,
              const std::vector<int>& ms) {
    PipelineConfig cfg = resolve_config(copts);
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
    HoleModel hole = load_hole_model(hole_path);
    auto data = load_dataset(dataset_path, cfg.num_classes);
    auto results = sweep_triples(cfg, g, hole, data, ms, &std::cerr);
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << "m,accuracy\n";
    for (const auto& [m, acc] : results) out << m << "," << acc << "\n";
    return 0;
}

int cmd_ablate(const std::string& kg_path, const std::string& dataset_path,
               const std::string& hole_path, const std::string& out_path,
               const CommonOpts& copts) {
    PipelineConfig cfg = resolve_config(copts);
    KnowledgeGraph g = KnowledgeGraph::ingest_tsv(kg_path);
    HoleModel hole = load_hole_model(hole_path);
    auto data = load_dataset(dataset_path, cfg.num_classes);
    auto results = run_ablation(cfg, g, hole, data);
    std::ofstream file;
    std::ostream& out = open_out(file, out_path);
    out << "strategy,accuracy\n";
    for (const auto& [s, acc] : results) out << fusion_strategy_name(s) << "," << acc << "\n";
    return 0;
}

int cmd_synth(const std::string& task, uint64_t seed, const std::string& kg_out,
              const std::string& dataset_out) {
    make_synthetic(task, seed, kg_out, dataset_out);
    std::cout << "wrote " << kg_out << " and " << dataset_out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BiCAM: bilinear fusion of sentence and commonsense features for NLI"};
    app.require_subcommand(1);

    // ingest
    std::string kg_path, dataset_path, out_path, model_path, hole_path;
    bool skip_first = false, no_normalize = false;
    auto* ingest = app.add_subcommand("ingest", "load a TSV knowledge graph and print stats");
    ingest->add_option("--kg", kg_path, "TSV triples file")->required();
    ingest->add_flag("--skip-first-field", skip_first, "4-field assertion exports");
    ingest->add_flag("--no-normalize", no_normalize, "keep concept strings verbatim");

    // retrieve
    CommonOpts retrieve_opts;
    auto* retrieve = app.add_subcommand("retrieve", "attach retrieved triples to a JSONL dataset");
    retrieve->add_option("--kg", kg_path, "TSV triples file")->required();
    retrieve->add_option("--dataset", dataset_path, "JSONL premise/hypothesis file")->required();
    retrieve->add_option("--out", out_path, "output JSONL (default stdout)");
    add_config_opts(retrieve, retrieve_opts);

    // train-hole
    HoleTrainConfig hcfg;
    bool grid = false;
    auto* train_hole_cmd = app.add_subcommand("train-hole", "train holographic embeddings");
    train_hole_cmd->add_option("--kg", kg_path, "TSV triples file")->required();
    train_hole_cmd->add_option("--out", out_path, "output model file")->required();
    train_hole_cmd->add_option("--dim", hcfg.dim, "embedding dimension");
    train_hole_cmd->add_option("--lr", hcfg.learning_rate, "AdaGrad learning rate");
    train_hole_cmd->add_option("--margin", hcfg.margin, "ranking-loss margin");
    train_hole_cmd->add_option("--batch", hcfg.batch_size, "batch size");
    train_hole_cmd->add_option("--negatives", hcfg.negatives_per_positive, "negatives per positive");
    train_hole_cmd->add_option("--epochs", hcfg.epochs, "training epochs");
    train_hole_cmd->add_option("--seed", hcfg.seed, "RNG seed");
    train_hole_cmd->add_option("--val-fraction", hcfg.validation_fraction, "validation fraction");
    train_hole_cmd->add_flag("--grid", grid, "grid-search lr x margin x batch x dim");

    // eval-triples
    uint64_t eval_seed = 0;
    double eval_val_fraction = 0.2;
    auto* eval_triples = app.add_subcommand("eval-triples", "triple classification accuracy");
    eval_triples->add_option("--kg", kg_path, "TSV triples file")->required();
    eval_triples->add_option("--model", model_path, "trained embedding file")->required();
    eval_triples->add_option("--seed", eval_seed, "RNG seed");
    eval_triples->add_option("--val-fraction", eval_val_fraction, "held-out fraction");

    // train-nli
    CommonOpts train_opts;
    bool ablate_cs = false;
    std::string strategy_name = "factorized_bilinear", gradcheck_csv;
    auto* train_nli_cmd = app.add_subcommand("train-nli", "train the full entailment model");
    train_nli_cmd->add_option("--kg", kg_path, "TSV triples file")->required();
    train_nli_cmd->add_option("--dataset", dataset_path, "JSONL dataset")->required();
    train_nli_cmd->add_option("--hole", hole_path, "trained embedding file")->required();
    train_nli_cmd->add_option("--out", out_path, "output model file")->required();
    train_nli_cmd->add_flag("--ablate-commonsense", ablate_cs, "zero out the commonsense branch");
    train_nli_cmd->add_option("--strategy", strategy_name, "fusion strategy name");
    train_nli_cmd->add_option("--gradcheck-csv", gradcheck_csv,
                              "write a finite-difference gradient report before training");
    add_config_opts(train_nli_cmd, train_opts);

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "label premise/hypothesis pairs");
    predict_cmd->add_option("--model", model_path, "trained model file")->required();
    predict_cmd->add_option("--kg", kg_path, "TSV triples file for retrieval");
    predict_cmd->add_option("--dataset", dataset_path, "JSONL input")->required();
    predict_cmd->add_option("--out", out_path, "output JSONL (default stdout)");

    // sweep
    CommonOpts sweep_opts;
    std::vector<int> ms = {1, 2, 3, 4, 5, 6, 7};
    auto* sweep = app.add_subcommand("sweep", "accuracy as a function of max retrieved triples");
    sweep->add_option("--kg", kg_path, "TSV triples file")->required();
    sweep->add_option("--dataset", dataset_path, "JSONL dataset")->required();
    sweep->add_option("--hole", hole_path, "trained embedding file")->required();
    sweep->add_option("--out", out_path, "output CSV (default stdout)");
    sweep->add_option("--ms", ms, "max_triples values to sweep");
    add_config_opts(sweep, sweep_opts);

    // ablate
    CommonOpts ablate_opts;
    auto* ablate = app.add_subcommand("ablate", "compare all fusion strategies");
    ablate->add_option("--kg", kg_path, "TSV triples file")->required();
    ablate->add_option("--dataset", dataset_path, "JSONL dataset")->required();
    ablate->add_option("--hole", hole_path, "trained embedding file")->required();
    ablate->add_option("--out", out_path, "output CSV (default stdout)");
    add_config_opts(ablate, ablate_opts);

    // synth
    std::string task;
    uint64_t synth_seed = 0;
    std::string synth_kg, synth_dataset;
    auto* synth = app.add_subcommand("synth", "generate a synthetic KG + dataset");
    synth->add_option("--task", task, "hole_blocks or fusion_signal")->required();
    synth->add_option("--seed", synth_seed, "RNG seed");
    synth->add_option("--kg-out", synth_kg, "output TSV path")->required();
    synth->add_option("--dataset-out", synth_dataset, "output JSONL path")->required();

    try {
        app.parse(argc, argv);
        if (ingest->parsed()) return cmd_ingest(kg_path, skip_first, no_normalize);
        if (retrieve->parsed()) return cmd_retrieve(kg_path, dataset_path, out_path, retrieve_opts);
        if (train_hole_cmd->parsed()) return cmd_train_hole(kg_path, out_path, hcfg, grid);
        if (eval_triples->parsed())
            return cmd_eval_triples(kg_path, model_path, eval_seed, eval_val_fraction);
        if (train_nli_cmd->parsed())
            return cmd_train_nli(kg_path, dataset_path, hole_path, out_path, train_opts, ablate_cs,
                                 strategy_name, gradcheck_csv);
        if (predict_cmd->parsed()) return cmd_predict(model_path, kg_path, dataset_path, out_path);
        if (sweep->parsed())
            return cmd_sweep(kg_path, dataset_path, hole_path, out_path, sweep_opts, ms);
        if (ablate->parsed())
            return cmd_ablate(kg_path, dataset_path, hole_path, out_path, ablate_opts);
        if (synth->parsed()) return cmd_synth(task, synth_seed, synth_kg, synth_dataset);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
