#include "bicam/config.hpp"

#include <fstream>
#include <sstream>

#include "bicam/tensor.hpp"

namespace bicam {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("bad integer for config key '" + key + "': " + v);
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("bad number for config key '" + key + "': " + v);
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("bad boolean for config key '" + key + "': " + v);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("bad integer for config key '" + key + "': " + v);
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (max_triples < 1) throw UsageError("max_triples must be >= 1");
    if (cs_filters < 1) throw UsageError("cs_filters must be >= 1");
    if (sentence_embed_dim < 1 || sentence_width < 1)
        throw UsageError("sentence encoder widths must be >= 1");
    if (fusion_k < 1 || fusion_proj_len < 1 || fusion_proj_len % fusion_k != 0)
        throw UsageError("fusion_proj_len must be a positive multiple of fusion_k");
    if (fusion_dropout < 0.0 || fusion_dropout >= 1.0)
        throw UsageError("fusion_dropout must be in [0,1)");
    if (num_classes != 2 && num_classes != 3)
        throw UsageError("num_classes must be 2 or 3");
    if (learning_rate <= 0.0) throw UsageError("learning_rate must be positive");
    if (epochs < 0) throw UsageError("epochs must be >= 0");
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    if (train_fraction <= 0.0 || val_fraction < 0.0 ||
        train_fraction + val_fraction > 1.0)
        throw UsageError("train/val fractions must be positive and sum to <= 1");
    if (related_to_scope != "global" && related_to_scope != "per_pair")
        throw UsageError("related_to_scope must be 'global' or 'per_pair'");
    if (mlp_hidden1 < 1 || mlp_hidden2 < 1)
        throw UsageError("mlp hidden widths must be >= 1");
    if (ablation_fc_width < 1) throw UsageError("ablation_fc_width must be >= 1");
}

void apply_config_override(PipelineConfig& c, const std::string& key, const std::string& v) {
    if (key == "max_triples") c.max_triples = to_int(key, v);
    else if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "related_to_scope") c.related_to_scope = v;
    else if (key == "cs_filters") c.cs_filters = to_int(key, v);
    else if (key == "fine_tune_hole") c.fine_tune_hole = to_bool(key, v);
    else if (key == "sentence_embed_dim") c.sentence_embed_dim = to_int(key, v);
    else if (key == "sentence_width") c.sentence_width = to_int(key, v);
    else if (key == "fusion_proj_len") c.fusion_proj_len = to_int(key, v);
    else if (key == "fusion_k") c.fusion_k = to_int(key, v);
    else if (key == "fusion_dropout") c.fusion_dropout = to_double(key, v);
    else if (key == "separate_projections") c.separate_projections = to_bool(key, v);
    else if (key == "ablation_fc_width") c.ablation_fc_width = to_int(key, v);
    else if (key == "mlp_hidden1") c.mlp_hidden1 = to_int(key, v);
    else if (key == "mlp_hidden2") c.mlp_hidden2 = to_int(key, v);
    else if (key == "num_classes") c.num_classes = to_int(key, v);
    else if (key == "learning_rate") c.learning_rate = to_double(key, v);
    else if (key == "epochs") c.epochs = to_int(key, v);
    else if (key == "batch_size") c.batch_size = to_int(key, v);
    else if (key == "train_fraction") c.train_fraction = to_double(key, v);
    else if (key == "val_fraction") c.val_fraction = to_double(key, v);
    else throw UsageError("unknown config key '" + key + "'");
}

PipelineConfig read_config_stream(std::istream& in) {
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string s = trim(line);
        if (s.empty()) continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw UsageError("malformed config line " + std::to_string(lineno));
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw UsageError("malformed config line " + std::to_string(lineno));
        apply_config_override(cfg, key, value);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    return read_config_stream(in);
}

std::map<std::string, std::string> config_to_map(const PipelineConfig& c) {
    std::map<std::string, std::string> m;
    auto num = [](double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    };
    m["max_triples"] = std::to_string(c.max_triples);
    m["seed"] = std::to_string(c.seed);
    m["related_to_scope"] = c.related_to_scope;
    m["cs_filters"] = std::to_string(c.cs_filters);
    m["fine_tune_hole"] = c.fine_tune_hole ? "true" : "false";
    m["sentence_embed_dim"] = std::to_string(c.sentence_embed_dim);
    m["sentence_width"] = std::to_string(c.sentence_width);
    m["fusion_proj_len"] = std::to_string(c.fusion_proj_len);
    m["fusion_k"] = std::to_string(c.fusion_k);
    m["fusion_dropout"] = num(c.fusion_dropout);
    m["separate_projections"] = c.separate_projections ? "true" : "false";
    m["ablation_fc_width"] = std::to_string(c.ablation_fc_width);
    m["mlp_hidden1"] = std::to_string(c.mlp_hidden1);
    m["mlp_hidden2"] = std::to_string(c.mlp_hidden2);
    m["num_classes"] = std::to_string(c.num_classes);
    m["learning_rate"] = num(c.learning_rate);
    m["epochs"] = std::to_string(c.epochs);
    m["batch_size"] = std::to_string(c.batch_size);
    m["train_fraction"] = num(c.train_fraction);
    m["val_fraction"] = num(c.val_fraction);
    return m;
}

void save_config(const PipelineConfig& cfg, std::ostream& out) {
    for (const auto& [k, v] : config_to_map(cfg)) out << k << " = " << v << "\n";
}

}  // namespace bicam
