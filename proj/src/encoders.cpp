#include "bicam/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace bicam {

void Parameter::adagrad_step(const Tape& t, double lr, double eps) {
    if (id < 0) throw UsageError("parameter not bound to a tape");
    const Tensor& g = t.grad(id);
    for (size_t i = 0; i < value.data.size(); ++i) {
        double gv = g.data[i];
        if (gv == 0.0) continue;
        accum.data[i] += gv * gv;
        value.data[i] -= lr * gv / (std::sqrt(accum.data[i]) + eps);
    }
}

Tensor random_init(std::vector<int> shape, double bound, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& x : t.data) x = uni(rng);
    return t;
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// out-of-vocabulary tokens get a reproducible pseudo-random vector keyed on
// the token string itself
std::vector<double> oov_vector(const std::string& token, int dim) {
    std::mt19937_64 rng(fnv1a(token));
    double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> uni(-bound, bound);
    std::vector<double> v(static_cast<size_t>(dim));
    for (double& x : v) x = uni(rng);
    return v;
}

}  // namespace

TripleSequence build_triple_sequence(const std::vector<std::array<std::string, 3>>& triples,
                                     const HoleModel& model, int max_triples) {
    if (max_triples < 1) throw UsageError("max_triples must be >= 1");
    int d = model.dim;
    int n = 3 * max_triples;
    TripleSequence seq;
    seq.tokens.assign(static_cast<size_t>(n), "");
    seq.embedding_matrix = Tensor({d, n});
    seq.num_triples = std::min<int>(static_cast<int>(triples.size()), max_triples);
    for (int m = 0; m < seq.num_triples; ++m) {
        for (int slot = 0; slot < 3; ++slot) {
            const std::string& token = triples[static_cast<size_t>(m)][static_cast<size_t>(slot)];
            int col = 3 * m + slot;
            seq.tokens[static_cast<size_t>(col)] = token;
            std::vector<double> vec;
            if (slot == 1) {
                auto row = model.relation_row(token);
                vec = row ? model.relation_vec(*row) : oov_vector(token, d);
            } else {
                auto row = model.entity_row(token);
                vec = row ? model.entity_vec(*row) : oov_vector(token, d);
            }
            for (int i = 0; i < d; ++i) seq.embedding_matrix.at(i, col) = vec[static_cast<size_t>(i)];
        }
    }
    return seq;
}

CommonsenseEncoderParams::CommonsenseEncoderParams(int num_filters, int dim,
                                                   std::mt19937_64& rng) {
    if (num_filters < 1) throw UsageError("need at least one filter");
    double bound = std::sqrt(6.0 / (dim * 3.0 + num_filters));
    filters = Parameter("cs_filters", random_init({num_filters, dim * 3}, bound, rng));
    bias = Parameter("cs_bias", Tensor({num_filters}));
}

Tape::Id encode_commonsense(Tape& t, Tape::Id x, const CommonsenseEncoderParams& params) {
    auto maps = t.conv1d(x, params.filters.id, params.bias.id, CommonsenseEncoderParams::window,
                         CommonsenseEncoderParams::stride);
    return t.max_over_time(t.relu(maps));
}

Tensor encode_commonsense_value(const TripleSequence& seq, CommonsenseEncoderParams& params) {
    Tape t;
    params.bind(t);
    Tape::Id x = t.constant(seq.embedding_matrix);
    return t.value(encode_commonsense(t, x, params));
}

MeanPoolEncoder::MeanPoolEncoder(const std::vector<std::string>& vocab, int embed_dim,
                                 int output_dim, std::mt19937_64& rng)
    : vocab_(vocab) {
    if (embed_dim < 1 || output_dim < 1) throw UsageError("bad sentence encoder dims");
    double bound_e = std::sqrt(6.0 / embed_dim);
    double bound_p = std::sqrt(6.0 / (embed_dim + output_dim));
    word_emb_ = Parameter("sent_word_emb",
                          random_init({static_cast<int>(vocab.size()) + 1, embed_dim}, bound_e, rng));
    proj_ = Parameter("sent_proj", random_init({output_dim, embed_dim}, bound_p, rng));
    bias_ = Parameter("sent_bias", Tensor({output_dim}));
}

void MeanPoolEncoder::bind(Tape& t) {
    word_emb_.bind(t);
    proj_.bind(t);
    bias_.bind(t);
}

Tape::Id MeanPoolEncoder::encode(Tape& t, const std::vector<std::string>& tokens) const {
    std::vector<Tape::Id> rows;
    for (const std::string& tok : tokens) {
        auto it = std::find(vocab_.begin(), vocab_.end(), tok);
        int row = it == vocab_.end() ? 0 : static_cast<int>(it - vocab_.begin()) + 1;
        rows.push_back(t.row(word_emb_.id, row));
    }
    Tape::Id pooled;
    if (rows.empty()) {
        pooled = t.scale(t.row(word_emb_.id, 0), 0.0);  // empty sentence -> zero embedding
    } else {
        pooled = rows[0];
        for (size_t i = 1; i < rows.size(); ++i) pooled = t.add(pooled, rows[i]);
        pooled = t.scale(pooled, 1.0 / static_cast<double>(rows.size()));
    }
    return t.relu(t.add(t.matmul(proj_.id, pooled), bias_.id));
}

}  // namespace bicam
