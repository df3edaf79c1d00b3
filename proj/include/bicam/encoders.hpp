#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bicam/hole.hpp"
#include "bicam/tape.hpp"

namespace bicam {

// Trainable value + AdaGrad accumulator, bound to a fresh tape each step.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor accum;
    Tape::Id id = -1;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        accum = Tensor::zeros(value.shape);
    }

    void bind(Tape& t) { id = t.leaf(value); }
    void bind_frozen(Tape& t) { id = t.constant(value); }
    void adagrad_step(const Tape& t, double lr, double eps = 1e-8);
};

Tensor random_init(std::vector<int> shape, double bound, std::mt19937_64& rng);

// Triple tokens laid out head, relation, tail per triple; n = 3 * max_triples
// columns, zero-padded. Column i holds the token's pretrained HolE vector.
struct TripleSequence {
    std::vector<std::string> tokens;  // padded slots hold ""
    Tensor embedding_matrix;          // d x n
    int num_triples = 0;
};

TripleSequence build_triple_sequence(const std::vector<std::array<std::string, 3>>& triples,
                                     const HoleModel& model, int max_triples);

// Stride-3 window-3 convolutional feature detectors over the triple sequence.
struct CommonsenseEncoderParams {
    static constexpr int window = 3;
    static constexpr int stride = 3;
    Parameter filters;  // l x (d*3)
    Parameter bias;     // l

    CommonsenseEncoderParams() = default;
    CommonsenseEncoderParams(int num_filters, int dim, std::mt19937_64& rng);

    int num_filters() const { return filters.value.dim(0); }
    void bind(Tape& t) {
        filters.bind(t);
        bias.bind(t);
    }
};

// relu conv + max-over-time; one scalar per filter.
Tape::Id encode_commonsense(Tape& t, Tape::Id x, const CommonsenseEncoderParams& params);

// Convenience wrapper for frozen-parameter forward evaluation.
Tensor encode_commonsense_value(const TripleSequence& seq, CommonsenseEncoderParams& params);

class SentenceEncoder {
public:
    virtual ~SentenceEncoder() = default;
    virtual int output_width() const = 0;
    virtual void bind(Tape& t) = 0;
    virtual Tape::Id encode(Tape& t, const std::vector<std::string>& tokens) const = 0;
    virtual std::vector<Parameter*> parameters() = 0;
};

// Reference encoder: mean of trainable word vectors, linear map, relu.
class MeanPoolEncoder : public SentenceEncoder {
public:
    MeanPoolEncoder(const std::vector<std::string>& vocab, int embed_dim, int output_dim,
                    std::mt19937_64& rng);

    int output_width() const override { return proj_.value.dim(0); }
    void bind(Tape& t) override;
    Tape::Id encode(Tape& t, const std::vector<std::string>& tokens) const override;
    std::vector<Parameter*> parameters() override { return {&word_emb_, &proj_, &bias_}; }

private:
    std::vector<std::string> vocab_;
    Parameter word_emb_;  // |V|+1 x e; row 0 is the OOV/empty slot
    Parameter proj_;      // p x e
    Parameter bias_;      // p
};

}  // namespace bicam
