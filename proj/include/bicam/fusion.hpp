#pragma once

#include <random>
#include <string>
#include <vector>

#include "bicam/encoders.hpp"
#include "bicam/tape.hpp"

namespace bicam {

// Factorized bilinear pooling: project, Hadamard, dropout, sum-pool k,
// power-normalize, l2-normalize.
struct FusionParams {
    Parameter u_proj;  // (o*k) x dim(x)
    Parameter v_proj;  // (o*k) x dim(x_cs)
    int pool_window = 4;
    double dropout_rate = 0.3;

    FusionParams() = default;
    FusionParams(int x_dim, int cs_dim, int proj_len, int k, double dropout,
                 std::mt19937_64& rng);

    int output_width() const { return u_proj.value.dim(0) / pool_window; }
    void bind(Tape& t) {
        u_proj.bind(t);
        v_proj.bind(t);
    }
};

Tape::Id bilinear_fuse(Tape& t, Tape::Id x, Tape::Id x_cs, const FusionParams& fp, bool train,
                       std::mt19937_64& rng);

// Ablation fusion strategies. FC = linear + relu + dropout.
enum class FusionStrategy {
    Concat,
    FcConcat,
    FcFcConcat,
    FcSum,
    FcFcSum,
    FcProduct,
    FcFcProduct,
    FcDiffConcatFcProduct,
    FactorizedBilinear,
};

FusionStrategy fusion_strategy_from_name(const std::string& name);
std::string fusion_strategy_name(FusionStrategy s);
const std::vector<FusionStrategy>& all_fusion_strategies();

struct AblationFusionParams {
    FusionStrategy strategy = FusionStrategy::Concat;
    std::vector<Parameter> weights;  // FC weight/bias pairs, strategy-dependent
    FusionParams bilinear;           // used by FactorizedBilinear
    double dropout_rate = 0.3;
    int output_width = 0;

    void bind(Tape& t);
};

AblationFusionParams make_ablation_params(FusionStrategy s, int x_dim, int cs_dim, int fc_width,
                                          int bilinear_proj_len, int bilinear_k, double dropout,
                                          std::mt19937_64& rng);

Tape::Id fuse_ablation(Tape& t, Tape::Id x, Tape::Id x_cs, const AblationFusionParams& params,
                       bool train, std::mt19937_64& rng);

// Two tanh hidden layers + softmax output over [p; z_p; h; z_h].
struct MlpParams {
    Parameter w1, b1, w2, b2, w_out, b_out;

    MlpParams() = default;
    MlpParams(int input_width, int hidden1, int hidden2, int num_classes, std::mt19937_64& rng);

    int num_classes() const { return w_out.value.dim(0); }
    void bind(Tape& t);
};

// Returns the logits node; softmax/cross-entropy applied by the caller.
Tape::Id classify_logits(Tape& t, Tape::Id p, Tape::Id z_p, Tape::Id h, Tape::Id z_h,
                         const MlpParams& mp);

std::vector<double> classify(Tape& t, Tape::Id p, Tape::Id z_p, Tape::Id h, Tape::Id z_h,
                             const MlpParams& mp);

Tape::Id nli_loss(Tape& t, Tape::Id logits, int label);

}  // namespace bicam
