#include "bicam/fusion.hpp"

#include <cmath>

namespace bicam {

FusionParams::FusionParams(int x_dim, int cs_dim, int proj_len, int k, double dropout,
                           std::mt19937_64& rng)
    : pool_window(k), dropout_rate(dropout) {
    if (proj_len < 1 || k < 1 || proj_len % k != 0)
        throw UsageError("fusion: projection length must be a positive multiple of k");
    double bu = std::sqrt(6.0 / (x_dim + proj_len));
    double bv = std::sqrt(6.0 / (cs_dim + proj_len));
    u_proj = Parameter("fusion_u", random_init({proj_len, x_dim}, bu, rng));
    v_proj = Parameter("fusion_v", random_init({proj_len, cs_dim}, bv, rng));
}

Tape::Id bilinear_fuse(Tape& t, Tape::Id x, Tape::Id x_cs, const FusionParams& fp, bool train,
                       std::mt19937_64& rng) {
    auto had = t.mul(t.matmul(fp.u_proj.id, x), t.matmul(fp.v_proj.id, x_cs));
    auto dropped = t.dropout(had, fp.dropout_rate, rng, train);
    auto pooled = t.sum_pool(dropped, fp.pool_window);
    return t.l2_normalize(t.power_normalize(pooled));
}

FusionStrategy fusion_strategy_from_name(const std::string& name) {
    for (FusionStrategy s : all_fusion_strategies())
        if (fusion_strategy_name(s) == name) return s;
    throw UsageError("unknown fusion strategy: " + name);
}

std::string fusion_strategy_name(FusionStrategy s) {
    switch (s) {
        case FusionStrategy::Concat: return "concat";
        case FusionStrategy::FcConcat: return "fc_concat";
        case FusionStrategy::FcFcConcat: return "fc_fc_concat";
        case FusionStrategy::FcSum: return "fc_sum";
        case FusionStrategy::FcFcSum: return "fc_fc_sum";
        case FusionStrategy::FcProduct: return "fc_product";
        case FusionStrategy::FcFcProduct: return "fc_fc_product";
        case FusionStrategy::FcDiffConcatFcProduct: return "fc_diff_concat_fc_product";
        case FusionStrategy::FactorizedBilinear: return "factorized_bilinear";
    }
    throw UsageError("unknown fusion strategy enum value");
}

const std::vector<FusionStrategy>& all_fusion_strategies() {
    static const std::vector<FusionStrategy> all = {
        FusionStrategy::Concat,          FusionStrategy::FcConcat,
        FusionStrategy::FcFcConcat,      FusionStrategy::FcSum,
        FusionStrategy::FcFcSum,         FusionStrategy::FcProduct,
        FusionStrategy::FcFcProduct,     FusionStrategy::FcDiffConcatFcProduct,
        FusionStrategy::FactorizedBilinear};
    return all;
}

namespace {

Parameter fc_weight(const std::string& name, int out, int in, std::mt19937_64& rng) {
    return Parameter(name, random_init({out, in}, std::sqrt(6.0 / (in + out)), rng));
}

// FC block per the ablation protocol: linear + relu + dropout
Tape::Id fc(Tape& t, Tape::Id x, const Parameter& w, const Parameter& b, double dropout,
            bool train, std::mt19937_64& rng) {
    return t.dropout(t.relu(t.add(t.matmul(w.id, x), b.id)), dropout, rng, train);
}

}  // namespace

void AblationFusionParams::bind(Tape& t) {
    for (Parameter& p : weights) p.bind(t);
    if (strategy == FusionStrategy::FactorizedBilinear) bilinear.bind(t);
}

AblationFusionParams make_ablation_params(FusionStrategy s, int x_dim, int cs_dim, int fc_width,
                                          int bilinear_proj_len, int bilinear_k, double dropout,
                                          std::mt19937_64& rng) {
    AblationFusionParams p;
    p.strategy = s;
    p.dropout_rate = dropout;
    auto add_fc = [&](const std::string& name, int out, int in) {
        p.weights.push_back(fc_weight(name + "_w", out, in, rng));
        p.weights.push_back(Parameter(name + "_b", Tensor({out})));
    };
    switch (s) {
        case FusionStrategy::Concat:
            p.output_width = x_dim + cs_dim;
            break;
        case FusionStrategy::FcConcat:
            add_fc("fc1", fc_width, x_dim + cs_dim);
            p.output_width = fc_width;
            break;
        case FusionStrategy::FcFcConcat:
            add_fc("fc1", fc_width, x_dim + cs_dim);
            add_fc("fc2", fc_width, fc_width);
            p.output_width = fc_width;
            break;
        case FusionStrategy::FcSum:
        case FusionStrategy::FcProduct:
            add_fc("fx", fc_width, x_dim);
            add_fc("fcs", fc_width, cs_dim);
            p.output_width = fc_width;
            break;
        case FusionStrategy::FcFcSum:
        case FusionStrategy::FcFcProduct:
            add_fc("fx1", fc_width, x_dim);
            add_fc("fx2", fc_width, fc_width);
            add_fc("fcs1", fc_width, cs_dim);
            add_fc("fcs2", fc_width, fc_width);
            p.output_width = fc_width;
            break;
        case FusionStrategy::FcDiffConcatFcProduct:
            add_fc("dx", fc_width, x_dim);
            add_fc("dcs", fc_width, cs_dim);
            add_fc("px", fc_width, x_dim);
            add_fc("pcs", fc_width, cs_dim);
            p.output_width = 2 * fc_width;
            break;
        case FusionStrategy::FactorizedBilinear:
            p.bilinear = FusionParams(x_dim, cs_dim, bilinear_proj_len, bilinear_k, dropout, rng);
            p.output_width = p.bilinear.output_width();
            break;
    }
    return p;
}

Tape::Id fuse_ablation(Tape& t, Tape::Id x, Tape::Id x_cs, const AblationFusionParams& p,
                       bool train, std::mt19937_64& rng) {
    const auto& w = p.weights;
    double dr = p.dropout_rate;
    switch (p.strategy) {
        case FusionStrategy::Concat:
            return t.concat({x, x_cs});
        case FusionStrategy::FcConcat:
            return fc(t, t.concat({x, x_cs}), w[0], w[1], dr, train, rng);
        case FusionStrategy::FcFcConcat:
            return fc(t, fc(t, t.concat({x, x_cs}), w[0], w[1], dr, train, rng), w[2], w[3], dr,
                      train, rng);
        case FusionStrategy::FcSum:
            return t.add(fc(t, x, w[0], w[1], dr, train, rng),
                         fc(t, x_cs, w[2], w[3], dr, train, rng));
        case FusionStrategy::FcFcSum:
            return t.add(fc(t, fc(t, x, w[0], w[1], dr, train, rng), w[2], w[3], dr, train, rng),
                         fc(t, fc(t, x_cs, w[4], w[5], dr, train, rng), w[6], w[7], dr, train, rng));
        case FusionStrategy::FcProduct:
            return t.mul(fc(t, x, w[0], w[1], dr, train, rng),
                         fc(t, x_cs, w[2], w[3], dr, train, rng));
        case FusionStrategy::FcFcProduct:
            return t.mul(fc(t, fc(t, x, w[0], w[1], dr, train, rng), w[2], w[3], dr, train, rng),
                         fc(t, fc(t, x_cs, w[4], w[5], dr, train, rng), w[6], w[7], dr, train, rng));
        case FusionStrategy::FcDiffConcatFcProduct: {
            auto diff = t.sub(fc(t, x, w[0], w[1], dr, train, rng),
                              fc(t, x_cs, w[2], w[3], dr, train, rng));
            auto prod = t.mul(fc(t, x, w[4], w[5], dr, train, rng),
                              fc(t, x_cs, w[6], w[7], dr, train, rng));
            return t.concat({diff, prod});
        }
        case FusionStrategy::FactorizedBilinear:
            return bilinear_fuse(t, x, x_cs, p.bilinear, train, rng);
    }
    throw UsageError("unknown fusion strategy enum value");
}

MlpParams::MlpParams(int input_width, int hidden1, int hidden2, int num_classes,
                     std::mt19937_64& rng) {
    if (input_width < 1 || hidden1 < 1 || hidden2 < 1 || num_classes < 2)
        throw UsageError("bad MLP dimensions");
    w1 = fc_weight("mlp_w1", hidden1, input_width, rng);
    b1 = Parameter("mlp_b1", Tensor({hidden1}));
    w2 = fc_weight("mlp_w2", hidden2, hidden1, rng);
    b2 = Parameter("mlp_b2", Tensor({hidden2}));
    w_out = fc_weight("mlp_w_out", num_classes, hidden2, rng);
    b_out = Parameter("mlp_b_out", Tensor({num_classes}));
}

void MlpParams::bind(Tape& t) {
    w1.bind(t);
    b1.bind(t);
    w2.bind(t);
    b2.bind(t);
    w_out.bind(t);
    b_out.bind(t);
}

Tape::Id classify_logits(Tape& t, Tape::Id p, Tape::Id z_p, Tape::Id h, Tape::Id z_h,
                         const MlpParams& mp) {
    auto input = t.concat({p, z_p, h, z_h});
    auto h1 = t.tanh_op(t.add(t.matmul(mp.w1.id, input), mp.b1.id));
    auto h2 = t.tanh_op(t.add(t.matmul(mp.w2.id, h1), mp.b2.id));
    return t.add(t.matmul(mp.w_out.id, h2), mp.b_out.id);
}

std::vector<double> classify(Tape& t, Tape::Id p, Tape::Id z_p, Tape::Id h, Tape::Id z_h,
                             const MlpParams& mp) {
    return Tape::softmax(t.value(classify_logits(t, p, z_p, h, z_h, mp)));
}

Tape::Id nli_loss(Tape& t, Tape::Id logits, int label) {
    return t.softmax_cross_entropy(logits, label);
}

}  // namespace bicam
