#include "bicam/tape.hpp"

#include <algorithm>
#include <cmath>

namespace bicam {

Tape::Id Tape::push(Tensor v, bool requires_grad, std::function<void(Tape&)> back) {
    Node n;
    n.grad = Tensor::zeros(v.shape);
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Tensor v, bool requires_grad) {
    return push(std::move(v), requires_grad, nullptr);
}

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw UsageError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

Tape::Id Tape::add(Id a, Id b) {
    check(a); check(b);
    check_same_shape(v(a), v(b), "add");
    Tensor out = v(a);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += v(b).data[i];
    Id self = push(std::move(out), requires_grad(a) || requires_grad(b), nullptr);
    nodes_.back().back = [a, b, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) {
            t.g(a).data[i] += go.data[i];
            t.g(b).data[i] += go.data[i];
        }
    };
    return self;
}

Tape::Id Tape::sub(Id a, Id b) {
    check(a); check(b);
    check_same_shape(v(a), v(b), "sub");
    Tensor out = v(a);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= v(b).data[i];
    Id self = push(std::move(out), requires_grad(a) || requires_grad(b), nullptr);
    nodes_.back().back = [a, b, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) {
            t.g(a).data[i] += go.data[i];
            t.g(b).data[i] -= go.data[i];
        }
    };
    return self;
}

Tape::Id Tape::mul(Id a, Id b) {
    check(a); check(b);
    check_same_shape(v(a), v(b), "mul");
    Tensor out = v(a);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= v(b).data[i];
    Id self = push(std::move(out), requires_grad(a) || requires_grad(b), nullptr);
    nodes_.back().back = [a, b, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) {
            t.g(a).data[i] += go.data[i] * t.v(b).data[i];
            t.g(b).data[i] += go.data[i] * t.v(a).data[i];
        }
    };
    return self;
}

Tape::Id Tape::scale(Id a, double s) {
    check(a);
    Tensor out = v(a);
    for (double& x : out.data) x *= s;
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, s, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) t.g(a).data[i] += go.data[i] * s;
    };
    return self;
}

Tape::Id Tape::add_scalar(Id a, double s) {
    check(a);
    Tensor out = v(a);
    for (double& x : out.data) x += s;
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) t.g(a).data[i] += go.data[i];
    };
    return self;
}

Tape::Id Tape::relu(Id a) {
    check(a);
    Tensor out = v(a);
    for (double& x : out.data) x = x > 0 ? x : 0.0;
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i)
            if (t.v(a).data[i] > 0) t.g(a).data[i] += go.data[i];
    };
    return self;
}

Tape::Id Tape::tanh_op(Id a) {
    check(a);
    Tensor out = v(a);
    for (double& x : out.data) x = std::tanh(x);
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        const Tensor& go = t.g(self);
        const Tensor& y = t.v(self);
        for (size_t i = 0; i < go.data.size(); ++i)
            t.g(a).data[i] += go.data[i] * (1.0 - y.data[i] * y.data[i]);
    };
    return self;
}

Tape::Id Tape::logistic(Id a) {
    check(a);
    Tensor out = v(a);
    for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        const Tensor& go = t.g(self);
        const Tensor& y = t.v(self);
        for (size_t i = 0; i < go.data.size(); ++i)
            t.g(a).data[i] += go.data[i] * y.data[i] * (1.0 - y.data[i]);
    };
    return self;
}

Tape::Id Tape::matmul(Id a, Id b) {
    check(a); check(b);
    const Tensor& A = v(a);
    const Tensor& B = v(b);
    if (A.rank() != 2) throw UsageError("matmul: lhs must be rank 2, got " + A.shape_str());
    int m = A.dim(0), n = A.dim(1);
    bool vec_rhs = B.rank() == 1;
    int p = vec_rhs ? 1 : B.dim(1);
    int n2 = vec_rhs ? B.dim(0) : B.dim(0);
    if (n != n2)
        throw UsageError("matmul: inner dims " + A.shape_str() + " vs " + B.shape_str());
    Tensor out(vec_rhs ? std::vector<int>{m} : std::vector<int>{m, p});
    for (int i = 0; i < m; ++i)
        for (int k = 0; k < n; ++k) {
            double aik = A.data[static_cast<size_t>(i) * n + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < p; ++j)
                out.data[static_cast<size_t>(i) * p + j] += aik * B.data[static_cast<size_t>(k) * p + j];
        }
    Id self = push(std::move(out), requires_grad(a) || requires_grad(b), nullptr);
    nodes_.back().back = [a, b, self, m, n, p](Tape& t) {
        const Tensor& go = t.g(self);
        const Tensor& A2 = t.v(a);
        const Tensor& B2 = t.v(b);
        // dA = go * B^T ; dB = A^T * go
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < n; ++k) {
                double s = 0;
                for (int j = 0; j < p; ++j)
                    s += go.data[static_cast<size_t>(i) * p + j] * B2.data[static_cast<size_t>(k) * p + j];
                t.g(a).data[static_cast<size_t>(i) * n + k] += s;
            }
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < p; ++j) {
                double s = 0;
                for (int i = 0; i < m; ++i)
                    s += A2.data[static_cast<size_t>(i) * n + k] * go.data[static_cast<size_t>(i) * p + j];
                t.g(b).data[static_cast<size_t>(k) * p + j] += s;
            }
    };
    return self;
}

Tape::Id Tape::dot(Id a, Id b) {
    check(a); check(b);
    check_same_shape(v(a), v(b), "dot");
    double s = 0;
    for (size_t i = 0; i < v(a).data.size(); ++i) s += v(a).data[i] * v(b).data[i];
    Id self = push(Tensor::scalar(s), requires_grad(a) || requires_grad(b), nullptr);
    nodes_.back().back = [a, b, self](Tape& t) {
        double go = t.g(self).data[0];
        for (size_t i = 0; i < t.v(a).data.size(); ++i) {
            t.g(a).data[i] += go * t.v(b).data[i];
            t.g(b).data[i] += go * t.v(a).data[i];
        }
    };
    return self;
}

Tape::Id Tape::sum(Id a) {
    check(a);
    double s = 0;
    for (double x : v(a).data) s += x;
    Id self = push(Tensor::scalar(s), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        double go = t.g(self).data[0];
        for (double& gx : t.g(a).data) gx += go;
    };
    return self;
}

Tape::Id Tape::concat(const std::vector<Id>& parts) {
    if (parts.empty()) throw UsageError("concat: empty input");
    std::vector<double> out;
    bool rg = false;
    for (Id p : parts) {
        check(p);
        if (v(p).rank() != 1) throw UsageError("concat: rank-1 inputs only");
        out.insert(out.end(), v(p).data.begin(), v(p).data.end());
        rg = rg || requires_grad(p);
    }
    auto parts_copy = parts;
    Id self = push(Tensor::vec(std::move(out)), rg, nullptr);
    nodes_.back().back = [parts_copy, self](Tape& t) {
        const Tensor& go = t.g(self);
        size_t off = 0;
        for (Id p : parts_copy) {
            for (size_t i = 0; i < t.v(p).data.size(); ++i)
                t.g(p).data[i] += go.data[off + i];
            off += t.v(p).data.size();
        }
    };
    return self;
}

Tape::Id Tape::row(Id matrix, int r) {
    check(matrix);
    const Tensor& M = v(matrix);
    if (M.rank() != 2) throw UsageError("row: rank-2 input required");
    if (r < 0 || r >= M.dim(0)) throw UsageError("row: index out of range");
    int n = M.dim(1);
    Tensor out({n});
    for (int j = 0; j < n; ++j) out.data[j] = M.at(r, j);
    Id self = push(std::move(out), requires_grad(matrix), nullptr);
    nodes_.back().back = [matrix, r, n, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (int j = 0; j < n; ++j)
            t.g(matrix).data[static_cast<size_t>(r) * n + j] += go.data[static_cast<size_t>(j)];
    };
    return self;
}

Tape::Id Tape::reshape(Id a, std::vector<int> shape) {
    check(a);
    if (Tensor::count(shape) != v(a).size())
        throw UsageError("reshape: element count mismatch");
    Tensor out(std::move(shape), v(a).data);
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) t.g(a).data[i] += go.data[i];
    };
    return self;
}

Tape::Id Tape::transpose(Id a) {
    check(a);
    const Tensor& A = v(a);
    if (A.rank() != 2) throw UsageError("transpose: rank-2 input required");
    int m = A.dim(0), n = A.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, m, n, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) t.g(a).at(i, j) += go.at(j, i);
    };
    return self;
}

Tape::Id Tape::dropout(Id a, double rate, std::mt19937_64& rng, bool train) {
    check(a);
    if (rate < 0 || rate >= 1) throw UsageError("dropout: rate must be in [0,1)");
    if (!train || rate == 0.0) {
        // identity node keeps eval tapes structurally aligned with train tapes
        Tensor out = v(a);
        Id self = push(std::move(out), requires_grad(a), nullptr);
        nodes_.back().back = [a, self](Tape& t) {
            const Tensor& go = t.g(self);
            for (size_t i = 0; i < go.data.size(); ++i) t.g(a).data[i] += go.data[i];
        };
        return self;
    }
    // inverted dropout: kept units scaled by 1/(1-rate)
    double keep = 1.0 - rate;
    std::bernoulli_distribution coin(keep);
    std::vector<double> mask(v(a).data.size());
    for (double& m : mask) m = coin(rng) ? 1.0 / keep : 0.0;
    Tensor out = v(a);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= mask[i];
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, mask, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (size_t i = 0; i < go.data.size(); ++i) t.g(a).data[i] += go.data[i] * mask[i];
    };
    return self;
}

Tape::Id Tape::conv1d(Id x, Id w, Id b, int window, int stride) {
    check(x); check(w); check(b);
    const Tensor& X = v(x);
    const Tensor& W = v(w);
    const Tensor& B = v(b);
    if (X.rank() != 2 || W.rank() != 2 || B.rank() != 1)
        throw UsageError("conv1d: expected x:[d,n] w:[l,d*window] b:[l]");
    int d = X.dim(0), n = X.dim(1), l = W.dim(0);
    if (window <= 0 || stride <= 0) throw UsageError("conv1d: window/stride must be positive");
    if (n < window)
        throw UsageError("conv1d: sequence length " + std::to_string(n) +
                         " shorter than window " + std::to_string(window));
    if (W.dim(1) != d * window) throw UsageError("conv1d: filter width mismatch");
    if (B.dim(0) != l) throw UsageError("conv1d: bias width mismatch");
    int L = (n - window) / stride + 1;
    Tensor out({l, L});
    for (int f = 0; f < l; ++f)
        for (int t0 = 0; t0 < L; ++t0) {
            double s = B.data[static_cast<size_t>(f)];
            int col0 = t0 * stride;
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < window; ++j)
                    s += X.at(i, col0 + j) * W.at(f, i * window + j);
            out.at(f, t0) = s;
        }
    Id self = push(std::move(out), requires_grad(x) || requires_grad(w) || requires_grad(b), nullptr);
    nodes_.back().back = [x, w, b, window, stride, d, l, L, self](Tape& t) {
        const Tensor& go = t.g(self);
        const Tensor& X2 = t.v(x);
        const Tensor& W2 = t.v(w);
        for (int f = 0; f < l; ++f)
            for (int t0 = 0; t0 < L; ++t0) {
                double gof = go.at(f, t0);
                if (gof == 0.0) continue;
                int col0 = t0 * stride;
                t.g(b).data[static_cast<size_t>(f)] += gof;
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < window; ++j) {
                        t.g(w).at(f, i * window + j) += gof * X2.at(i, col0 + j);
                        t.g(x).at(i, col0 + j) += gof * W2.at(f, i * window + j);
                    }
            }
    };
    return self;
}

Tape::Id Tape::max_over_time(Id maps) {
    check(maps);
    const Tensor& M = v(maps);
    if (M.rank() != 2) throw UsageError("max_over_time: rank-2 input required");
    int l = M.dim(0), L = M.dim(1);
    if (L == 0) throw UsageError("max_over_time: empty feature map");
    Tensor out({l});
    std::vector<int> argmax(static_cast<size_t>(l));
    for (int f = 0; f < l; ++f) {
        int best = 0;
        for (int t0 = 1; t0 < L; ++t0)
            if (M.at(f, t0) > M.at(f, best)) best = t0;
        argmax[static_cast<size_t>(f)] = best;
        out.data[static_cast<size_t>(f)] = M.at(f, best);
    }
    Id self = push(std::move(out), requires_grad(maps), nullptr);
    nodes_.back().back = [maps, argmax, l, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (int f = 0; f < l; ++f)
            t.g(maps).at(f, argmax[static_cast<size_t>(f)]) += go.data[static_cast<size_t>(f)];
    };
    return self;
}

Tape::Id Tape::sum_pool(Id a, int k) {
    check(a);
    const Tensor& A = v(a);
    if (A.rank() != 1) throw UsageError("sum_pool: rank-1 input required");
    if (k <= 0 || A.dim(0) % k != 0)
        throw UsageError("sum_pool: length " + std::to_string(A.dim(0)) +
                         " not divisible by window " + std::to_string(k));
    int m = A.dim(0) / k;
    Tensor out({m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
            out.data[static_cast<size_t>(i)] += A.data[static_cast<size_t>(i) * k + j];
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, k, m, self](Tape& t) {
        const Tensor& go = t.g(self);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < k; ++j)
                t.g(a).data[static_cast<size_t>(i) * k + j] += go.data[static_cast<size_t>(i)];
    };
    return self;
}

Tape::Id Tape::power_normalize(Id a) {
    check(a);
    Tensor out = v(a);
    for (double& x : out.data) x = (x >= 0 ? 1.0 : -1.0) * std::sqrt(std::abs(x));
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, self](Tape& t) {
        const Tensor& go = t.g(self);
        const Tensor& y = t.v(self);
        // dy/dx = 0.5/|y| = 0.5/sqrt(|x|); subgradient 0 at x = 0
        for (size_t i = 0; i < go.data.size(); ++i) {
            double ay = std::abs(y.data[i]);
            if (ay > 0) t.g(a).data[i] += go.data[i] * 0.5 / ay;
        }
    };
    return self;
}

Tape::Id Tape::l2_normalize(Id a, bool strict) {
    check(a);
    const Tensor& A = v(a);
    double sq = 0;
    for (double x : A.data) sq += x * x;
    double norm = std::sqrt(sq);
    if (strict && norm == 0.0) throw NumericError("zero-norm normalization");
    const double eps = 1e-12;
    double inv = 1.0 / (norm + eps);
    Tensor out = A;
    for (double& x : out.data) x *= inv;
    Id self = push(std::move(out), requires_grad(a), nullptr);
    nodes_.back().back = [a, norm, inv, self](Tape& t) {
        if (norm == 0.0) return;  // subgradient 0 at the origin
        const Tensor& go = t.g(self);
        const Tensor& x = t.v(a);
        double gdotx = 0;
        for (size_t i = 0; i < go.data.size(); ++i) gdotx += go.data[i] * x.data[i];
        double c = gdotx * inv * inv / norm;
        for (size_t i = 0; i < go.data.size(); ++i)
            t.g(a).data[i] += go.data[i] * inv - x.data[i] * c;
    };
    return self;
}

Tape::Id Tape::circ_corr(Id h, Id t) {
    check(h); check(t);
    const Tensor& H = v(h);
    const Tensor& T = v(t);
    if (H.rank() != 1 || T.rank() != 1 || H.dim(0) != T.dim(0))
        throw UsageError("circ_corr: dimension mismatch " + H.shape_str() + " vs " + T.shape_str());
    int d = H.dim(0);
    Tensor out({d});
    for (int i = 0; i < d; ++i) {
        double s = 0;
        for (int k = 0; k < d; ++k) s += H.data[static_cast<size_t>(k)] * T.data[static_cast<size_t>((k + i) % d)];
        out.data[static_cast<size_t>(i)] = s;
    }
    Id self = push(std::move(out), requires_grad(h) || requires_grad(t), nullptr);
    nodes_.back().back = [h, t, d, self](Tape& tp) {
        const Tensor& go = tp.g(self);
        const Tensor& H2 = tp.v(h);
        const Tensor& T2 = tp.v(t);
        for (int i = 0; i < d; ++i) {
            double gi = go.data[static_cast<size_t>(i)];
            if (gi == 0.0) continue;
            for (int k = 0; k < d; ++k) {
                tp.g(h).data[static_cast<size_t>(k)] += gi * T2.data[static_cast<size_t>((k + i) % d)];
                tp.g(t).data[static_cast<size_t>((k + i) % d)] += gi * H2.data[static_cast<size_t>(k)];
            }
        }
    };
    return self;
}

std::vector<double> Tape::softmax(const Tensor& logits) {
    double mx = logits.data[0];
    for (double x : logits.data) mx = std::max(mx, x);
    std::vector<double> p(logits.data.size());
    double z = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits.data[i] - mx);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

Tape::Id Tape::softmax_cross_entropy(Id logits, int label) {
    check(logits);
    const Tensor& L = v(logits);
    if (L.rank() != 1) throw UsageError("softmax_cross_entropy: rank-1 logits required");
    if (label < 0 || label >= L.dim(0)) throw UsageError("softmax_cross_entropy: label out of range");
    std::vector<double> p = softmax(L);
    double loss = -std::log(std::max(p[static_cast<size_t>(label)], 1e-300));
    Id self = push(Tensor::scalar(loss), requires_grad(logits), nullptr);
    nodes_.back().back = [logits, label, p, self](Tape& t) {
        double go = t.g(self).data[0];
        for (size_t i = 0; i < p.size(); ++i) {
            double delta = (static_cast<int>(i) == label) ? 1.0 : 0.0;
            t.g(logits).data[i] += go * (p[i] - delta);
        }
    };
    return self;
}

void Tape::backward(Id loss) {
    check(loss);
    if (v(loss).size() != 1) throw UsageError("backward: loss must be a scalar");
    for (Node& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    nodes_[static_cast<size_t>(loss)].grad.data[0] = 1.0;
    for (Id i = loss; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.back) n.back(*this);
    }
}

}  // namespace bicam
