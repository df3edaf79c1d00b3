#include "bicam/fd_check.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace bicam {

namespace {

double eval_value(const TapeFn& fn, const std::vector<Tensor>& params) {
    Tape t;
    std::vector<Tape::Id> ids;
    ids.reserve(params.size());
    for (const Tensor& p : params) ids.push_back(t.leaf(p));
    Tape::Id loss = fn(t, ids);
    const Tensor& val = t.value(loss);
    if (val.size() != 1) throw UsageError("fd_check: function must be scalar-valued");
    double v = val.data[0];
    if (!std::isfinite(v)) throw NumericError("fd_check: non-finite function value");
    return v;
}

}  // namespace

FdReport fd_check_report(const TapeFn& fn, const std::vector<Tensor>& params,
                         const FdCheckOptions& opt) {
    // analytic gradients from one tape evaluation
    Tape t;
    std::vector<Tape::Id> ids;
    for (const Tensor& p : params) ids.push_back(t.leaf(p));
    Tape::Id loss = fn(t, ids);
    if (t.value(loss).size() != 1) throw UsageError("fd_check: function must be scalar-valued");
    t.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Tape::Id id : ids) analytic.push_back(t.grad(id));

    std::mt19937_64 rng(opt.seed);
    FdReport report;
    std::vector<Tensor> work = params;
    for (size_t p = 0; p < params.size(); ++p) {
        int64_t n = params[p].size();
        std::vector<int64_t> coords;
        if (opt.coords_per_param <= 0 || opt.coords_per_param >= n) {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            std::uniform_int_distribution<int64_t> pick(0, n - 1);
            for (int i = 0; i < opt.coords_per_param; ++i) coords.push_back(pick(rng));
        }
        for (int64_t c : coords) {
            if (opt.skip && opt.skip(static_cast<int>(p), c)) continue;
            double orig = work[p].data[static_cast<size_t>(c)];
            work[p].data[static_cast<size_t>(c)] = orig + opt.eps;
            double fp = eval_value(fn, work);
            work[p].data[static_cast<size_t>(c)] = orig - opt.eps;
            double fm = eval_value(fn, work);
            work[p].data[static_cast<size_t>(c)] = orig;
            double numeric = (fp - fm) / (2.0 * opt.eps);
            double a = analytic[p].data[static_cast<size_t>(c)];
            double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            report.coords.push_back({static_cast<int>(p), c, a, numeric, rel});
            report.max_rel_err = std::max(report.max_rel_err, rel);
        }
    }
    return report;
}

double fd_check(const TapeFn& fn, const std::vector<Tensor>& params,
                const FdCheckOptions& opt) {
    return fd_check_report(fn, params, opt).max_rel_err;
}

void write_fd_csv(const FdReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "param,coord,analytic,numeric,rel_err\n";
    out.precision(17);
    for (const FdCoordReport& c : report.coords)
        out << c.param << ',' << c.coord << ',' << c.analytic << ','
            << c.numeric << ',' << c.rel_err << '\n';
}

}  // namespace bicam
