#pragma once

#include <functional>
#include <random>

#include "bicam/tape.hpp"

namespace bicam {

// Scalar function built on a fresh tape from the given parameter leaves.
// Returns the loss node id.
using TapeFn = std::function<Tape::Id(Tape&, const std::vector<Tape::Id>&)>;

struct FdCheckOptions {
    double eps = 1e-5;
    // coordinates sampled per parameter; <=0 means all of them
    int coords_per_param = -1;
    uint64_t seed = 0;
    // optional filter: skip coordinate c of parameter p (kink avoidance)
    std::function<bool(int param, int64_t coord)> skip;
};

struct FdCoordReport {
    int param;
    int64_t coord;
    double analytic;
    double numeric;
    double rel_err;
};

struct FdReport {
    double max_rel_err = 0.0;
    std::vector<FdCoordReport> coords;
};

// Central-difference gradient check. rel_err per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
FdReport fd_check_report(const TapeFn& fn, const std::vector<Tensor>& params,
                         const FdCheckOptions& opt = {});

double fd_check(const TapeFn& fn, const std::vector<Tensor>& params,
                const FdCheckOptions& opt = {});

// CSV dump of a per-coordinate report: param,coord,analytic,numeric,rel_err
void write_fd_csv(const FdReport& report, const std::string& path);

}  // namespace bicam
