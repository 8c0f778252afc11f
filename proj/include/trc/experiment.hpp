#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "trc/io.hpp"
#include "trc/solvers.hpp"
#include "trc/synthetic.hpp"

namespace trc {

/// CSV outputs carry this version in their leading comment line.
inline constexpr int csv_schema_version = 1;

namespace csv {

inline std::string num(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(10) << v;
    return os.str();
}

inline std::string join(const std::vector<std::size_t>& v, char sep = 'x') {
    std::ostringstream os;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) os << sep;
        os << v[k];
    }
    return os.str();
}

inline void preamble(std::ostream& os, const char* kind, const char* header) {
    os << "# trc-csv v" << csv_schema_version << ' ' << kind << '\n' << header << '\n';
}

} // namespace csv

inline std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("not an integer list: '" + text + "'");
        }
        if (used != item.size() || v <= 0) throw std::invalid_argument("expected positive integers in '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw std::invalid_argument("empty integer list");
    return out;
}

/// A single value expands to a uniform rank of the given order.
inline TRRank parse_rank(const std::string& text, std::size_t order) {
    auto v = parse_size_list(text);
    if (v.size() == 1) return TRRank::uniform(order, v[0]);
    if (v.size() != order)
        throw DimensionError("rank vector '" + text + "' has " + std::to_string(v.size()) +
                             " entries but the tensor has order " + std::to_string(order));
    return TRRank(std::move(v));
}

// ---------------------------------------------------------------------------
// synth

struct SynthSpec {
    Shape shape;
    TRRank rank;
    double missing_rate = 0.0;
    double core_stddev = 0.5;
    std::uint64_t seed = 0;
    std::filesystem::path truth_path;
    std::filesystem::path observed_path;
};

inline SyntheticInstance cmd_synth(const SynthSpec& spec) {
    SyntheticInstance inst = make_synthetic(spec.shape, spec.rank, spec.missing_rate, spec.seed, spec.core_stddev);
    write_tensor(inst.truth, spec.truth_path);
    write_tensor(with_missing_markers(inst.truth, inst.mask), spec.observed_path);
    return inst;
}

// ---------------------------------------------------------------------------
// complete

struct CompleteSpec {
    std::filesystem::path input;
    std::optional<std::filesystem::path> truth;
    std::optional<Shape> reshape; ///< canonical reshape applied before solving
    SolverKind solver = SolverKind::Olrf;
    SolverConfig cfg;
    std::string out_prefix; ///< writes <prefix>_completed.trt, <prefix>_core<n>.trt, <prefix>.csv
};

struct CompleteResult {
    SolveReport report;
    ObservationMask mask;     ///< in the solved shape
    double missing_rate = 0.0;
    double rse_all = std::numeric_limits<double>::quiet_NaN();
    double rse_missing = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr const char* complete_csv_header =
    "solver,shape,ranks,missing_rate,lambda,iterations,converged,rse_all,rse_missing,wall_time";

inline void write_complete_row(std::ostream& os, const CompleteResult& r, SolverKind solver,
                               const SolverConfig& cfg) {
    os << to_string(solver) << ',' << csv::join(r.report.final_x.shape()) << ','
       << csv::join(cfg.tr_rank.values()) << ',' << csv::num(r.missing_rate) << ',' << csv::num(cfg.lambda)
       << ',' << r.report.iterations << ',' << (r.report.converged ? 1 : 0) << ',' << csv::num(r.rse_all) << ','
       << csv::num(r.rse_missing) << ',' << csv::num(r.report.wall_time) << '\n';
}

/// Runs one completion on in-memory data. `truth` may be null.
inline CompleteResult complete_tensor(const DenseTensor& observed, const ObservationMask& mask,
                                      const DenseTensor* truth, SolverKind solver, const SolverConfig& cfg) {
    CompleteResult res{.report = solve(solver, observed, mask, cfg), .mask = mask};
    res.missing_rate = static_cast<double>(mask.missing_count()) / static_cast<double>(mask.size());
    if (truth) {
        res.rse_all = rse(res.report.final_x, *truth);
        if (mask.missing_count() > 0) res.rse_missing = rse_missing(res.report.final_x, *truth, mask);
    }
    return res;
}

inline CompleteResult cmd_complete(const CompleteSpec& spec) {
    ObservedTensor in = read_tensor(spec.input);
    const Shape original = in.values.shape();
    std::optional<DenseTensor> truth;
    if (spec.truth) {
        truth = read_ground_truth(*spec.truth);
        if (truth->shape() != original)
            throw DimensionError("truth shape " + shape_string(truth->shape()) + " does not match input " +
                                 shape_string(original));
    } else if (in.mask.missing_count() == 0) {
        truth = in.values;
    }
    DenseTensor observed = in.values;
    ObservationMask mask = in.mask;
    if (spec.reshape) {
        if (shape_numel(*spec.reshape) != observed.size())
            throw DimensionError("reshape target " + shape_string(*spec.reshape) + " has " +
                                 std::to_string(shape_numel(*spec.reshape)) + " entries but the input " +
                                 shape_string(original) + " has " + std::to_string(observed.size()));
        observed = observed.reshaped(*spec.reshape);
        if (truth) truth = truth->reshaped(*spec.reshape);
        mask = ObservationMask::from_finite(observed);
    }
    CompleteResult res = complete_tensor(observed, mask, truth ? &*truth : nullptr, spec.solver, spec.cfg);

    write_tensor(res.report.final_x.reshaped(original), spec.out_prefix + "_completed.trt");
    for (std::size_t n = 1; n <= res.report.final_cores.order(); ++n)
        write_tensor(res.report.final_cores.core(n), spec.out_prefix + "_core" + std::to_string(n) + ".trt");
    std::ofstream csv_out(spec.out_prefix + ".csv", std::ios::trunc);
    if (!csv_out) throw std::runtime_error("cannot write " + spec.out_prefix + ".csv");
    csv::preamble(csv_out, "complete", complete_csv_header);
    write_complete_row(csv_out, res, spec.solver, spec.cfg);
    return res;
}

// ---------------------------------------------------------------------------
// sweep

enum class SweepAxis { MissingRate, Rank, Lambda };

inline const char* to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::MissingRate: return "missing_rate";
    case SweepAxis::Rank: return "rank";
    case SweepAxis::Lambda: return "lambda";
    }
    return "?";
}

struct SweepPoint {
    double missing_rate;
    double lambda;
    TRRank rank;
};

struct SweepSpec {
    Shape shape;
    TRRank true_rank;
    double core_stddev = 0.5;
    SweepAxis axis = SweepAxis::MissingRate;
    std::vector<SweepPoint> grid;
    std::vector<SolverKind> solvers{SolverKind::Olrf, SolverKind::Llrf};
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    SolverConfig base; ///< lambda and tr_rank are taken from each grid point
    std::size_t jobs = 1;
};

struct SweepRow {
    SweepPoint point;
    SolverKind solver;
    std::size_t repeats;
    double mean_rse;
    double std_rse;
    double mean_iterations;
    std::size_t converged_runs;
    double mean_wall_time;
    std::vector<double> rse_runs;
};

inline constexpr const char* sweep_csv_header =
    "axis,value,missing_rate,lambda,ranks,ssr,solver,repeats,mean_rse,std_rse,mean_iterations,converged_runs,"
    "mean_wall_time";

inline double sweep_value(SweepAxis axis, const SweepPoint& p) {
    switch (axis) {
    case SweepAxis::MissingRate: return p.missing_rate;
    case SweepAxis::Lambda: return p.lambda;
    case SweepAxis::Rank: return p.rank.ssr();
    }
    return 0.0;
}

inline void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows) {
    csv::preamble(os, "sweep", sweep_csv_header);
    for (const auto& r : rows)
        os << to_string(axis) << ',' << csv::num(sweep_value(axis, r.point)) << ',' << csv::num(r.point.missing_rate)
           << ',' << csv::num(r.point.lambda) << ',' << csv::join(r.point.rank.values()) << ','
           << csv::num(r.point.rank.ssr()) << ',' << to_string(r.solver) << ',' << r.repeats << ','
           << csv::num(r.mean_rse) << ',' << csv::num(r.std_rse) << ',' << csv::num(r.mean_iterations) << ','
           << r.converged_runs << ',' << csv::num(r.mean_wall_time) << '\n';
}

/// Run k of every grid point uses seed + k for the ground truth, the mask and
/// the solver initialization. RSE is measured on the missing entries (on all
/// entries when nothing is missing). Rows come out in grid order, solvers
/// inner, regardless of `jobs`.
inline std::vector<SweepRow> cmd_sweep(const SweepSpec& spec) {
    if (spec.grid.empty()) throw std::invalid_argument("sweep grid is empty");
    if (spec.repeats == 0) throw std::invalid_argument("repeats must be at least 1");
    if (spec.solvers.empty()) throw std::invalid_argument("no solver selected");
    for (const auto& p : spec.grid) {
        SolverConfig c = spec.base;
        c.tr_rank = p.rank;
        c.lambda = p.lambda;
        c.validate(spec.shape.size());
    }

    struct Task {
        std::size_t point, solver, run;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < spec.grid.size(); ++p)
        for (std::size_t s = 0; s < spec.solvers.size(); ++s)
            for (std::size_t r = 0; r < spec.repeats; ++r) tasks.push_back({p, s, r});

    struct Outcome {
        double rse = 0.0, wall = 0.0;
        std::size_t iters = 0;
        bool converged = false;
    };
    std::vector<Outcome> outcomes(tasks.size());

    auto run_task = [&](const Task& t) {
        const SweepPoint& p = spec.grid[t.point];
        const std::uint64_t seed = spec.seed + t.run;
        const SyntheticInstance inst = make_synthetic(spec.shape, spec.true_rank, p.missing_rate, seed, spec.core_stddev);
        SolverConfig cfg = spec.base;
        cfg.tr_rank = p.rank;
        cfg.lambda = p.lambda;
        cfg.seed = seed;
        const SolveReport rep = solve(spec.solvers[t.solver], with_missing_markers(inst.truth, inst.mask), inst.mask, cfg);
        Outcome o;
        o.rse = inst.mask.missing_count() > 0 ? rse_missing(rep.final_x, inst.truth, inst.mask)
                                              : rse(rep.final_x, inst.truth);
        o.wall = rep.wall_time;
        o.iters = rep.iterations;
        o.converged = rep.converged;
        return o;
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(spec.jobs, tasks.size()));
    if (workers == 1) {
        for (std::size_t k = 0; k < tasks.size(); ++k) outcomes[k] = run_task(tasks[k]);
    } else {
        std::mutex lock;
        std::size_t next = 0;
        std::exception_ptr failure;
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (;;) {
                        std::size_t k;
                        {
                            std::lock_guard g(lock);
                            if (next >= tasks.size() || failure) return;
                            k = next++;
                        }
                        try {
                            outcomes[k] = run_task(tasks[k]);
                        } catch (...) {
                            std::lock_guard g(lock);
                            if (!failure) failure = std::current_exception();
                        }
                    }
                });
        }
        if (failure) std::rethrow_exception(failure);
    }

    std::vector<SweepRow> rows;
    for (std::size_t p = 0; p < spec.grid.size(); ++p)
        for (std::size_t s = 0; s < spec.solvers.size(); ++s) {
            SweepRow row{.point = spec.grid[p], .solver = spec.solvers[s], .repeats = spec.repeats,
                         .mean_rse = 0, .std_rse = 0, .mean_iterations = 0, .converged_runs = 0,
                         .mean_wall_time = 0, .rse_runs = {}};
            for (std::size_t k = 0; k < tasks.size(); ++k) {
                if (tasks[k].point != p || tasks[k].solver != s) continue;
                const auto& o = outcomes[k];
                row.rse_runs.push_back(o.rse);
                row.mean_iterations += static_cast<double>(o.iters);
                row.mean_wall_time += o.wall;
                row.converged_runs += o.converged ? 1 : 0;
            }
            const double count = static_cast<double>(spec.repeats);
            for (double v : row.rse_runs) row.mean_rse += v;
            row.mean_rse /= count;
            for (double v : row.rse_runs) row.std_rse += (v - row.mean_rse) * (v - row.mean_rse);
            row.std_rse = spec.repeats > 1 ? std::sqrt(row.std_rse / (count - 1.0)) : 0.0;
            row.mean_iterations /= count;
            row.mean_wall_time /= count;
            rows.push_back(std::move(row));
        }
    return rows;
}

// ---------------------------------------------------------------------------
// bench

struct BenchSpec {
    SolverKind solver = SolverKind::Olrf;
    std::vector<std::size_t> orders{3, 4, 5, 6, 7, 8};
    std::size_t extent = 6;
    std::size_t rank = 3;                       ///< rank used for the order sweep
    std::vector<std::size_t> ranks{2, 3, 4, 5}; ///< ranks for the rank sweep
    std::size_t rank_sweep_order = 4;
    std::size_t iterations = 3; ///< timed iterations per point, after one warm-up
    double missing_rate = 0.5;
    std::uint64_t seed = 0;
};

struct BenchRow {
    std::string sweep; ///< "order" or "rank"
    SolverKind solver;
    std::size_t order, extent, rank, iterations;
    double seconds_per_iter;
};

inline constexpr const char* bench_csv_header = "sweep,solver,order,extent,rank,iterations,seconds_per_iteration";

/// Mean wall time of one ADMM sweep (all cores, x update) at the given size.
inline double time_iteration(SolverKind solver, std::size_t order, std::size_t extent, std::size_t rank,
                             std::size_t iterations, double missing_rate, std::uint64_t seed) {
    using Clock = std::chrono::steady_clock;
    const Shape shape(order, extent);
    const SyntheticInstance inst = make_synthetic(shape, TRRank::uniform(order, rank), missing_rate, seed);
    const DenseTensor observed = with_missing_markers(inst.truth, inst.mask);
    SolverConfig cfg;
    cfg.tr_rank = TRRank::uniform(order, rank);
    cfg.seed = seed;
    auto timed = [&](auto& state, auto step) {
        step(state, observed, inst.mask, cfg);
        const auto t0 = Clock::now();
        for (std::size_t k = 0; k < iterations; ++k) step(state, observed, inst.mask, cfg);
        return std::chrono::duration<double>(Clock::now() - t0).count() / static_cast<double>(iterations);
    };
    if (solver == SolverKind::Olrf) {
        auto s = init_olrf(observed, inst.mask, cfg);
        return timed(s, [](auto&... a) { return olrf_step(a...); });
    }
    auto s = init_llrf(observed, inst.mask, cfg);
    return timed(s, [](auto&... a) { return llrf_step(a...); });
}

inline std::vector<BenchRow> cmd_bench(const BenchSpec& spec) {
    if (spec.iterations == 0) throw std::invalid_argument("bench needs at least one timed iteration");
    std::vector<BenchRow> rows;
    for (std::size_t n : spec.orders)
        rows.push_back({"order", spec.solver, n, spec.extent, spec.rank, spec.iterations,
                        time_iteration(spec.solver, n, spec.extent, spec.rank, spec.iterations, spec.missing_rate,
                                       spec.seed)});
    for (std::size_t r : spec.ranks)
        rows.push_back({"rank", spec.solver, spec.rank_sweep_order, spec.extent, r, spec.iterations,
                        time_iteration(spec.solver, spec.rank_sweep_order, spec.extent, r, spec.iterations,
                                       spec.missing_rate, spec.seed)});
    return rows;
}

inline void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
    csv::preamble(os, "bench", bench_csv_header);
    for (const auto& r : rows)
        os << r.sweep << ',' << to_string(r.solver) << ',' << r.order << ',' << r.extent << ',' << r.rank << ','
           << r.iterations << ',' << csv::num(r.seconds_per_iter) << '\n';
}

/// Coefficient of determination of the least-squares line through (x, y).
inline double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear fit needs >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear fit needs distinct x values");
    if (syy == 0.0) return 1.0;
    return sxy * sxy / (sxx * syy);
}

} // namespace trc
