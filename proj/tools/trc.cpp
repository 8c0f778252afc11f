// trc: tensor-ring completion command-line harness.
//
//   trc synth    --shape 10,10,10,10 --rank 4,5,4,5 --missing-rate 0.5 --seed 1 --out data/t
//   trc complete --input data/t_observed.trt --truth data/t_truth.trt --rank 4,5,4,5 --out run/t
//   trc sweep    --shape 10,10,10,10 --true-rank 4,5,4,5 --axis missing-rate --grid 0.1,0.5,0.9 --out sweep.csv
//   trc bench    --solver olrf --orders 3,4,5,6,7,8 --extent 6 --rank 3 --out bench.csv

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trc/experiment.hpp"

namespace {

using namespace trc;

struct SolverFlags {
    std::string rank;
    double lambda = 10.0;
    double mu0 = 1.0;
    double mu_max = 1e2;
    double rho = 1.01;
    double tol = 1e-6;
    std::size_t max_iters = 500;
    bool literal_max_mu = false;

    void attach(CLI::App* cmd, bool with_rank) {
        if (with_rank) cmd->add_option("--rank", rank, "TR-rank: one value (uniform) or one per mode")->required();
        cmd->add_option("--lambda", lambda, "fidelity weight")->capture_default_str();
        cmd->add_option("--mu0", mu0, "initial penalty")->capture_default_str();
        cmd->add_option("--mu-max", mu_max, "penalty cap")->capture_default_str();
        cmd->add_option("--rho", rho, "penalty growth factor")->capture_default_str();
        cmd->add_option("--tol", tol, "relative-change stopping tolerance")->capture_default_str();
        cmd->add_option("--max-iters", max_iters, "iteration cap")->capture_default_str();
        cmd->add_flag("--literal-max-mu", literal_max_mu, "update mu as max(rho*mu, mu_max) instead of min");
    }

    [[nodiscard]] SolverConfig config(std::size_t order, std::uint64_t seed) const {
        SolverConfig cfg;
        if (!rank.empty()) cfg.tr_rank = parse_rank(rank, order);
        cfg.lambda = lambda;
        cfg.mu0 = mu0;
        cfg.mu_max = mu_max;
        cfg.rho = rho;
        cfg.tol = tol;
        cfg.max_iters = max_iters;
        cfg.seed = seed;
        cfg.mu_update = literal_max_mu ? MuUpdate::LiteralMax : MuUpdate::Capped;
        return cfg;
    }
};

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument("bad number '" + item + "'");
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

// Rank grids are ';'-separated rank specs, each a single value or a comma list.
std::vector<TRRank> parse_rank_grid(const std::string& text, std::size_t order) {
    std::vector<TRRank> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) out.push_back(parse_rank(item, order));
    if (out.empty()) throw std::invalid_argument("empty rank grid");
    return out;
}

const std::map<std::string, SolverKind> solver_names{{"olrf", SolverKind::Olrf}, {"llrf", SolverKind::Llrf}};

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    return os;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-ring low-rank tensor completion"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a TR-structured ground truth and an observed file");
    std::string shape_text, rank_text, out_prefix;
    double missing_rate = 0.0, noise_std = 0.5;
    std::uint64_t seed = 0;
    synth->add_option("--shape", shape_text, "extents, e.g. 10,10,10,10")->required();
    synth->add_option("--rank", rank_text, "true TR-rank")->required();
    synth->add_option("--missing-rate", missing_rate, "fraction of entries removed")->capture_default_str();
    synth->add_option("--noise-std", noise_std, "stddev of the core entries")->capture_default_str();
    synth->add_option("--seed", seed)->capture_default_str();
    synth->add_option("--out", out_prefix, "output prefix (<out>_truth.trt, <out>_observed.trt)")->required();

    // complete
    auto* complete = app.add_subcommand("complete", "complete an observed tensor file");
    std::string input, truth, reshape_text, solver_name = "olrf";
    SolverFlags complete_flags;
    complete->add_option("--input", input, "observed tensor file (NaN = missing)")->required();
    complete->add_option("--truth", truth, "ground-truth file for RSE reporting");
    complete->add_option("--reshape", reshape_text, "canonical reshape before solving, e.g. 8,5,5,8,5,5,8,10");
    complete->add_option("--solver", solver_name)->check(CLI::IsMember({"olrf", "llrf"}))->capture_default_str();
    complete->add_option("--seed", seed)->capture_default_str();
    complete->add_option("--out", out_prefix, "output prefix")->required();
    complete_flags.attach(complete, true);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "repeat synthetic completions across a parameter grid");
    std::string axis_name = "missing-rate", grid_text, true_rank_text, sweep_solver = "both", sweep_out;
    std::size_t repeats = 10, jobs = 1;
    SolverFlags sweep_flags;
    double sweep_rate = 0.7;
    sweep->add_option("--shape", shape_text)->required();
    sweep->add_option("--true-rank", true_rank_text, "TR-rank of the generated ground truth")->required();
    sweep->add_option("--rank", sweep_flags.rank, "solver TR-rank (defaults to the true rank)");
    sweep->add_option("--axis", axis_name)
        ->check(CLI::IsMember({"missing-rate", "rank", "lambda"}))
        ->capture_default_str();
    sweep->add_option("--grid", grid_text,
                      "grid values; for --axis rank use ';' between rank specs, e.g. \"2;3;4,5,4,5;6\"")
        ->required();
    sweep->add_option("--missing-rate", sweep_rate, "missing rate when not swept")->capture_default_str();
    sweep->add_option("--solver", sweep_solver)->check(CLI::IsMember({"olrf", "llrf", "both"}))->capture_default_str();
    sweep->add_option("--repeats", repeats)->capture_default_str();
    sweep->add_option("--seed", seed, "base seed; run k uses seed + k")->capture_default_str();
    sweep->add_option("--jobs", jobs, "worker threads")->capture_default_str();
    sweep->add_option("--noise-std", noise_std, "stddev of the generating core entries")->capture_default_str();
    sweep->add_option("--out", sweep_out, "CSV path (stdout when omitted)");
    sweep_flags.attach(sweep, false);

    // bench
    auto* bench = app.add_subcommand("bench", "time single solver iterations across order and rank");
    BenchSpec bspec;
    std::string orders_text = "3,4,5,6,7,8", ranks_text = "2,3,4,5", bench_solver = "olrf", bench_out;
    bench->add_option("--solver", bench_solver)->check(CLI::IsMember({"olrf", "llrf"}))->capture_default_str();
    bench->add_option("--orders", orders_text)->capture_default_str();
    bench->add_option("--extent", bspec.extent)->capture_default_str();
    bench->add_option("--rank", bspec.rank, "rank for the order sweep")->capture_default_str();
    bench->add_option("--ranks", ranks_text, "ranks for the rank sweep")->capture_default_str();
    bench->add_option("--rank-order", bspec.rank_sweep_order, "order for the rank sweep")->capture_default_str();
    bench->add_option("--iters", bspec.iterations, "timed iterations per point")->capture_default_str();
    bench->add_option("--seed", bspec.seed)->capture_default_str();
    bench->add_option("--out", bench_out, "CSV path (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const Shape shape = parse_size_list(shape_text);
            SynthSpec spec{.shape = shape, .rank = parse_rank(rank_text, shape.size()), .missing_rate = missing_rate,
                           .core_stddev = noise_std, .seed = seed, .truth_path = out_prefix + "_truth.trt",
                           .observed_path = out_prefix + "_observed.trt"};
            const auto inst = cmd_synth(spec);
            std::cout << "wrote " << spec.truth_path.string() << " and " << spec.observed_path.string() << " ("
                      << inst.mask.missing_count() << " of " << inst.mask.size() << " entries missing)\n";
        } else if (complete->parsed()) {
            CompleteSpec spec;
            spec.input = input;
            if (!truth.empty()) spec.truth = truth;
            if (!reshape_text.empty()) spec.reshape = parse_size_list(reshape_text);
            spec.solver = solver_names.at(solver_name);
            const std::size_t order =
                spec.reshape ? spec.reshape->size() : read_tensor_raw(spec.input).order();
            spec.cfg = complete_flags.config(order, seed);
            spec.out_prefix = out_prefix;
            const auto res = cmd_complete(spec);
            std::cout << complete_csv_header << '\n';
            write_complete_row(std::cout, res, spec.solver, spec.cfg);
        } else if (sweep->parsed()) {
            SweepSpec spec;
            spec.shape = parse_size_list(shape_text);
            spec.true_rank = parse_rank(true_rank_text, spec.shape.size());
            spec.core_stddev = noise_std;
            spec.repeats = repeats;
            spec.seed = seed;
            spec.jobs = jobs;
            spec.base = sweep_flags.config(spec.shape.size(), seed);
            if (sweep_flags.rank.empty()) spec.base.tr_rank = spec.true_rank;
            if (sweep_solver != "both") spec.solvers = {solver_names.at(sweep_solver)};
            if (axis_name == "rank") {
                spec.axis = SweepAxis::Rank;
                for (auto& r : parse_rank_grid(grid_text, spec.shape.size()))
                    spec.grid.push_back({sweep_rate, spec.base.lambda, r});
            } else {
                spec.axis = axis_name == "lambda" ? SweepAxis::Lambda : SweepAxis::MissingRate;
                for (double v : parse_double_list(grid_text))
                    spec.grid.push_back(spec.axis == SweepAxis::Lambda
                                            ? SweepPoint{sweep_rate, v, spec.base.tr_rank}
                                            : SweepPoint{v, spec.base.lambda, spec.base.tr_rank});
            }
            const auto rows = cmd_sweep(spec);
            if (sweep_out.empty()) {
                write_sweep_csv(std::cout, spec.axis, rows);
            } else {
                auto os = open_out(sweep_out);
                write_sweep_csv(os, spec.axis, rows);
            }
        } else if (bench->parsed()) {
            bspec.solver = solver_names.at(bench_solver);
            bspec.orders = parse_size_list(orders_text);
            bspec.ranks = parse_size_list(ranks_text);
            const auto rows = cmd_bench(bspec);
            std::vector<double> x, y;
            for (const auto& r : rows)
                if (r.sweep == "order") {
                    x.push_back(static_cast<double>(r.order));
                    y.push_back(r.seconds_per_iter);
                }
            if (bench_out.empty()) {
                write_bench_csv(std::cout, rows);
            } else {
                auto os = open_out(bench_out);
                write_bench_csv(os, rows);
            }
            if (x.size() >= 2) std::cerr << "order sweep linear-fit R^2: " << linear_fit_r2(x, y) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "trc: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
