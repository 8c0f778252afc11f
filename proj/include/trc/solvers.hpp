#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "trc/prox.hpp"
#include "trc/tensor.hpp"
#include "trc/tr.hpp"

namespace trc {

/// How the penalty parameter grows between iterations.
enum class MuUpdate {
    Capped,     ///< mu <- min(rho * mu, mu_max)
    LiteralMax, ///< mu <- max(rho * mu, mu_max)
};

struct SolverConfig {
    TRRank tr_rank;
    double lambda = 10.0;
    double mu0 = 1.0;
    double mu_max = 1e2;
    double rho = 1.01;
    double tol = 1e-6;
    std::size_t max_iters = 500;
    std::uint64_t seed = 0;
    MuUpdate mu_update = MuUpdate::Capped;

    void validate(std::size_t order) const {
        if (tr_rank.size() != order)
            throw DimensionError("rank vector of length " + std::to_string(tr_rank.size()) +
                                 " is incompatible with tensor order " + std::to_string(order));
        if (order < 2) throw DimensionError("tensor ring completion needs order >= 2");
        if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
        if (!(mu0 > 0.0)) throw std::invalid_argument("mu0 must be positive");
        if (!(mu_max >= mu0)) throw std::invalid_argument("mu_max must be >= mu0");
        if (!(rho >= 1.0)) throw std::invalid_argument("rho must be >= 1");
        if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
        if (max_iters == 0) throw std::invalid_argument("max_iters must be positive");
    }

    [[nodiscard]] double next_mu(double mu) const {
        return mu_update == MuUpdate::Capped ? std::min(rho * mu, mu_max) : std::max(rho * mu, mu_max);
    }
};

using CoreTriple = std::array<DenseTensor, 3>;

struct OlrfState {
    DenseTensor x;
    TRCores cores;
    std::vector<CoreTriple> aux;         // M_{n,i}
    std::vector<CoreTriple> multipliers; // Y_{n,i}
    double mu = 1.0;
    std::size_t iter = 0;
};

struct LlrfState {
    DenseTensor x;
    TRCores cores;
    std::vector<CoreTriple> latent;          // W_{n,i}
    std::vector<DenseTensor> multipliers;    // Y_n
    double mu = 1.0;
    std::size_t iter = 0;
};

struct SolveReport {
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> rel_change_history;
    std::vector<double> rse_history; // filled when ground truth is supplied
    DenseTensor final_x;
    TRCores final_cores;
    double final_mu = 0.0;
    /// OLRF: max_{n,i} ||M_ni - G_n|| / ||G_n||; LLRF: max_n ||sum_i W_ni - G_n|| / ||G_n||.
    double consistency_residual = 0.0;
    double wall_time = 0.0;
};

/// Raised by the divergence guard.
class DivergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// ||estimate - truth||_F / ||truth||_F over every entry.
inline double rse(const DenseTensor& estimate, const DenseTensor& truth) {
    estimate.require_same_shape(truth, "rse");
    const double denom = frobenius_norm(truth);
    if (denom == 0.0) throw std::domain_error("rse: ground truth has zero norm");
    return frobenius_norm(estimate - truth) / denom;
}

/// Relative error restricted to the entries flagged in `scope`.
inline double rse(const DenseTensor& estimate, const DenseTensor& truth, const ObservationMask& scope) {
    estimate.require_same_shape(truth, "rse");
    if (scope.shape() != truth.shape()) throw DimensionError("rse: scope shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (!scope.observed(k)) continue;
        const double d = estimate[k] - truth[k];
        num += d * d;
        den += truth[k] * truth[k];
    }
    if (den == 0.0) throw std::domain_error("rse: ground truth has zero norm on the scope");
    return std::sqrt(num / den);
}

/// Relative error over the entries missing from `observed`.
inline double rse_missing(const DenseTensor& estimate, const DenseTensor& truth,
                          const ObservationMask& observed) {
    return rse(estimate, truth, observed.complement());
}

namespace detail {

inline void check_inputs(const DenseTensor& observed, const ObservationMask& mask, const SolverConfig& cfg) {
    if (observed.shape() != mask.shape())
        throw DimensionError("mask shape " + shape_string(mask.shape()) + " does not match observed tensor " +
                             shape_string(observed.shape()));
    if (mask.empty()) throw std::invalid_argument("observation mask is empty");
    for (std::size_t k = 0; k < observed.size(); ++k)
        if (mask.observed(k) && !std::isfinite(observed[k]))
            throw std::invalid_argument("observed tensor has a non-finite value on an observed entry");
    cfg.validate(observed.order());
}

inline CoreTriple zero_triple(const DenseTensor& like) {
    return {DenseTensor(like.shape()), DenseTensor(like.shape()), DenseTensor(like.shape())};
}

inline double observed_norm(const DenseTensor& observed, const ObservationMask& mask) {
    const double v = frobenius_norm(project(observed, mask));
    return v > 0.0 ? v : 1.0;
}

} // namespace detail

/// Cores ~ N(0,1) from cfg.seed, auxiliaries and multipliers zero, x = P_Omega(T)
/// with missing entries zero, mu = mu0.
inline OlrfState init_olrf(const DenseTensor& observed, const ObservationMask& mask, const SolverConfig& cfg) {
    detail::check_inputs(observed, mask, cfg);
    OlrfState s;
    s.x = project(observed, mask);
    s.cores = random_cores(observed.shape(), cfg.tr_rank, 0.0, 1.0, cfg.seed);
    for (const auto& g : s.cores.cores()) {
        s.aux.push_back(detail::zero_triple(g));
        s.multipliers.push_back(detail::zero_triple(g));
    }
    s.mu = cfg.mu0;
    return s;
}

inline LlrfState init_llrf(const DenseTensor& observed, const ObservationMask& mask, const SolverConfig& cfg) {
    detail::check_inputs(observed, mask, cfg);
    LlrfState s;
    s.x = project(observed, mask);
    s.cores = random_cores(observed.shape(), cfg.tr_rank, 0.0, 1.0, cfg.seed);
    for (const auto& g : s.cores.cores()) {
        s.latent.push_back(detail::zero_triple(g));
        s.multipliers.emplace_back(g.shape());
    }
    s.mu = cfg.mu0;
    return s;
}

/// One ADMM sweep of the overlapped model. Returns ||X^{k+1} - X^k|| / ||P_Omega(T)||.
inline double olrf_step(OlrfState& s, const DenseTensor& observed, const ObservationMask& mask,
                        const SolverConfig& cfg) {
    const double mu = s.mu;
    for (std::size_t n = 1; n <= s.cores.order(); ++n) {
        auto& aux = s.aux[n - 1];
        auto& ys = s.multipliers[n - 1];
        DenseTensor g = core_update_olrf(s.x, s.cores, aux, ys, n, cfg.lambda, mu);
        for (std::size_t i = 0; i < 3; ++i) aux[i] = svt_mode(g - ys[i] * (1.0 / mu), i + 1, 1.0 / mu);
        for (std::size_t i = 0; i < 3; ++i) ys[i] += (aux[i] - g) * mu;
        s.cores.set_core(n, std::move(g));
    }
    DenseTensor x_next = merge_observed(observed, reconstruct(s.cores), mask);
    const double change = frobenius_norm(x_next - s.x) / detail::observed_norm(observed, mask);
    s.x = std::move(x_next);
    s.mu = cfg.next_mu(mu);
    ++s.iter;
    return change;
}

/// One ADMM sweep of the latent model; the three latent updates per core are
/// Gauss-Seidel (each uses the freshest siblings).
inline double llrf_step(LlrfState& s, const DenseTensor& observed, const ObservationMask& mask,
                        const SolverConfig& cfg) {
    const double mu = s.mu;
    for (std::size_t n = 1; n <= s.cores.order(); ++n) {
        auto& w = s.latent[n - 1];
        auto& y = s.multipliers[n - 1];
        DenseTensor g = core_update_llrf(s.x, s.cores, w, y, n, cfg.lambda, mu);
        const DenseTensor target = g - y * (1.0 / mu);
        for (std::size_t i = 0; i < 3; ++i) {
            DenseTensor v = target;
            for (std::size_t j = 0; j < 3; ++j)
                if (j != i) v -= w[j];
            w[i] = svt_mode(v, i + 1, 1.0 / mu);
        }
        y += (w[0] + w[1] + w[2] - g) * mu;
        s.cores.set_core(n, std::move(g));
    }
    DenseTensor x_next = merge_observed(observed, reconstruct(s.cores), mask);
    const double change = frobenius_norm(x_next - s.x) / detail::observed_norm(observed, mask);
    s.x = std::move(x_next);
    s.mu = cfg.next_mu(mu);
    ++s.iter;
    return change;
}

inline double consistency_residual(const OlrfState& s) {
    double worst = 0.0;
    for (std::size_t n = 1; n <= s.cores.order(); ++n) {
        const auto& g = s.cores.core(n);
        const double gn = std::max(frobenius_norm(g), std::numeric_limits<double>::min());
        for (const auto& m : s.aux[n - 1]) worst = std::max(worst, frobenius_norm(m - g) / gn);
    }
    return worst;
}

inline double consistency_residual(const LlrfState& s) {
    double worst = 0.0;
    for (std::size_t n = 1; n <= s.cores.order(); ++n) {
        const auto& g = s.cores.core(n);
        const auto& w = s.latent[n - 1];
        const double gn = std::max(frobenius_norm(g), std::numeric_limits<double>::min());
        worst = std::max(worst, frobenius_norm(w[0] + w[1] + w[2] - g) / gn);
    }
    return worst;
}

/// Optional hooks for a solve run.
struct SolveOptions {
    const DenseTensor* truth = nullptr; ///< when set, rse_history tracks RSE over all entries
    double divergence_threshold = 1e3;
    std::size_t divergence_patience = 10;
};

namespace detail {

template <class State, class Step>
SolveReport run_admm(State state, const DenseTensor& observed, const ObservationMask& mask,
                     const SolverConfig& cfg, const SolveOptions& opts, Step step) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    if (opts.truth) opts.truth->require_same_shape(observed, "solve truth");
    SolveReport rep;
    std::size_t blowups = 0;
    while (state.iter < cfg.max_iters) {
        const double change = step(state, observed, mask, cfg);
        rep.rel_change_history.push_back(change);
        if (opts.truth) rep.rse_history.push_back(rse(state.x, *opts.truth));
        if (!std::isfinite(change)) throw DivergenceError("solver produced a non-finite iterate at iteration " +
                                                          std::to_string(state.iter));
        blowups = change > opts.divergence_threshold ? blowups + 1 : 0;
        if (blowups >= opts.divergence_patience)
            throw DivergenceError("relative change exceeded " + std::to_string(opts.divergence_threshold) +
                                  " for " + std::to_string(blowups) + " consecutive iterations (iteration " +
                                  std::to_string(state.iter) + ", last change " + std::to_string(change) +
                                  "); check lambda, mu and the rank vector");
        if (change < cfg.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.iterations = state.iter;
    rep.final_mu = state.mu;
    rep.consistency_residual = consistency_residual(state);
    rep.final_x = std::move(state.x);
    rep.final_cores = std::move(state.cores);
    rep.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    return rep;
}

} // namespace detail

/// Tensor-ring completion with overlapped nuclear norms on the three
/// unfoldings of every core.
inline SolveReport solve_olrf(const DenseTensor& observed, const ObservationMask& mask, const SolverConfig& cfg,
                              const SolveOptions& opts = {}) {
    return detail::run_admm(init_olrf(observed, mask, cfg), observed, mask, cfg, opts,
                            [](OlrfState& s, const DenseTensor& t, const ObservationMask& m,
                               const SolverConfig& c) { return olrf_step(s, t, m, c); });
}

/// Tensor-ring completion with each core split into three latent parts, one
/// low-rank per unfolding.
inline SolveReport solve_llrf(const DenseTensor& observed, const ObservationMask& mask, const SolverConfig& cfg,
                              const SolveOptions& opts = {}) {
    return detail::run_admm(init_llrf(observed, mask, cfg), observed, mask, cfg, opts,
                            [](LlrfState& s, const DenseTensor& t, const ObservationMask& m,
                               const SolverConfig& c) { return llrf_step(s, t, m, c); });
}

enum class SolverKind { Olrf, Llrf };

inline const char* to_string(SolverKind k) { return k == SolverKind::Olrf ? "olrf" : "llrf"; }

inline SolveReport solve(SolverKind kind, const DenseTensor& observed, const ObservationMask& mask,
                         const SolverConfig& cfg, const SolveOptions& opts = {}) {
    return kind == SolverKind::Olrf ? solve_olrf(observed, mask, cfg, opts) : solve_llrf(observed, mask, cfg, opts);
}

} // namespace trc
