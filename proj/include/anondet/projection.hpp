#pragma once

// Information projection onto a mixture constraint:
//
//   f_Q(T) = min sum_k alpha_k D(U_k || Q_k)   s.t.   sum_k alpha_k U_k = T,
//
// solved through its concave dual in a shared tilt lambda:
//
//   g(lambda) = -sum_k alpha_k log2 Z_k(lambda) - <lambda, T>,
//   Z_k(lambda) = sum_x Q_k(x) 2^{-lambda(x)},   U_k(x) = Q_k(x) 2^{-lambda(x)} / Z_k.
//
// Edges (k, x) that carry zero mass in every feasible decomposition of T are
// removed up front (support reduction), which makes the reduced dual optimum
// attained and the Newton iteration well posed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "anondet/error.hpp"
#include "anondet/prob.hpp"

namespace anondet {

enum class ProjectionStatus { Converged, Boundary, Infeasible };

inline const char* to_string(ProjectionStatus s) {
    switch (s) {
    case ProjectionStatus::Converged: return "converged";
    case ProjectionStatus::Boundary: return "boundary";
    case ProjectionStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

struct ProjectionResult {
    double value = kInf;          ///< f_Q(T) in bits
    std::vector<Dist> u;          ///< optimizers U_k; empty when infeasible
    std::vector<double> tilt;     ///< lambda(x); +inf where T(x) = 0, NaN when infeasible
    ProjectionStatus status = ProjectionStatus::Infeasible;
    int iterations = 0;
    double residual = 0.0;        ///< max_x |sum_k alpha_k U_k(x) - T(x)|
    double duality_gap = 0.0;
};

struct ProjectionOptions {
    double grad_tol = 1e-10;
    int max_iter = 200;
    double accept_tol = 1e-9; ///< residual accepted after the iteration cap
    double gap_tol = 1e-8;
};

namespace detail {

inline constexpr double kFeasibilityTol = 1e-12;
inline constexpr double kEdgeFlowTol = 1e-13;
inline constexpr double kMaxTiltStep = 32.0;  ///< bits per Newton step

/// Max flow source -> group k (cap alpha_k) -> symbol x (if Q_k(x) > 0) -> sink (cap T(x)).
struct SupportFlow {
    double value = 0.0;
    std::vector<std::vector<double>> flow;   ///< K x d
    std::vector<std::vector<char>> allowed;  ///< K x d
};

inline SupportFlow max_support_flow(std::span<const double> t, std::span<const Dist> q, std::span<const double> alpha) {
    const std::size_t K = q.size(), d = t.size();
    const std::size_t N = K + d + 2, src = 0, sink = N - 1;
    auto gnode = [](std::size_t k) { return 1 + k; };
    auto xnode = [K](std::size_t x) { return 1 + K + x; };
    std::vector<std::vector<double>> cap(N, std::vector<double>(N, 0.0));
    SupportFlow out;
    out.allowed.assign(K, std::vector<char>(d, 0));
    for (std::size_t k = 0; k < K; ++k) {
        cap[src][gnode(k)] = alpha[k];
        if (alpha[k] <= 0.0) continue;
        for (std::size_t x = 0; x < d; ++x)
            if (q[k][x] > 0.0 && t[x] > 0.0) {
                out.allowed[k][x] = 1;
                cap[gnode(k)][xnode(x)] = 2.0;
            }
    }
    for (std::size_t x = 0; x < d; ++x) cap[xnode(x)][sink] = t[x];

    // Edmonds-Karp on the dense residual matrix.
    auto residual = cap;
    double total = 0.0;
    for (;;) {
        std::vector<std::size_t> parent(N, N);
        parent[src] = src;
        std::deque<std::size_t> queue{src};
        while (!queue.empty() && parent[sink] == N) {
            std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v = 0; v < N; ++v)
                if (parent[v] == N && residual[u][v] > 1e-15) {
                    parent[v] = u;
                    queue.push_back(v);
                }
        }
        if (parent[sink] == N) break;
        double push = kInf;
        for (std::size_t v = sink; v != src; v = parent[v]) push = std::min(push, residual[parent[v]][v]);
        for (std::size_t v = sink; v != src; v = parent[v]) {
            residual[parent[v]][v] -= push;
            residual[v][parent[v]] += push;
        }
        total += push;
    }
    out.value = total;
    out.flow.assign(K, std::vector<double>(d, 0.0));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t x = 0; x < d; ++x)
            if (out.allowed[k][x]) out.flow[k][x] = std::max(0.0, cap[gnode(k)][xnode(x)] - residual[gnode(k)][xnode(x)]);
    return out;
}

/// Edges that carry positive mass in some feasible decomposition: those with
/// flow, plus those closing a cycle x -> ... -> k in the residual graph.
inline std::vector<std::vector<char>> usable_edges(const SupportFlow& sf) {
    const std::size_t K = sf.flow.size(), d = K ? sf.flow.front().size() : 0;
    std::vector<std::vector<char>> usable(K, std::vector<char>(d, 0));
    for (std::size_t x0 = 0; x0 < d; ++x0) {
        // BFS over symbols and groups starting at symbol x0.
        std::vector<char> seen_g(K, 0), seen_x(d, 0);
        std::deque<std::pair<bool, std::size_t>> queue;  // (is_group, index)
        seen_x[x0] = 1;
        queue.emplace_back(false, x0);
        while (!queue.empty()) {
            auto [is_group, i] = queue.front();
            queue.pop_front();
            if (!is_group) {
                for (std::size_t k = 0; k < K; ++k)
                    if (!seen_g[k] && sf.flow[k][i] > kEdgeFlowTol) {
                        seen_g[k] = 1;
                        queue.emplace_back(true, k);
                    }
            } else {
                for (std::size_t x = 0; x < d; ++x)
                    if (!seen_x[x] && sf.allowed[i][x]) {
                        seen_x[x] = 1;
                        queue.emplace_back(false, x);
                    }
            }
        }
        for (std::size_t k = 0; k < K; ++k)
            if (sf.allowed[k][x0] && (sf.flow[k][x0] > kEdgeFlowTol || seen_g[k])) usable[k][x0] = 1;
    }
    return usable;
}

inline void check_projection_inputs(std::span<const double> t, std::span<const Dist> q, std::span<const double> alpha) {
    if (q.empty() || q.size() != alpha.size()) throw InvalidArgument("f_project: Q and alpha must have equal nonzero length");
    double s = 0.0;
    for (double a : alpha) {
        if (!(a >= 0.0)) throw InvalidArgument("f_project: alpha must be nonnegative");
        s += a;
    }
    if (std::abs(s - 1.0) > kDistTolerance) throw InvalidArgument("f_project: alpha must sum to 1");
    for (const auto& qk : q)
        if (qk.size() != t.size()) throw InvalidArgument("f_project: alphabet size mismatch");
}

} // namespace detail

/// True iff T = sum_k alpha_k U_k for some U_k << Q_k (T lies in C_Q).
inline bool in_domain(const Dist& t, std::span<const Dist> q, std::span<const double> alpha) {
    detail::check_projection_inputs(t.values(), q, alpha);
    return detail::max_support_flow(t.values(), q, alpha).value >= 1.0 - detail::kFeasibilityTol;
}

inline ProjectionResult f_project(const Dist& t, std::span<const Dist> q, std::span<const double> alpha,
                                  const ProjectionOptions& opt = {}) {
    detail::check_projection_inputs(t.values(), q, alpha);
    const std::size_t K = q.size(), d = t.size();
    ProjectionResult res;

    auto sf = detail::max_support_flow(t.values(), q, alpha);
    if (sf.value < 1.0 - detail::kFeasibilityTol) {
        res.tilt.assign(d, std::numeric_limits<double>::quiet_NaN());
        return res;
    }
    auto usable = detail::usable_edges(sf);

    bool reduced = false;
    for (std::size_t k = 0; k < K; ++k) {
        if (alpha[k] <= 0.0) continue;
        for (std::size_t x = 0; x < d; ++x)
            if (q[k][x] > 0.0 && !usable[k][x]) reduced = true;
    }

    // Connected components of the usable bipartite graph; one gauge per component.
    std::vector<int> comp_of_x(d, -1), comp_of_g(K, -1);
    int ncomp = 0;
    for (std::size_t x0 = 0; x0 < d; ++x0) {
        if (t[x0] <= 0.0 || comp_of_x[x0] >= 0) continue;
        std::deque<std::pair<bool, std::size_t>> queue{{false, x0}};
        comp_of_x[x0] = ncomp;
        while (!queue.empty()) {
            auto [is_group, i] = queue.front();
            queue.pop_front();
            if (!is_group) {
                for (std::size_t k = 0; k < K; ++k)
                    if (usable[k][i] && comp_of_g[k] < 0) {
                        comp_of_g[k] = ncomp;
                        queue.emplace_back(true, k);
                    }
            } else {
                for (std::size_t x = 0; x < d; ++x)
                    if (usable[i][x] && comp_of_x[x] < 0) {
                        comp_of_x[x] = ncomp;
                        queue.emplace_back(false, x);
                    }
            }
        }
        ++ncomp;
    }
    std::vector<int> free_index(d, -1);
    std::vector<std::size_t> free_syms;
    {
        std::vector<char> gauged(ncomp, 0);
        for (std::size_t x = 0; x < d; ++x) {
            if (t[x] <= 0.0) continue;
            if (!gauged[comp_of_x[x]]) {
                gauged[comp_of_x[x]] = 1;
                continue;
            }
            free_index[x] = static_cast<int>(free_syms.size());
            free_syms.push_back(x);
        }
    }
    const std::size_t m = free_syms.size();

    std::vector<double> lambda(d, 0.0);
    std::vector<std::vector<double>> u(K, std::vector<double>(d, 0.0));
    std::vector<double> log2z(K, 0.0);

    auto evaluate = [&](const std::vector<double>& lam) {
        double g = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (alpha[k] <= 0.0) continue;
            double hi = -kInf;
            for (std::size_t x = 0; x < d; ++x)
                if (usable[k][x]) hi = std::max(hi, std::log2(q[k][x]) - lam[x]);
            double z = 0.0;
            for (std::size_t x = 0; x < d; ++x) {
                u[k][x] = usable[k][x] ? std::exp2(std::log2(q[k][x]) - lam[x] - hi) : 0.0;
                z += u[k][x];
            }
            for (std::size_t x = 0; x < d; ++x) u[k][x] /= z;
            log2z[k] = hi + std::log2(z);
            g -= alpha[k] * log2z[k];
        }
        for (std::size_t x = 0; x < d; ++x)
            if (t[x] > 0.0) g -= lam[x] * t[x];
        return g;
    };
    auto gradient = [&]() {
        Eigen::VectorXd gr(m);
        for (std::size_t i = 0; i < m; ++i) {
            std::size_t x = free_syms[i];
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += alpha[k] * u[k][x];
            gr[i] = s - t[x];
        }
        return gr;
    };
    auto full_residual = [&]() {
        double r = 0.0;
        for (std::size_t x = 0; x < d; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k)
                if (alpha[k] > 0.0) s += alpha[k] * u[k][x];
            r = std::max(r, std::abs(s - t[x]));
        }
        return r;
    };

    double g = evaluate(lambda);
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        Eigen::VectorXd gr = gradient();
        if (m == 0 || gr.lpNorm<Eigen::Infinity>() <= opt.grad_tol) break;

        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t k = 0; k < K; ++k) {
            if (alpha[k] <= 0.0) continue;
            for (std::size_t i = 0; i < m; ++i) {
                double ui = u[k][free_syms[i]];
                if (ui == 0.0) continue;
                h(i, i) += alpha[k] * ui;
                for (std::size_t j = 0; j < m; ++j) h(i, j) -= alpha[k] * ui * u[k][free_syms[j]];
            }
        }
        h *= kLn2;

        Eigen::VectorXd step;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
        if (newton_ok) {
            step = ldlt.solve(gr);
            newton_ok = step.allFinite() && step.dot(gr) > 0.0;
        }
        if (!newton_ok) step = gr / kLn2;
        // Near-degenerate tilts make the Hessian tiny; cap the move in bits.
        const double len = step.lpNorm<Eigen::Infinity>();
        if (len > detail::kMaxTiltStep) step *= detail::kMaxTiltStep / len;

        const double slope = step.dot(gr);
        if (newton_ok && slope <= 1e-12 * std::max(1.0, std::abs(g))) {
            // Quadratic regime: the predicted gain is below the resolution of g.
            for (std::size_t i = 0; i < m; ++i) lambda[free_syms[i]] += step[i];
            g = evaluate(lambda);
            continue;
        }
        double tstep = 1.0;
        bool moved = false;
        std::vector<double> trial = lambda;
        for (int ls = 0; ls < 60; ++ls, tstep *= 0.5) {
            for (std::size_t i = 0; i < m; ++i) trial[free_syms[i]] = lambda[free_syms[i]] + tstep * step[i];
            double gt = evaluate(trial);
            if (std::isfinite(gt) && gt >= g + 1e-4 * tstep * slope) {
                lambda = trial;
                g = gt;
                moved = true;
                break;
            }
        }
        if (!moved) {
            evaluate(lambda);
            break;  // no representable ascent left; judged by the residual below
        }
    }
    res.iterations = it;

    res.residual = full_residual();
    if (res.residual > opt.accept_tol)
        throw SolverFailure("f_project: dual ascent did not converge (residual " + std::to_string(res.residual) +
                            " after " + std::to_string(it) + " iterations)");

    double primal = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        if (alpha[k] <= 0.0) {
            res.u.push_back(q[k]);
            continue;
        }
        Dist uk = Dist::normalized(u[k]);
        primal += alpha[k] * kl(uk, q[k]);
        res.u.push_back(std::move(uk));
    }
    res.duality_gap = std::abs(primal - g);
    if (res.duality_gap > opt.gap_tol)
        throw SolverFailure("f_project: duality gap " + std::to_string(res.duality_gap) + " exceeds tolerance");

    // The dual objective errs quadratically in the residual, the primal linearly.
    res.value = std::max(0.0, g);
    res.tilt.assign(d, kInf);
    for (std::size_t x = 0; x < d; ++x)
        if (t[x] > 0.0) res.tilt[x] = lambda[x];
    res.status = reduced ? ProjectionStatus::Boundary : ProjectionStatus::Converged;
    return res;
}

/// f_Q(T) value only.
inline double f_value(const Dist& t, std::span<const Dist> q, std::span<const double> alpha) {
    return f_project(t, q, alpha).value;
}

/// Type-II exponent of the optimal anonymous test: D_alpha(P_0; P_1) = f_{P_1}(M_0(alpha)).
inline double exponent_np(const Profile& profile) {
    return f_project(mixture(profile, 0), profile.p1(), profile.alpha()).value;
}

/// Type-II exponent when group labels are revealed: sum_k alpha_k D(P_{0;k} || P_{1;k}).
inline double exponent_informed(const Profile& profile) {
    double s = 0.0;
    for (std::size_t k = 0; k < profile.groups(); ++k) {
        if (profile.alpha()[k] <= 0.0) continue;
        s += profile.alpha()[k] * kl(profile.p0()[k], profile.p1()[k]);
    }
    return s;
}

} // namespace anondet
