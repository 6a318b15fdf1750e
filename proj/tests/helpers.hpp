#pragma once

// Shared utilities for the unit and acceptance suites: independent oracles
// (kept deliberately separate from the library's own algorithms) and small
// fixture builders. Everything here is deterministic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "igaa/bisim.hpp"
#include "igaa/nsi.hpp"
#include "igaa/rng.hpp"

namespace testutil {

inline double rel_err(double got, double want, double floor = 1e-8) {
    const double scale = std::max({std::fabs(got), std::fabs(want), floor});
    return std::fabs(got - want) / scale;
}

// ---------------------------------------------------------------------------
// Primal transportation oracle (MODI / u-v method on the transportation
// simplex). Independent of the library's dual solver: it works on the primal
// flow polytope with a spanning-tree basis. Exact up to floating-point
// round-off for desk-sized instances.
// ---------------------------------------------------------------------------

class TransportOracle {
public:
    // w_a: supplies (sum 1), w_b: demands (sum 1), cost[i][j] >= 0.
    // Returns the minimal total transport cost.
    static double solve(const std::vector<double>& w_a, const std::vector<double>& w_b,
                        const std::vector<std::vector<double>>& cost) {
        const std::size_t m = w_a.size(), n = w_b.size();
        if (m == 0 || n == 0) throw std::invalid_argument("transport: empty marginals");

        std::vector<double> a = w_a, b = w_b;
        std::vector<std::vector<double>> flow(m, std::vector<double>(n, 0.0));
        std::vector<std::vector<bool>> basic(m, std::vector<bool>(n, false));

        // Northwest-corner starting basis. Ties are broken toward the row so
        // the basis always has exactly m + n - 1 cells (zero flows allowed).
        std::size_t i = 0, j = 0;
        while (true) {
            const double q = std::min(a[i], b[j]);
            flow[i][j] = q;
            basic[i][j] = true;
            a[i] -= q;
            b[j] -= q;
            if (i + 1 == m && j + 1 == n) break;
            if (a[i] <= b[j] && i + 1 < m) {
                ++i;
            } else {
                ++j;
            }
        }

        const double kTol = 1e-12;
        for (int iter = 0; iter < 20000; ++iter) {
            // Potentials from the basis tree: u_i + v_j = c_ij on basic cells.
            std::vector<double> u(m, std::numeric_limits<double>::quiet_NaN());
            std::vector<double> v(n, std::numeric_limits<double>::quiet_NaN());
            u[0] = 0.0;
            bool progress = true;
            while (progress) {
                progress = false;
                for (std::size_t r = 0; r < m; ++r) {
                    for (std::size_t c = 0; c < n; ++c) {
                        if (!basic[r][c]) continue;
                        if (!std::isnan(u[r]) && std::isnan(v[c])) {
                            v[c] = cost[r][c] - u[r];
                            progress = true;
                        } else if (std::isnan(u[r]) && !std::isnan(v[c])) {
                            u[r] = cost[r][c] - v[c];
                            progress = true;
                        }
                    }
                }
            }
            for (std::size_t r = 0; r < m; ++r)
                if (std::isnan(u[r])) throw std::runtime_error("transport: basis not spanning");
            for (std::size_t c = 0; c < n; ++c)
                if (std::isnan(v[c])) throw std::runtime_error("transport: basis not spanning");

            // Most negative reduced cost on a nonbasic cell.
            double best = -kTol;
            std::size_t bi = m, bj = n;
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (basic[r][c]) continue;
                    const double rc = cost[r][c] - u[r] - v[c];
                    if (rc < best) {
                        best = rc;
                        bi = r;
                        bj = c;
                    }
                }
            }
            if (bi == m) break;  // optimal

            // Cycle: unique path from row bi to column bj through basic cells.
            const std::vector<std::pair<std::size_t, std::size_t>> path =
                basis_path(basic, m, n, bi, bj);
            // Entering cell gets '+'; alternate along the path.
            double theta = std::numeric_limits<double>::infinity();
            for (std::size_t k = 1; k < path.size(); k += 2) {
                theta = std::min(theta, flow[path[k].first][path[k].second]);
            }
            flow[bi][bj] = 0.0;
            basic[bi][bj] = true;
            bool removed = false;
            for (std::size_t k = 0; k < path.size(); ++k) {
                double& f = flow[path[k].first][path[k].second];
                if (k % 2 == 0) {
                    f += theta;
                } else {
                    f -= theta;
                    if (!removed && f <= kTol) {
                        f = std::max(f, 0.0);
                        basic[path[k].first][path[k].second] = false;
                        removed = true;
                    }
                }
            }
            if (!removed) throw std::runtime_error("transport: no leaving variable");
        }

        double total = 0.0;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) total += flow[r][c] * cost[r][c];
        return total;
    }

private:
    // Alternating row/column path through basic cells from row `bi` back to
    // column `bj`, starting with the entering cell (bi, bj). Returned as the
    // cycle [(bi,bj), (i1,bj1), ...] with signs +,-,+,- in order.
    static std::vector<std::pair<std::size_t, std::size_t>> basis_path(
        const std::vector<std::vector<bool>>& basic, std::size_t m, std::size_t n,
        std::size_t bi, std::size_t bj) {
        // Nodes: rows [0, m), columns [m, m+n). Edges are basic cells.
        // Find the tree path from node row(bi) to node col(bj).
        const std::size_t N = m + n;
        std::vector<int> parent(N, -1);
        std::vector<bool> seen(N, false);
        std::deque<std::size_t> queue;
        queue.push_back(bi);
        seen[bi] = true;
        while (!queue.empty()) {
            const std::size_t node = queue.front();
            queue.pop_front();
            if (node < m) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (basic[node][c] && !seen[m + c]) {
                        seen[m + c] = true;
                        parent[m + c] = static_cast<int>(node);
                        queue.push_back(m + c);
                    }
                }
            } else {
                const std::size_t c = node - m;
                for (std::size_t r = 0; r < m; ++r) {
                    if (basic[r][c] && !seen[r]) {
                        seen[r] = true;
                        parent[r] = static_cast<int>(node);
                        queue.push_back(r);
                    }
                }
            }
        }
        if (!seen[m + bj]) throw std::runtime_error("transport: cycle not found");
        // Node path col(bj) -> ... -> row(bi), then emit cells pairwise.
        std::vector<std::size_t> nodes;
        for (int cur = static_cast<int>(m + bj); cur != -1; cur = parent[cur]) {
            nodes.push_back(static_cast<std::size_t>(cur));
        }
        std::reverse(nodes.begin(), nodes.end());  // row(bi) ... col(bj)
        std::vector<std::pair<std::size_t, std::size_t>> cells;
        cells.emplace_back(bi, bj);
        // nodes alternate row, col, row, col...; consecutive pairs are cells.
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
            const std::size_t x = nodes[k], y = nodes[k + 1];
            if (x < m) {
                cells.emplace_back(x, y - m);
            } else {
                cells.emplace_back(y, x - m);
            }
        }
        // cells[0] is the entering (+) cell; cells[1..] walk back from bi to
        // bj and alternate -, +, -, ... Reorder so signs alternate from the
        // entering cell: the walk starts at row bi, so cells[1] shares row bi
        // only if nodes[0] == bi (it does). Drop the duplicate orientation:
        // the path cells already alternate because consecutive tree edges
        // share alternating node kinds.
        return cells;
    }
};

// ---------------------------------------------------------------------------
// Tabular value-iteration oracle over FiniteSystem.
// ---------------------------------------------------------------------------

struct ValueSolution {
    std::vector<double> v;               // V*(s)
    std::vector<std::vector<double>> q;  // Q*(s, a)
};

inline ValueSolution value_iteration(const igaa::FiniteSystem& sys, double gamma,
                                     double tol = 1e-13, std::size_t max_iters = 100000) {
    ValueSolution sol;
    sol.v.assign(sys.n_states, 0.0);
    sol.q.assign(sys.n_states, std::vector<double>(sys.n_actions, 0.0));
    for (std::size_t it = 0; it < max_iters; ++it) {
        double change = 0.0;
        std::vector<double> nv(sys.n_states, 0.0);
        for (std::size_t s = 0; s < sys.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < sys.n_actions; ++a) {
                double ev = 0.0;
                const igaa::TransitionDist& d = sys.next[s][a];
                for (std::size_t k = 0; k < d.states.size(); ++k) {
                    ev += d.probs[k] * sol.v[d.states[k]];
                }
                const double qa = sys.reward[s][a] + gamma * ev;
                sol.q[s][a] = qa;
                best = std::max(best, qa);
            }
            nv[s] = best;
            change = std::max(change, std::fabs(nv[s] - sol.v[s]));
        }
        sol.v = nv;
        if (change < tol) break;
    }
    // One final Q refresh against the converged V.
    for (std::size_t s = 0; s < sys.n_states; ++s) {
        for (std::size_t a = 0; a < sys.n_actions; ++a) {
            double ev = 0.0;
            const igaa::TransitionDist& d = sys.next[s][a];
            for (std::size_t k = 0; k < d.states.size(); ++k) {
                ev += d.probs[k] * sol.v[d.states[k]];
            }
            sol.q[s][a] = sys.reward[s][a] + gamma * ev;
        }
    }
    return sol;
}

// Random finite decision process with dense transitions. Rewards in [0, 1];
// each (s, a) transitions to `branch` distinct successors with random
// weights.
inline igaa::FiniteSystem random_mdp(igaa::Rng& rng, std::size_t max_states,
                                     std::size_t max_actions) {
    igaa::FiniteSystem sys;
    sys.n_states = 2 + rng.index(max_states - 1);
    sys.n_actions = 1 + rng.index(max_actions);
    sys.reward.assign(sys.n_states, std::vector<double>(sys.n_actions, 0.0));
    sys.next.assign(sys.n_states, std::vector<igaa::TransitionDist>(sys.n_actions));
    for (std::size_t s = 0; s < sys.n_states; ++s) {
        for (std::size_t a = 0; a < sys.n_actions; ++a) {
            sys.reward[s][a] = rng.uniform01();
            const std::size_t branch = 1 + rng.index(std::min<std::size_t>(3, sys.n_states));
            igaa::TransitionDist& d = sys.next[s][a];
            double total = 0.0;
            for (std::size_t k = 0; k < branch; ++k) {
                d.states.push_back(rng.index(sys.n_states));
                const double w = 0.05 + rng.uniform01();
                d.probs.push_back(w);
                total += w;
            }
            for (double& p : d.probs) p /= total;
        }
    }
    return sys;
}

// ---------------------------------------------------------------------------
// Independent dense mapping oracle for the intent -> demand tensor.
// ---------------------------------------------------------------------------

inline std::vector<double> mapped_demand_oracle(const std::vector<double>& coef, std::size_t m,
                                                std::size_t n, std::size_t p, std::size_t svc,
                                                const std::vector<double>& intent,
                                                const igaa::ResourceCatalog& catalog) {
    std::vector<double> out(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
            acc += coef[(r * n + svc) * p + k] * intent[k];
        }
        const double hi = catalog.entries[r].upper;
        out[r] = std::min(std::max(acc, 0.0), hi);
    }
    return out;
}

// Simpson-rule quadrature on a uniform grid (count must be even intervals).
inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      std::size_t intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (hi - lo) / static_cast<double>(intervals);
    double acc = f(lo) + f(hi);
    for (std::size_t k = 1; k < intervals; ++k) {
        acc += f(lo + h * static_cast<double>(k)) * (k % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

}  // namespace testutil
