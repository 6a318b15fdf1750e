#include "igaa/bisim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace igaa {

namespace {

constexpr double kTol = 1e-9;

// Dense primal simplex for: max c^T x  s.t.  A x <= b, x >= 0, with b >= 0
// (so the slack basis starts feasible). Dantzig's rule with a switch to
// Bland's rule after a pivot budget, which guarantees termination.
class Simplex {
public:
    Simplex(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
            const std::vector<double>& c)
        : rows_(A.size()), vars_(c.size()), cols_(c.size() + A.size() + 1) {
        tableau_.assign(rows_, std::vector<double>(cols_, 0.0));
        for (std::size_t i = 0; i < rows_; ++i) {
            if (b[i] < 0.0) throw std::invalid_argument("simplex requires b >= 0");
            for (std::size_t j = 0; j < vars_; ++j) tableau_[i][j] = A[i][j];
            tableau_[i][vars_ + i] = 1.0;
            tableau_[i][cols_ - 1] = b[i];
        }
        cost_.assign(cols_, 0.0);
        for (std::size_t j = 0; j < vars_; ++j) cost_[j] = -c[j];
        basis_.resize(rows_);
        for (std::size_t i = 0; i < rows_; ++i) basis_[i] = vars_ + i;
    }

    double solve() {
        const std::size_t bland_after = 2 * (rows_ + cols_);
        const std::size_t max_iters = 200 * (rows_ + cols_) + 10000;
        for (std::size_t iter = 0; iter < max_iters; ++iter) {
            const bool bland = iter >= bland_after;
            std::size_t enter = cols_;
            if (bland) {
                for (std::size_t j = 0; j + 1 < cols_; ++j)
                    if (cost_[j] < -kTol) {
                        enter = j;
                        break;
                    }
            } else {
                double best = -kTol;
                for (std::size_t j = 0; j + 1 < cols_; ++j)
                    if (cost_[j] < best) {
                        best = cost_[j];
                        enter = j;
                    }
            }
            if (enter == cols_) return cost_[cols_ - 1];

            std::size_t leave = rows_;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < rows_; ++i) {
                if (tableau_[i][enter] <= kTol) continue;
                const double ratio = tableau_[i][cols_ - 1] / tableau_[i][enter];
                if (ratio < best_ratio - kTol ||
                    (ratio < best_ratio + kTol && leave < rows_ && basis_[i] < basis_[leave])) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
            if (leave == rows_)
                throw std::logic_error("simplex detected an unbounded direction");
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex exceeded its pivot budget");
    }

private:
    void pivot(std::size_t row, std::size_t col) {
        const double piv = tableau_[row][col];
        for (double& v : tableau_[row]) v /= piv;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i == row) continue;
            const double f = tableau_[i][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols_; ++j) tableau_[i][j] -= f * tableau_[row][j];
        }
        const double fc = cost_[col];
        if (fc != 0.0)
            for (std::size_t j = 0; j < cols_; ++j) cost_[j] -= fc * tableau_[row][j];
        basis_[row] = col;
    }

    std::size_t rows_, vars_, cols_;
    std::vector<std::vector<double>> tableau_;
    std::vector<double> cost_;
    std::vector<std::size_t> basis_;
};

void check_distribution(const std::vector<double>& w, const char* which) {
    if (w.empty()) throw std::invalid_argument(std::string(which) + " distribution is empty");
    double total = 0.0;
    for (double v : w) {
        if (v < 0.0 || !std::isfinite(v))
            throw std::invalid_argument(std::string(which) + " distribution has bad weight");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(which) + " distribution does not sum to 1");
}

}  // namespace

double kantorovich_dual(const std::vector<double>& w_a, const std::vector<double>& w_b,
                        const std::vector<std::vector<double>>& cost) {
    check_distribution(w_a, "first");
    check_distribution(w_b, "second");
    const std::size_t m = w_a.size(), n = w_b.size();
    if (cost.size() != m) throw std::invalid_argument("cost matrix row count mismatch");
    for (const auto& row : cost) {
        if (row.size() != n) throw std::invalid_argument("cost matrix column count mismatch");
        for (double d : row)
            if (d < 0.0 || !std::isfinite(d))
                throw std::invalid_argument("ground costs must be finite and non-negative");
    }

    if (m == 1 && n == 1) return std::min(cost[0][0], 2.0);

    // Shift potentials into [0, 2]: p = p' - 1, q = q' - 1. The pairwise
    // constraints are shift-invariant and, with both weight vectors summing
    // to one, so is the objective.
    const std::size_t vars = m + n;
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    A.reserve(m * n + vars);
    b.reserve(m * n + vars);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> row(vars, 0.0);
            row[i] = 1.0;
            row[m + j] = -1.0;
            A.push_back(std::move(row));
            b.push_back(cost[i][j]);
        }
    for (std::size_t v = 0; v < vars; ++v) {
        std::vector<double> row(vars, 0.0);
        row[v] = 1.0;
        A.push_back(std::move(row));
        b.push_back(2.0);
    }
    std::vector<double> c(vars, 0.0);
    for (std::size_t i = 0; i < m; ++i) c[i] = w_a[i];
    for (std::size_t j = 0; j < n; ++j) c[m + j] = -w_b[j];

    const double value = Simplex(A, b, c).solve();
    // The dual value is non-negative (p = q = anything feasible gives 0 with
    // equal potentials); clip tiny negative round-off.
    return value < 0.0 && value > -1e-12 ? 0.0 : value;
}

double hausdorff_action_distance(const std::vector<std::vector<double>>& dis) {
    if (dis.empty() || dis[0].empty())
        throw std::invalid_argument("action distance table must be non-empty");
    const std::size_t cols = dis[0].size();
    for (const auto& row : dis) {
        if (row.size() != cols)
            throw std::invalid_argument("action distance table must be rectangular");
        for (double v : row)
            if (v < 0.0 || !std::isfinite(v))
                throw std::invalid_argument("action distances must be finite and non-negative");
    }
    double max_of_row_mins = 0.0;
    double min_of_row_maxs = std::numeric_limits<double>::infinity();
    for (const auto& row : dis) {
        double row_min = std::numeric_limits<double>::infinity();
        double row_max = 0.0;
        for (double v : row) {
            row_min = std::min(row_min, v);
            row_max = std::max(row_max, v);
        }
        max_of_row_mins = std::max(max_of_row_mins, row_min);
        min_of_row_maxs = std::min(min_of_row_maxs, row_max);
    }
    return std::max(max_of_row_mins, min_of_row_maxs);
}

void FiniteSystem::validate() const {
    if (n_states == 0 || n_actions == 0)
        throw std::invalid_argument("system needs at least one state and one action");
    if (reward.size() != n_states || next.size() != n_states)
        throw std::invalid_argument("system table row count does not match state count");
    for (std::size_t s = 0; s < n_states; ++s) {
        if (reward[s].size() != n_actions || next[s].size() != n_actions)
            throw std::invalid_argument("system table column count does not match action count");
        for (std::size_t a = 0; a < n_actions; ++a) {
            const TransitionDist& d = next[s][a];
            if (d.states.size() != d.probs.size() || d.states.empty())
                throw std::invalid_argument("transition distribution malformed");
            double total = 0.0;
            for (std::size_t k = 0; k < d.states.size(); ++k) {
                if (d.states[k] >= n_states)
                    throw std::invalid_argument("transition successor out of range");
                if (d.probs[k] < 0.0)
                    throw std::invalid_argument("transition probability negative");
                total += d.probs[k];
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw std::invalid_argument("transition probabilities do not sum to 1");
        }
    }
}

BisimResult lax_bisimulation(const FiniteSystem& a, const FiniteSystem& b,
                             const BisimConfig& cfg) {
    a.validate();
    b.validate();
    if (cfg.eta_r < 0.0 || cfg.eta_kd < 0.0)
        throw std::invalid_argument("bisimulation coefficients must be non-negative");
    const std::size_t R = a.n_states * a.n_actions;
    const std::size_t C = b.n_states * b.n_actions;

    auto base = [&](std::size_t s1, std::size_t a1, std::size_t s2, std::size_t a2) {
        return cfg.eta_r * std::abs(a.reward[s1][a1] - b.reward[s2][a2]);
    };

    BisimResult res;
    res.action_pair.assign(R, std::vector<double>(C, 0.0));
    for (std::size_t s1 = 0; s1 < a.n_states; ++s1)
        for (std::size_t a1 = 0; a1 < a.n_actions; ++a1)
            for (std::size_t s2 = 0; s2 < b.n_states; ++s2)
                for (std::size_t a2 = 0; a2 < b.n_actions; ++a2)
                    res.action_pair[s1 * a.n_actions + a1][s2 * b.n_actions + a2] =
                        base(s1, a1, s2, a2);

    auto state_metric = [&](const std::vector<std::vector<double>>& d) {
        std::vector<std::vector<double>> sm(a.n_states, std::vector<double>(b.n_states, 0.0));
        std::vector<std::vector<double>> block(a.n_actions,
                                               std::vector<double>(b.n_actions, 0.0));
        for (std::size_t s1 = 0; s1 < a.n_states; ++s1)
            for (std::size_t s2 = 0; s2 < b.n_states; ++s2) {
                for (std::size_t a1 = 0; a1 < a.n_actions; ++a1)
                    for (std::size_t a2 = 0; a2 < b.n_actions; ++a2)
                        block[a1][a2] = d[s1 * a.n_actions + a1][s2 * b.n_actions + a2];
                sm[s1][s2] = hausdorff_action_distance(block);
            }
        return sm;
    };

    std::vector<std::vector<double>> cur = res.action_pair;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const auto sm = state_metric(cur);
        std::vector<std::vector<double>> nxt(R, std::vector<double>(C, 0.0));
        double max_change = 0.0;
        for (std::size_t s1 = 0; s1 < a.n_states; ++s1)
            for (std::size_t a1 = 0; a1 < a.n_actions; ++a1) {
                const TransitionDist& d1 = a.next[s1][a1];
                for (std::size_t s2 = 0; s2 < b.n_states; ++s2)
                    for (std::size_t a2 = 0; a2 < b.n_actions; ++a2) {
                        const TransitionDist& d2 = b.next[s2][a2];
                        std::vector<std::vector<double>> ground(
                            d1.states.size(), std::vector<double>(d2.states.size(), 0.0));
                        for (std::size_t i = 0; i < d1.states.size(); ++i)
                            for (std::size_t j = 0; j < d2.states.size(); ++j)
                                ground[i][j] = sm[d1.states[i]][d2.states[j]];
                        const double kd = kantorovich_dual(d1.probs, d2.probs, ground);
                        const double v = base(s1, a1, s2, a2) + cfg.eta_kd * kd;
                        const std::size_t r = s1 * a.n_actions + a1;
                        const std::size_t c = s2 * b.n_actions + a2;
                        max_change = std::max(max_change, std::abs(v - cur[r][c]));
                        nxt[r][c] = v;
                    }
            }
        cur.swap(nxt);
        res.max_change_per_iter.push_back(max_change);
        ++res.iterations_run;
        if (res.max_change_per_iter.size() >= 2 &&
            max_change > res.max_change_per_iter[res.max_change_per_iter.size() - 2] + 1e-12)
            res.diverged = true;
        if (cfg.tolerance > 0.0 && max_change <= cfg.tolerance) break;
    }
    res.action_pair = std::move(cur);
    res.state_pair = state_metric(res.action_pair);
    return res;
}

}  // namespace igaa
