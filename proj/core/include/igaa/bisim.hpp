#pragma once

#include <cstddef>
#include <vector>

namespace igaa {

// Exact value of the boxed Kantorovich dual
//     max  sum_i w_a[i] p_i - sum_j w_b[j] q_j
//     s.t. p_i - q_j <= cost[i][j]   for all i, j
//          -1 <= p_i <= 1, -1 <= q_j <= 1
// for discrete distributions w_a, w_b (each summing to 1) over support points
// with pairwise ground costs cost[i][j] >= 0. Solved by a dense primal
// simplex after shifting the potentials into [0, 2]; single Dirac vs single
// Dirac short-circuits to min(cost, 2). When the box does not bind (all
// optimal potentials within it), this equals the primal optimal-transport
// cost under `cost`.
double kantorovich_dual(const std::vector<double>& w_a, const std::vector<double>& w_b,
                        const std::vector<std::vector<double>>& cost);

// Action-set distance from a table of pairwise action distances
// (rows: first system's actions, cols: second system's actions):
//     max( max_rows min_cols dis,  min_rows max_cols dis ).
// Deliberately asymmetric between the two systems.
double hausdorff_action_distance(const std::vector<std::vector<double>>& dis);

// Distribution over successor states as an explicit weighted support list.
struct TransitionDist {
    std::vector<std::size_t> states;
    std::vector<double> probs;
};

// Finite decision process with a uniform action count: rewards and successor
// distributions per (state, action). Serves exact tabular processes and
// sample-derived snapshots alike.
struct FiniteSystem {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<std::vector<double>> reward;        // [state][action]
    std::vector<std::vector<TransitionDist>> next;  // [state][action]

    void validate() const;
};

struct BisimConfig {
    double eta_r = 0.5;
    double eta_kd = 0.5;
    std::size_t iterations = 5;
    double tolerance = 0.0;  // when > 0, stop once the max change falls below it
};

struct BisimResult {
    // Action-pair distances, indexed [s1 * A1 + a1][s2 * A2 + a2].
    std::vector<std::vector<double>> action_pair;
    // State-pair distances induced by the final action-pair table.
    std::vector<std::vector<double>> state_pair;
    std::vector<double> max_change_per_iter;
    std::size_t iterations_run = 0;
    bool diverged = false;  // the max change grew after the first iteration
};

// Iterates D_{k+1}(x, y) = eta_r |r(x) - r(y)| + eta_kd KD(P_x, P_y; S_k)
// from D_0 = eta_r |r(x) - r(y)|, where S_k is the state metric obtained by
// applying the action-set distance to D_k blockwise. Iterates grow
// monotonically and contract with modulus eta_kd.
BisimResult lax_bisimulation(const FiniteSystem& a, const FiniteSystem& b,
                             const BisimConfig& cfg);

}  // namespace igaa
