#pragma once

// Independent oracles used by the tests. These deliberately re-derive
// results through a different route than the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "delicate/chem/mol.hpp"

namespace oracles {

// Cycle rank by counting non-spanning-forest edges during a BFS.
inline int cycle_rank_spanning_forest(const delicate::chem::MolGraph& mol) {
    const int n = mol.atom_count();
    std::vector<std::vector<int>> adj(n);
    for (const auto& bond : mol.bonds) {
        adj[bond.a].push_back(bond.b);
        adj[bond.b].push_back(bond.a);
    }
    std::vector<bool> visited(n, false);
    int tree_edges = 0;
    for (int start = 0; start < n; ++start) {
        if (visited[start]) continue;
        std::vector<int> queue = {start};
        visited[start] = true;
        while (!queue.empty()) {
            int u = queue.back();
            queue.pop_back();
            for (int v : adj[u]) {
                if (!visited[v]) {
                    visited[v] = true;
                    ++tree_edges;
                    queue.push_back(v);
                }
            }
        }
    }
    return mol.bond_count() - tree_edges;
}

// Pairwise ROC-AUC: 1 credit when the positive outranks the negative, 0.5
// on ties.
inline double roc_auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
    double credit = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) credit += 1.0;
            else if (scores[i] == scores[j]) credit += 0.5;
        }
    }
    return credit / static_cast<double>(pairs);
}

// Standard-valence table (with charge adjustments) re-stated for the
// implicit-hydrogen invariant check.
inline std::vector<int> valences(const std::string& element, int charge) {
    if (element == "N" && charge == 1) return {4};
    if (element == "N" && charge == -1) return {2};
    if (element == "O" && charge == 1) return {3};
    if (element == "O" && charge == -1) return {1};
    if (element == "C" && charge == -1) return {3};
    if (element == "S" && charge == 1) return {3};
    if (element == "H") return {1};
    if (element == "B") return {3};
    if (element == "C") return {4};
    if (element == "N") return {3};
    if (element == "O") return {2};
    if (element == "P") return {3, 5};
    if (element == "S") return {2, 4, 6};
    return {1};  // halogens
}

// Two hand-evaluated bias-corrected Adam steps on a scalar with constant
// gradient.
inline double adam_two_steps(double w, double g, double lr, double b1, double b2, double eps) {
    double m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        double mhat = m / (1.0 - std::pow(b1, t));
        double vhat = v / (1.0 - std::pow(b2, t));
        w -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    return w;
}

}  // namespace oracles
