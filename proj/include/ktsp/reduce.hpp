#pragma once

// Optimality-preserving arc reductions for time-expanded networks, applied
// against an upper bound ub on the optimal tour value. Coasting arcs are
// implicit and never removed; every rule operates on stored transfer arcs.

#include <map>

#include "ktsp/network.hpp"

namespace ktsp {

struct ReductionReport {
    size_t arcs_before = 0;
    std::map<std::string, size_t> removed_per_rule;     // totals across all rounds
    std::map<std::string, size_t> first_round_removed;  // counts from round 1 only
    int rounds = 0;
    size_t arcs_after = 0;
};

namespace detail {

inline void erase_masked(TimeExpandedNetwork& net, const std::vector<char>& remove) {
    std::vector<TransferArc> kept;
    kept.reserve(net.arcs.size());
    for (size_t i = 0; i < net.arcs.size(); ++i) {
        if (!remove[i]) kept.push_back(net.arcs[i]);
    }
    net.arcs = std::move(kept);
}

struct DagDist {
    std::vector<double> dist;
    std::vector<int> transfers;  // tie-break: prefer fewer transfer arcs
};

// Single-source shortest paths in node-id order (time-major ids are a
// topological order; coasting arcs cost zero).
inline DagDist dag_shortest_from(const TimeExpandedNetwork& net, int body, int time) {
    const double inf = std::numeric_limits<double>::infinity();
    DagDist out;
    out.dist.assign(net.n_nodes(), inf);
    out.transfers.assign(net.n_nodes(), 0);
    const int n = net.n_bodies;
    const int T = net.grid.n_points;
    out.dist[net.node_id(body, time)] = 0.0;
    for (int t = time; t < T; ++t) {
        for (int b = 0; b < n; ++b) {
            const int u = net.node_id(b, t);
            const double d = out.dist[u];
            if (d == inf) continue;
            const auto relax = [&](int v, double cand, int ntr) {
                if (cand < out.dist[v] || (cand == out.dist[v] && ntr < out.transfers[v])) {
                    out.dist[v] = cand;
                    out.transfers[v] = ntr;
                }
            };
            if (t + 1 < T) relax(net.node_id(b, t + 1), d, out.transfers[u]);
            const auto span = net.out_range(b, t);
            for (size_t i = span.first; i < span.second; ++i) {
                const auto& a = net.arcs[i];
                relax(net.node_id(a.to), d + a.weight, out.transfers[u] + 1);
            }
        }
    }
    return out;
}

// All-nodes shortest paths *to* a destination, by scanning ids backwards.
inline DagDist dag_shortest_to(const TimeExpandedNetwork& net, int body, int time) {
    const double inf = std::numeric_limits<double>::infinity();
    DagDist out;
    out.dist.assign(net.n_nodes(), inf);
    out.transfers.assign(net.n_nodes(), 0);
    const int n = net.n_bodies;
    out.dist[net.node_id(body, time)] = 0.0;
    for (int t = time; t >= 0; --t) {
        for (int b = n - 1; b >= 0; --b) {
            const int u = net.node_id(b, t);
            double best = out.dist[u];
            int best_tr = out.transfers[u];
            if (t + 1 < net.grid.n_points) {
                const int v = net.node_id(b, t + 1);
                if (out.dist[v] < best || (out.dist[v] == best && out.transfers[v] < best_tr)) {
                    best = out.dist[v];
                    best_tr = out.transfers[v];
                }
            }
            const auto span = net.out_range(b, t);
            for (size_t i = span.first; i < span.second; ++i) {
                const auto& a = net.arcs[i];
                const int v = net.node_id(a.to);
                if (out.dist[v] == inf) continue;
                const double cand = a.weight + out.dist[v];
                const int ntr = out.transfers[v] + 1;
                if (cand < best || (cand == best && ntr < best_tr)) {
                    best = cand;
                    best_tr = ntr;
                }
            }
            out.dist[u] = best;
            out.transfers[u] = best_tr;
        }
    }
    return out;
}

}  // namespace detail

// Rule 1: drop arcs heavier than the upper bound.
inline size_t heavy_arc_rule(TimeExpandedNetwork& net, double ub) {
    if (ub < 0.0) throw std::invalid_argument("heavy_arc_rule: ub must be >= 0");
    std::vector<char> remove(net.arcs.size(), 0);
    size_t count = 0;
    for (size_t i = 0; i < net.arcs.size(); ++i) {
        if (net.arcs[i].weight > ub) {
            remove[i] = 1;
            ++count;
        }
    }
    detail::erase_masked(net, remove);
    return count;
}

// Rule 2: an arc into (beta, t') with beta != start is useless when even the
// cheapest onward departure from beta at t'' >= t' overshoots ub. Backward
// suffix minima give the cheapest onward departure in O(|A||T| + |E|).
inline size_t vee_rule(TimeExpandedNetwork& net, double ub) {
    if (ub < 0.0) throw std::invalid_argument("vee_rule: ub must be >= 0");
    const double inf = std::numeric_limits<double>::infinity();
    const int n = net.n_bodies;
    const int T = net.grid.n_points;
    std::vector<double> cheapest_dep(static_cast<size_t>(n) * T, inf);
    for (const auto& a : net.arcs) {
        auto& slot = cheapest_dep[static_cast<size_t>(a.from.body) * T + a.from.time];
        slot = std::min(slot, a.weight);
    }
    for (int b = 0; b < n; ++b) {
        for (int t = T - 2; t >= 0; --t) {
            auto& slot = cheapest_dep[static_cast<size_t>(b) * T + t];
            slot = std::min(slot, cheapest_dep[static_cast<size_t>(b) * T + t + 1]);
        }
    }
    std::vector<char> remove(net.arcs.size(), 0);
    size_t count = 0;
    for (size_t i = 0; i < net.arcs.size(); ++i) {
        const auto& a = net.arcs[i];
        if (a.to.body == net.start_index) continue;
        const double onward = cheapest_dep[static_cast<size_t>(a.to.body) * T + a.to.time];
        if (a.weight + onward > ub) {  // onward == inf removes vacuously
            remove[i] = 1;
            ++count;
        }
    }
    detail::erase_masked(net, remove);
    return count;
}

// Rule 3: drop arcs strictly costlier than the shortest path between their
// endpoints (paths may use coasting and other transfers).
inline size_t shortcut_rule(TimeExpandedNetwork& net, double /*ub*/ = 0.0) {
    std::vector<char> remove(net.arcs.size(), 0);
    size_t count = 0;
    size_t i = 0;
    while (i < net.arcs.size()) {
        // arcs sharing a tail are contiguous; one sweep serves all of them
        const Node tail = net.arcs[i].from;
        const auto d = detail::dag_shortest_from(net, tail.body, tail.time);
        for (; i < net.arcs.size() && net.arcs[i].from == tail; ++i) {
            if (d.dist[net.node_id(net.arcs[i].to)] < net.arcs[i].weight) {
                remove[i] = 1;
                ++count;
            }
        }
    }
    detail::erase_masked(net, remove);
    return count;
}

// Rule 4: drop arcs that no tour within ub can use, measured by shortest
// paths from the depot start and to the depot end. Unreachable arcs go too.
inline size_t far_away_rule(TimeExpandedNetwork& net, double ub) {
    if (ub < 0.0) throw std::invalid_argument("far_away_rule: ub must be >= 0");
    const double inf = std::numeric_limits<double>::infinity();
    const auto fwd = detail::dag_shortest_from(net, net.start_index, 0);
    const auto bwd = detail::dag_shortest_to(net, net.start_index, net.grid.n_points - 1);
    std::vector<char> remove(net.arcs.size(), 0);
    size_t count = 0;
    for (size_t i = 0; i < net.arcs.size(); ++i) {
        const auto& a = net.arcs[i];
        const double head = fwd.dist[net.node_id(a.from)];
        const double tail = bwd.dist[net.node_id(a.to)];
        if (head == inf || tail == inf || head + a.weight + tail > ub) {
            remove[i] = 1;
            ++count;
        }
    }
    detail::erase_masked(net, remove);
    return count;
}

// All four rules in order, looped to a fixpoint (or max_rounds).
inline ReductionReport apply_all(TimeExpandedNetwork& net, double ub, int max_rounds = 10) {
    if (ub < 0.0) throw std::invalid_argument("apply_all: ub must be >= 0");
    ReductionReport rep;
    rep.arcs_before = net.arcs.size();
    static const char* kRules[] = {"heavy_arc", "vee", "shortcut", "far_away"};
    for (const char* r : kRules) {
        rep.removed_per_rule[r] = 0;
        rep.first_round_removed[r] = 0;
    }
    for (int round = 0; round < max_rounds; ++round) {
        size_t removed_this_round = 0;
        size_t counts[4];
        counts[0] = heavy_arc_rule(net, ub);
        counts[1] = vee_rule(net, ub);
        counts[2] = shortcut_rule(net, ub);
        counts[3] = far_away_rule(net, ub);
        for (int k = 0; k < 4; ++k) {
            rep.removed_per_rule[kRules[k]] += counts[k];
            if (round == 0) rep.first_round_removed[kRules[k]] = counts[k];
            removed_this_round += counts[k];
        }
        rep.rounds = round + 1;
        if (removed_this_round == 0) break;
    }
    rep.arcs_after = net.arcs.size();
    return rep;
}

}  // namespace ktsp
