#pragma once

// Exact reference solver: dynamic programming over (time, body, visited-set)
// states in topological time order. Exponential in the body count, so the
// body count is capped.

#include <cstdint>

#include "ktsp/trajectory.hpp"

namespace ktsp {

struct DpCapExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DpResult {
    bool feasible = false;
    double value = std::numeric_limits<double>::infinity();
    Trajectory trajectory;
};

inline DpResult dp_exact_solve(const TimeExpandedNetwork& net, int cap = 14) {
    const int n = net.n_bodies;
    const int T = net.grid.n_points;
    if (n > cap) {
        throw DpCapExceededError("dp_exact_solve: " + std::to_string(n) +
                                 " bodies exceed the cap of " + std::to_string(cap));
    }
    const uint32_t full = (n >= 32) ? 0u : ((1u << n) - 1u);
    const size_t n_states = static_cast<size_t>(T) * n * (full + 1ull);
    if (n_states > (1ull << 31)) {
        throw DpCapExceededError("dp_exact_solve: state space too large");
    }

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n_states, inf);
    std::vector<int32_t> parent(n_states, -1);

    const auto sid = [&](int t, int b, uint32_t m) -> size_t {
        return ((static_cast<size_t>(t) * n + b) << n) | m;
    };

    // arc spans per departure node, resolved once
    std::vector<std::pair<size_t, size_t>> spans(static_cast<size_t>(n) * T);
    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < n; ++b) spans[static_cast<size_t>(t) * n + b] = net.out_range(b, t);
    }

    const int s = net.start_index;
    dist[sid(0, s, 1u << s)] = 0.0;

    const auto relax = [&](size_t to, double cand, size_t from) {
        if (cand < dist[to]) {
            dist[to] = cand;
            parent[to] = static_cast<int32_t>(from);
        }
    };

    for (int t = 0; t < T; ++t) {
        for (int b = 0; b < n; ++b) {
            const auto span = spans[static_cast<size_t>(t) * n + b];
            for (uint32_t m = 0; m <= full; ++m) {
                const size_t cur = sid(t, b, m);
                const double d = dist[cur];
                if (d == inf) continue;
                if (t + 1 < T) relax(sid(t + 1, b, m), d, cur);  // coast
                for (size_t i = span.first; i < span.second; ++i) {
                    const auto& a = net.arcs[i];
                    relax(sid(a.to.time, a.to.body, m | (1u << a.to.body)), d + a.weight, cur);
                }
            }
        }
    }

    DpResult res;
    const size_t goal = sid(T - 1, s, full);
    if (dist[goal] == inf) return res;
    res.feasible = true;
    res.value = dist[goal];

    // Recover the state path, then compress coasting runs into legs.
    std::vector<std::pair<int, int>> nodes;  // (body, time)
    for (int64_t cur = static_cast<int64_t>(goal); cur >= 0; cur = parent[cur]) {
        const size_t node = static_cast<size_t>(cur) >> n;
        nodes.push_back({static_cast<int>(node % n), static_cast<int>(node / n)});
        if (cur == static_cast<int64_t>(sid(0, s, 1u << s))) break;
    }
    std::reverse(nodes.begin(), nodes.end());

    Trajectory& traj = res.trajectory;
    traj.pi.push_back(nodes.front().first);
    traj.sigma.push_back(nodes.front().second);
    for (size_t i = 1; i < nodes.size(); ++i) {
        const auto [pb, pt] = nodes[i - 1];
        const auto [cb, ct] = nodes[i];
        if (cb == pb) continue;  // coasting, collapsed below
        if (traj.sigma.back() != pt) {  // waited before departing: emit the waypoint
            traj.pi.push_back(pb);
            traj.sigma.push_back(pt);
        }
        traj.pi.push_back(cb);
        traj.sigma.push_back(ct);
    }
    if (traj.sigma.back() != T - 1) {
        traj.pi.push_back(s);
        traj.sigma.push_back(T - 1);
    }

    // flag non-consecutive repeats so validation applies walk semantics
    std::vector<int> visits;
    for (size_t i = 0; i < traj.pi.size(); ++i) {
        if (i == 0 || traj.pi[i] != traj.pi[i - 1]) visits.push_back(traj.pi[i]);
    }
    std::set<int> seen;
    for (size_t k = 1; k + 1 < visits.size(); ++k) {
        if (visits[k] == s || !seen.insert(visits[k]).second) {
            traj.allow_revisits = true;
            break;
        }
    }
    return res;
}

}  // namespace ktsp
