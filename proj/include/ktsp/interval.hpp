#pragma once

// Time-interval networks: per-body partitions of the grid, the induced
// minimized-arc network with stored witnesses, the interval ILP, solution
// checking (temporal glitches and subtours), partition refinement and cycle
// cuts. Interval model variables are aligned with interval arcs: variable v
// is arcs[v].

#include <deque>

#include "ktsp/ilp_model.hpp"

namespace ktsp {

struct IntervalPartition {
    // per body: inclusive [lo, hi] index ranges, ascending, covering the grid
    std::vector<std::vector<std::pair<int, int>>> per_body;
    int n_time_points = 0;

    int n_bodies() const { return static_cast<int>(per_body.size()); }

    int intervals_of(int body) const { return static_cast<int>(per_body[body].size()); }

    int total_intervals() const {
        int total = 0;
        for (const auto& iv : per_body) total += static_cast<int>(iv.size());
        return total;
    }

    int interval_of(int body, int t) const {
        const auto& ivs = per_body[body];
        int lo = 0, hi = static_cast<int>(ivs.size()) - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (ivs[mid].second < t) lo = mid + 1; else hi = mid;
        }
        return lo;
    }

    void validate() const {
        if (per_body.empty()) throw std::invalid_argument("partition: no bodies");
        for (const auto& ivs : per_body) {
            if (ivs.empty()) throw std::invalid_argument("partition: body without intervals");
            int expect = 0;
            for (const auto& [lo, hi] : ivs) {
                if (lo != expect || hi < lo)
                    throw std::invalid_argument("partition: intervals must tile the grid");
                expect = hi + 1;
            }
            if (expect != n_time_points)
                throw std::invalid_argument("partition: intervals must cover the grid");
        }
    }
};

// Default starting point: one interval per body, with the start body split
// into {t0}, middle, {t_max} so the anchor nodes exist.
inline IntervalPartition initial_partition(const TimeExpandedNetwork& net) {
    IntervalPartition p;
    p.n_time_points = net.grid.n_points;
    const int T = net.grid.n_points;
    p.per_body.assign(net.n_bodies, {{0, T - 1}});
    auto& s = p.per_body[net.start_index];
    s.clear();
    s.push_back({0, 0});
    if (T > 2) s.push_back({1, T - 2});
    s.push_back({T - 1, T - 1});
    return p;
}

inline IntervalPartition singleton_partition(const TimeExpandedNetwork& net) {
    IntervalPartition p;
    p.n_time_points = net.grid.n_points;
    p.per_body.assign(net.n_bodies, {});
    for (int b = 0; b < net.n_bodies; ++b) {
        for (int t = 0; t < net.grid.n_points; ++t) p.per_body[b].push_back({t, t});
    }
    return p;
}

struct IntervalNode {
    int body = 0;
    int interval = 0;

    bool operator==(const IntervalNode& o) const {
        return body == o.body && interval == o.interval;
    }
};

struct IntervalArc {
    IntervalNode from, to;
    double weight = 0.0;
    // witness epochs of the cheapest underlying transfer; unused for coasting
    int witness_depart = -1;
    int witness_arrive = -1;
    bool coasting = false;
};

struct TimeIntervalNetwork {
    int n_bodies = 0;
    int start_index = 0;
    IntervalPartition partition;
    std::vector<IntervalArc> arcs;   // sorted by (from.body, from.interval, to.body, to.interval)
    std::vector<int> node_offset;    // node id = node_offset[body] + interval

    int n_nodes() const { return node_offset.back(); }
    int node_id(const IntervalNode& n) const { return node_offset[n.body] + n.interval; }
    IntervalNode anchor_start() const { return {start_index, partition.interval_of(start_index, 0)}; }
    IntervalNode anchor_end() const {
        return {start_index, partition.interval_of(start_index, partition.n_time_points - 1)};
    }
};

inline bool interval_arc_less(const IntervalArc& a, const IntervalArc& b) {
    if (a.from.body != b.from.body) return a.from.body < b.from.body;
    if (a.from.interval != b.from.interval) return a.from.interval < b.from.interval;
    if (a.to.body != b.to.body) return a.to.body < b.to.body;
    return a.to.interval < b.to.interval;
}

// Collapses the grid network onto a partition. Transfer arc weights are the
// exact minima over all underlying (t, t') pairs between the interval pair,
// with the first minimizing pair (in canonical arc order) kept as witness.
// Zero-cost coasting arcs link consecutive intervals of the same body.
inline TimeIntervalNetwork build_interval_network(const TimeExpandedNetwork& net,
                                                  const IntervalPartition& partition) {
    partition.validate();
    if (partition.n_bodies() != net.n_bodies || partition.n_time_points != net.grid.n_points)
        throw std::invalid_argument("build_interval_network: partition does not match network");
    TimeIntervalNetwork inet;
    inet.n_bodies = net.n_bodies;
    inet.start_index = net.start_index;
    inet.partition = partition;
    inet.node_offset.assign(net.n_bodies + 1, 0);
    for (int b = 0; b < net.n_bodies; ++b) {
        inet.node_offset[b + 1] = inet.node_offset[b] + partition.intervals_of(b);
    }

    std::map<std::pair<int, int>, IntervalArc> best;  // (from node, to node) -> arc
    for (const auto& a : net.arcs) {
        IntervalArc ia;
        ia.from = {a.from.body, partition.interval_of(a.from.body, a.from.time)};
        ia.to = {a.to.body, partition.interval_of(a.to.body, a.to.time)};
        ia.weight = a.weight;
        ia.witness_depart = a.from.time;
        ia.witness_arrive = a.to.time;
        const auto key = std::make_pair(inet.node_id(ia.from), inet.node_id(ia.to));
        const auto it = best.find(key);
        if (it == best.end() || ia.weight < it->second.weight) best[key] = ia;
    }
    for (auto& [key, arc] : best) inet.arcs.push_back(arc);
    for (int b = 0; b < net.n_bodies; ++b) {
        for (int i = 0; i + 1 < partition.intervals_of(b); ++i) {
            IntervalArc ia;
            ia.from = {b, i};
            ia.to = {b, i + 1};
            ia.weight = 0.0;
            ia.coasting = true;
            inet.arcs.push_back(ia);
        }
    }
    std::sort(inet.arcs.begin(), inet.arcs.end(), interval_arc_less);
    return inet;
}

inline std::string interval_var_name(const IntervalArc& a) {
    return "y_" + std::to_string(a.from.body) + "_" + std::to_string(a.from.interval) + "_" +
           std::to_string(a.to.body) + "_" + std::to_string(a.to.interval);
}

// Same three constraint families as the time-indexed model, over interval
// nodes; flow conservation skips the start body's anchor intervals.
inline IlpModel build_interval_model(const TimeIntervalNetwork& inet) {
    IlpModel m;
    const int n_nodes = inet.n_nodes();
    std::vector<std::vector<LinTerm>> out_terms(n_nodes), in_terms(n_nodes);
    std::vector<std::vector<LinTerm>> depart_terms(inet.n_bodies);
    for (size_t i = 0; i < inet.arcs.size(); ++i) {
        const auto& a = inet.arcs[i];
        const int v = m.add_var(interval_var_name(a), a.weight);
        if (v != static_cast<int>(i))
            throw std::logic_error("interval model: variable/arc misalignment");
        out_terms[inet.node_id(a.from)].push_back({v, 1.0});
        in_terms[inet.node_id(a.to)].push_back({v, 1.0});
        if (!a.coasting) depart_terms[a.from.body].push_back({v, 1.0});
    }

    if (inet.n_bodies > 1) {
        std::vector<std::vector<LinTerm>> arrive_terms(inet.n_bodies);
        for (size_t i = 0; i < inet.arcs.size(); ++i) {
            if (!inet.arcs[i].coasting)
                arrive_terms[inet.arcs[i].to.body].push_back({static_cast<int>(i), 1.0});
        }
        for (int b = 0; b < inet.n_bodies; ++b) {
            IlpConstraint c;
            c.name = "depart_" + std::to_string(b);
            c.terms = depart_terms[b];
            c.sense = Sense::ge;
            c.rhs = 1.0;
            m.constraints.push_back(std::move(c));
        }
        // implied by departure + flow (interval 0 has no coasting inflow, so
        // any activity at a non-start body chains back to a transfer
        // arrival); stated explicitly to sharpen solver propagation
        for (int b = 0; b < inet.n_bodies; ++b) {
            if (b == inet.start_index) continue;
            IlpConstraint c;
            c.name = "arrive_" + std::to_string(b);
            c.terms = arrive_terms[b];
            c.sense = Sense::ge;
            c.rhs = 1.0;
            m.constraints.push_back(std::move(c));
        }
    }
    const int start_id = inet.node_id(inet.anchor_start());
    const int end_id = inet.node_id(inet.anchor_end());
    for (int b = 0; b < inet.n_bodies; ++b) {
        for (int i = 0; i < inet.partition.intervals_of(b); ++i) {
            const int id = inet.node_offset[b] + i;
            if (id == start_id || id == end_id) continue;
            IlpConstraint c;
            c.name = "flow_" + std::to_string(b) + "_" + std::to_string(i);
            c.terms = out_terms[id];
            for (auto term : in_terms[id]) {
                term.coef = -1.0;
                c.terms.push_back(term);
            }
            c.sense = Sense::eq;
            c.rhs = 0.0;
            m.constraints.push_back(std::move(c));
        }
    }
    {
        IlpConstraint c;
        c.name = "vehicle";
        c.terms = out_terms[start_id];
        c.sense = Sense::le;
        c.rhs = 1.0;
        m.constraints.push_back(std::move(c));
    }
    return m;
}

struct TemporalViolation {
    int body = 0;
    int interval = 0;
    int arrival_epoch = 0;    // epoch already reached inside the interval
    int departure_epoch = 0;  // selected departure witness, earlier than arrival
};

struct IntervalCheckResult {
    enum class Kind { feasible, temporal_violation, subtour };
    Kind kind = Kind::feasible;
    Trajectory trajectory;                      // when feasible
    double value = 0.0;                         // trajectory value when feasible
    std::vector<TemporalViolation> violations;  // when temporal_violation
    std::vector<IntervalNode> cycle;            // when subtour: the shortest cycle
    std::vector<std::vector<IntervalNode>> extra_cycles;  // one per other component
};

namespace detail {

// Shortest directed cycle through selected arcs restricted to `allowed`
// nodes, by BFS from each allowed node in id order.
inline std::vector<IntervalNode> shortest_selected_cycle(
    const TimeIntervalNetwork& inet, const std::vector<std::vector<int>>& out_sel,
    const std::vector<char>& allowed) {
    const int n_nodes = inet.n_nodes();
    std::vector<IntervalNode> best;
    for (int src = 0; src < n_nodes; ++src) {
        if (!allowed[src]) continue;
        std::vector<int> pred_arc(n_nodes, -1);
        std::vector<int> depth(n_nodes, -1);
        std::deque<int> queue{src};
        depth[src] = 0;
        int found = -1;
        while (!queue.empty() && found < 0) {
            const int u = queue.front();
            queue.pop_front();
            for (const int ai : out_sel[u]) {
                const int v = inet.node_id(inet.arcs[ai].to);
                if (!allowed[v]) continue;
                if (v == src) {
                    pred_arc[src] = ai;
                    found = depth[u] + 1;
                    break;
                }
                if (depth[v] < 0) {
                    depth[v] = depth[u] + 1;
                    pred_arc[v] = ai;
                    queue.push_back(v);
                }
            }
        }
        if (found < 0) continue;
        std::vector<IntervalNode> cycle;
        int cur = src;
        do {
            const auto& a = inet.arcs[pred_arc[cur]];
            cycle.push_back(a.from);
            cur = inet.node_id(a.from);
        } while (cur != src);
        std::reverse(cycle.begin(), cycle.end());
        if (best.empty() || cycle.size() < best.size()) best = cycle;
    }
    return best;
}

}  // namespace detail

// Walks the selected arcs from the start anchor. Order of business per the
// DDD loop: disconnected selections are a subtour; a departure witness
// earlier than the epoch already reached is a temporal violation; otherwise
// the walk realizes a grid trajectory whose value equals the objective.
inline IntervalCheckResult check_interval_solution(const std::vector<int8_t>& x,
                                                   const TimeIntervalNetwork& inet,
                                                   const TimeExpandedNetwork& net) {
    if (x.size() != inet.arcs.size())
        throw std::invalid_argument("check_interval_solution: assignment size mismatch");
    IntervalCheckResult res;
    const int n_nodes = inet.n_nodes();
    std::vector<std::vector<int>> out_sel(n_nodes);
    size_t n_selected = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        if (x[i]) {
            out_sel[inet.node_id(inet.arcs[i].from)].push_back(static_cast<int>(i));
            ++n_selected;
        }
    }

    // connectivity sweep from the start anchor
    const int start_id = inet.node_id(inet.anchor_start());
    std::vector<char> reached(n_nodes, 0);
    {
        std::deque<int> queue{start_id};
        reached[start_id] = 1;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (const int ai : out_sel[u]) {
                const int v = inet.node_id(inet.arcs[ai].to);
                if (!reached[v]) {
                    reached[v] = 1;
                    queue.push_back(v);
                }
            }
        }
    }
    std::vector<char> unreachable(n_nodes, 0);
    bool any_unreachable = false;
    for (int u = 0; u < n_nodes; ++u) {
        if (!reached[u] && !out_sel[u].empty()) {
            unreachable[u] = 1;
            any_unreachable = true;
        }
    }
    if (any_unreachable) {
        res.kind = IntervalCheckResult::Kind::subtour;
        res.cycle = detail::shortest_selected_cycle(inet, out_sel, unreachable);
        if (res.cycle.empty())
            throw std::logic_error("check_interval_solution: unreachable arcs without a cycle");
        // one extra cut per remaining unreachable component speeds the loop
        std::vector<char> remaining = unreachable;
        for (const auto& n : res.cycle) remaining[inet.node_id(n)] = 0;
        while (true) {
            std::vector<char> comp(n_nodes, 0);
            int seed_node = -1;
            for (int u = 0; u < n_nodes && seed_node < 0; ++u) {
                if (remaining[u]) seed_node = u;
            }
            if (seed_node < 0) break;
            const auto cyc = detail::shortest_selected_cycle(inet, out_sel, remaining);
            if (cyc.empty()) break;
            res.extra_cycles.push_back(cyc);
            for (const auto& n : cyc) remaining[inet.node_id(n)] = 0;
            (void)comp;
        }
        return res;
    }

    // temporal traversal, consuming each selected arc once
    std::vector<char> used(inet.arcs.size(), 0);
    IntervalNode cur = inet.anchor_start();
    int cur_epoch = 0;
    size_t n_used = 0;
    Trajectory traj;
    traj.pi.push_back(net.start_index);
    traj.sigma.push_back(0);
    const int end_id = inet.node_id(inet.anchor_end());

    while (true) {
        const int uid = inet.node_id(cur);
        int best_transfer = -1;
        int best_unusable = -1;
        int coasting = -1;
        for (const int ai : out_sel[uid]) {
            if (used[ai]) continue;
            const auto& a = inet.arcs[ai];
            if (a.coasting) {
                if (coasting < 0) coasting = ai;
            } else if (a.witness_depart >= cur_epoch) {
                if (best_transfer < 0 ||
                    a.witness_depart < inet.arcs[best_transfer].witness_depart)
                    best_transfer = ai;
            } else {
                if (best_unusable < 0 ||
                    a.witness_depart < inet.arcs[best_unusable].witness_depart)
                    best_unusable = ai;
            }
        }

        int take = -1;
        if (best_transfer >= 0) {
            take = best_transfer;
        } else if (coasting >= 0) {
            take = coasting;
        } else if (best_unusable >= 0) {
            // Fig. 4(a): the walk arrived later than the cheapest selected
            // departure leaves. Record and keep walking to gather every
            // violation for a single refinement round.
            res.violations.push_back({cur.body, cur.interval, cur_epoch,
                                      inet.arcs[best_unusable].witness_depart});
            take = best_unusable;
        } else {
            break;  // nothing unused leaves this node
        }

        const auto& a = inet.arcs[take];
        used[take] = 1;
        ++n_used;
        if (!a.coasting) {
            if (res.violations.empty()) {
                if (a.witness_depart > cur_epoch) {
                    traj.pi.push_back(a.from.body);
                    traj.sigma.push_back(a.witness_depart);
                }
                traj.pi.push_back(a.to.body);
                traj.sigma.push_back(a.witness_arrive);
            }
            cur_epoch = a.witness_arrive;
        }
        cur = a.to;
    }

    if (!res.violations.empty()) {
        res.kind = IntervalCheckResult::Kind::temporal_violation;
        return res;
    }
    if (n_used != n_selected) {
        // reachable side circulations the walk could not absorb
        std::vector<std::vector<int>> out_left(n_nodes);
        std::vector<char> allowed(n_nodes, 0);
        for (size_t i = 0; i < x.size(); ++i) {
            if (x[i] && !used[i]) {
                out_left[inet.node_id(inet.arcs[i].from)].push_back(static_cast<int>(i));
                allowed[inet.node_id(inet.arcs[i].from)] = 1;
                allowed[inet.node_id(inet.arcs[i].to)] = 1;
            }
        }
        res.kind = IntervalCheckResult::Kind::subtour;
        res.cycle = detail::shortest_selected_cycle(inet, out_left, allowed);
        if (res.cycle.empty())
            throw std::logic_error("check_interval_solution: leftover arcs without a cycle");
        std::vector<char> remaining = allowed;
        for (const auto& n : res.cycle) remaining[inet.node_id(n)] = 0;
        while (true) {
            const auto cyc = detail::shortest_selected_cycle(inet, out_left, remaining);
            if (cyc.empty()) break;
            res.extra_cycles.push_back(cyc);
            for (const auto& n : cyc) remaining[inet.node_id(n)] = 0;
        }
        return res;
    }
    if (inet.node_id(cur) != end_id) {
        if (n_selected == 0 && inet.n_bodies == 1) {
            // pure coasting tour; nothing was selected
        } else {
            throw std::logic_error("check_interval_solution: walk ended away from the end anchor");
        }
    }

    const int T = net.grid.n_points;
    if (traj.sigma.back() != T - 1) {
        traj.pi.push_back(net.start_index);
        traj.sigma.push_back(T - 1);
    }
    std::vector<int> visits;
    for (size_t i = 0; i < traj.pi.size(); ++i) {
        if (i == 0 || traj.pi[i] != traj.pi[i - 1]) visits.push_back(traj.pi[i]);
    }
    std::set<int> seen;
    for (size_t k = 1; k + 1 < visits.size(); ++k) {
        if (visits[k] == net.start_index || !seen.insert(visits[k]).second) {
            traj.allow_revisits = true;
            break;
        }
    }
    res.kind = IntervalCheckResult::Kind::feasible;
    res.trajectory = traj;
    res.value = value(traj, net);
    return res;
}

// Splits each violated interval at the arrival epoch so the conflicting
// arrival and departure witnesses land in different sub-intervals.
inline IntervalPartition refine(const IntervalPartition& partition,
                                const std::vector<TemporalViolation>& violations) {
    if (violations.empty()) throw std::invalid_argument("refine: no violations given");
    IntervalPartition out = partition;
    std::map<int, std::set<int>> new_starts;  // body -> added interval start points
    for (const auto& v : violations) {
        const auto [lo, hi] = partition.per_body[v.body][v.interval];
        if (lo == hi)
            throw std::logic_error("refine: temporal violation on a singleton interval");
        if (!(v.departure_epoch < v.arrival_epoch) || v.arrival_epoch < lo ||
            v.arrival_epoch > hi || v.departure_epoch < lo)
            throw std::logic_error("refine: violation epochs outside the interval");
        new_starts[v.body].insert(v.arrival_epoch);  // arrival epoch > lo here
    }
    for (const auto& [body, starts] : new_starts) {
        std::set<int> all;
        for (const auto& [lo, hi] : out.per_body[body]) all.insert(lo);
        for (int s : starts) all.insert(s);
        std::vector<std::pair<int, int>> rebuilt;
        for (auto it = all.begin(); it != all.end(); ++it) {
            auto next = std::next(it);
            const int hi = next == all.end() ? partition.n_time_points - 1 : *next - 1;
            rebuilt.push_back({*it, hi});
        }
        out.per_body[body] = std::move(rebuilt);
    }
    out.validate();
    if (out.total_intervals() <= partition.total_intervals())
        throw std::logic_error("refine: interval count did not increase");
    return out;
}

// Dantzig-Fulkerson-Johnson inequality over the cycle's node set: at most
// |cycle| - 1 of the arcs with both endpoints inside may be selected.
inline IlpConstraint subtour_constraint(const TimeIntervalNetwork& inet,
                                        const std::vector<IntervalNode>& cycle,
                                        const std::string& name) {
    std::set<int> node_set;
    for (const auto& n : cycle) node_set.insert(inet.node_id(n));
    IlpConstraint c;
    c.name = name;
    c.sense = Sense::le;
    c.rhs = static_cast<double>(node_set.size()) - 1.0;
    for (size_t i = 0; i < inet.arcs.size(); ++i) {
        if (node_set.count(inet.node_id(inet.arcs[i].from)) &&
            node_set.count(inet.node_id(inet.arcs[i].to)))
            c.terms.push_back({static_cast<int>(i), 1.0});
    }
    return c;
}

// DFJ constraints for every node set carrying a directed cycle of length two
// or three in the interval network (one constraint per distinct node set).
inline std::vector<IlpConstraint> precompute_cycle_constraints(const TimeIntervalNetwork& inet,
                                                               int max_len = 3) {
    const int n_nodes = inet.n_nodes();
    std::vector<std::vector<char>> adj(n_nodes, std::vector<char>(n_nodes, 0));
    for (const auto& a : inet.arcs) adj[inet.node_id(a.from)][inet.node_id(a.to)] = 1;

    std::vector<std::vector<IntervalNode>> cycles;
    const auto node_of = [&](int id) -> IntervalNode {
        int body = 0;
        while (inet.node_offset[body + 1] <= id) ++body;
        return {body, id - inet.node_offset[body]};
    };
    if (max_len >= 2) {
        for (int i = 0; i < n_nodes; ++i) {
            for (int j = i + 1; j < n_nodes; ++j) {
                if (adj[i][j] && adj[j][i]) cycles.push_back({node_of(i), node_of(j)});
            }
        }
    }
    if (max_len >= 3) {
        for (int i = 0; i < n_nodes; ++i) {
            for (int j = i + 1; j < n_nodes; ++j) {
                for (int k = j + 1; k < n_nodes; ++k) {
                    const bool fwd = adj[i][j] && adj[j][k] && adj[k][i];
                    const bool bwd = adj[i][k] && adj[k][j] && adj[j][i];
                    if (fwd || bwd) cycles.push_back({node_of(i), node_of(j), node_of(k)});
                }
            }
        }
    }
    std::vector<IlpConstraint> out;
    for (size_t i = 0; i < cycles.size(); ++i) {
        out.push_back(subtour_constraint(inet, cycles[i], "cycle_pc_" + std::to_string(i)));
    }
    return out;
}

}  // namespace ktsp
