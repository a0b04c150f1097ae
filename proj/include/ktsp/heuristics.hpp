#pragma once

// Constructive and improving heuristics over permutation-schedule tours.
// Legs are priced through leg_cost: coasting is free, a missing transfer arc
// counts as the configured penalty (the all-feasible convention) or as
// infinity in strict mode, which keeps every kept tour realizable on the
// network.

#include <random>

#include "ktsp/trajectory.hpp"

namespace ktsp {

struct HeuristicOptions {
    std::optional<double> penalty;   // nullopt: strict mode, missing arcs are infeasible
    bool cheapest_insertion = true;  // false: insert bodies in index order
};

struct ConstructionFailure : std::runtime_error {
    int body;
    ConstructionFailure(int body_, const std::string& what)
        : std::runtime_error(what), body(body_) {}
};

inline double leg_cost(const TimeExpandedNetwork& net, int a, int ta, int b, int tb,
                       const HeuristicOptions& opts) {
    if (a == b) return 0.0;
    const auto idx = net.find_arc(a, ta, b, tb);
    if (idx) return net.arcs[*idx].weight;
    return opts.penalty ? *opts.penalty : std::numeric_limits<double>::infinity();
}

inline double heuristic_value(const TimeExpandedNetwork& net, const Trajectory& traj,
                              const HeuristicOptions& opts) {
    double total = 0.0;
    for (size_t i = 0; i + 1 < traj.pi.size(); ++i) {
        total += leg_cost(net, traj.pi[i], traj.sigma[i], traj.pi[i + 1], traj.sigma[i + 1], opts);
    }
    return total;
}

// Insertion construction: grow from (start, start) by inserting one body at
// a time at its locally cheapest leg and epoch. Cached best-insertion rows
// per leg keep this at O(|A|^2 |T|).
inline Trajectory init_heuristic(const TimeExpandedNetwork& net,
                                 const HeuristicOptions& opts = {}) {
    const int n = net.n_bodies;
    const int T = net.grid.n_points;
    const int s = net.start_index;
    const double inf = std::numeric_limits<double>::infinity();

    Trajectory traj;
    traj.pi = {s, s};
    traj.sigma = {0, T - 1};

    std::vector<int> unvisited;
    for (int b = 0; b < n; ++b) {
        if (b != s) unvisited.push_back(b);
    }
    if (unvisited.empty()) return traj;

    struct Slot {
        double delta = std::numeric_limits<double>::infinity();
        int epoch = -1;
    };
    const auto eval_leg = [&](int body, size_t leg) -> Slot {
        Slot best;
        const int a = traj.pi[leg], b = traj.pi[leg + 1];
        const int ta = traj.sigma[leg], tb = traj.sigma[leg + 1];
        const double replaced = leg_cost(net, a, ta, b, tb, opts);
        for (int t = ta + 1; t <= tb - 1; ++t) {
            const double d = leg_cost(net, a, ta, body, t, opts) +
                             leg_cost(net, body, t, b, tb, opts) - replaced;
            if (d < best.delta) best = {d, t};
        }
        return best;
    };

    // rows[b][leg]: cheapest insertion of body b into that leg
    std::map<int, std::vector<Slot>> rows;
    for (const int b : unvisited) rows[b] = {eval_leg(b, 0)};

    while (!unvisited.empty()) {
        int pick = -1;
        size_t pick_leg = 0;
        Slot pick_slot;
        if (opts.cheapest_insertion) {
            for (const int b : unvisited) {
                for (size_t leg = 0; leg < rows[b].size(); ++leg) {
                    const Slot& slot = rows[b][leg];
                    if (pick < 0 || slot.delta < pick_slot.delta) {
                        pick = b;
                        pick_leg = leg;
                        pick_slot = slot;
                    }
                }
            }
        } else {
            pick = unvisited.front();
            for (size_t leg = 0; leg < rows[pick].size(); ++leg) {
                const Slot& slot = rows[pick][leg];
                if (slot.delta < pick_slot.delta) {
                    pick_leg = leg;
                    pick_slot = slot;
                }
            }
        }
        if (!(pick_slot.delta < inf)) {
            throw ConstructionFailure(pick, "init: no feasible insertion epoch for body " +
                                                std::to_string(pick));
        }

        traj.pi.insert(traj.pi.begin() + pick_leg + 1, pick);
        traj.sigma.insert(traj.sigma.begin() + pick_leg + 1, pick_slot.epoch);
        unvisited.erase(std::find(unvisited.begin(), unvisited.end(), pick));
        rows.erase(pick);
        for (const int b : unvisited) {
            auto& row = rows[b];
            row.erase(row.begin() + pick_leg);
            row.insert(row.begin() + pick_leg, eval_leg(b, pick_leg));
            row.insert(row.begin() + pick_leg + 1, eval_leg(b, pick_leg + 1));
        }
    }
    return traj;
}

// All strict improvements from swapping two interior permutation entries.
inline std::vector<Trajectory> swap_neighbors(const Trajectory& traj,
                                              const TimeExpandedNetwork& net,
                                              const HeuristicOptions& opts = {}) {
    std::vector<Trajectory> out;
    const size_t len = traj.pi.size();
    if (len < 4) return out;
    const double base = heuristic_value(net, traj, opts);
    for (size_t i = 1; i + 1 < len; ++i) {
        for (size_t j = i + 1; j + 1 < len; ++j) {
            if (traj.pi[i] == traj.pi[j]) continue;
            Trajectory cand = traj;
            std::swap(cand.pi[i], cand.pi[j]);
            const double v = heuristic_value(net, cand, opts);
            if (v < base) out.push_back(std::move(cand));
        }
    }
    return out;
}

// All strict improvements from shifting one interior epoch by one grid step.
inline std::vector<Trajectory> nudge_neighbors(const Trajectory& traj,
                                               const TimeExpandedNetwork& net,
                                               const HeuristicOptions& opts = {}) {
    std::vector<Trajectory> out;
    const size_t len = traj.pi.size();
    const double base = heuristic_value(net, traj, opts);
    for (size_t i = 1; i + 1 < len; ++i) {
        for (const int delta : {-1, +1}) {
            const int t = traj.sigma[i] + delta;
            if (t <= traj.sigma[i - 1] || t >= traj.sigma[i + 1]) continue;  // keep sigma strict
            Trajectory cand = traj;
            cand.sigma[i] = t;
            const double v = heuristic_value(net, cand, opts);
            if (std::isfinite(v) && v < base) out.push_back(std::move(cand));
        }
    }
    return out;
}

namespace detail {

inline const Trajectory& min_neighbor(const std::vector<Trajectory>& cands,
                                      const TimeExpandedNetwork& net,
                                      const HeuristicOptions& opts) {
    size_t best = 0;
    double best_v = heuristic_value(net, cands[0], opts);
    for (size_t i = 1; i < cands.size(); ++i) {
        const double v = heuristic_value(net, cands[i], opts);
        if (v < best_v || (v == best_v && trajectory_less(cands[i], cands[best]))) {
            best = i;
            best_v = v;
        }
    }
    return cands[best];
}

}  // namespace detail

// Alternate exhaustive swap and nudge descents until neither improves.
inline Trajectory swan(Trajectory traj, const TimeExpandedNetwork& net,
                       const HeuristicOptions& opts = {}) {
    while (true) {
        bool improved = false;
        while (true) {
            const auto cands = swap_neighbors(traj, net, opts);
            if (cands.empty()) break;
            traj = detail::min_neighbor(cands, net, opts);
            improved = true;
        }
        while (true) {
            const auto cands = nudge_neighbors(traj, net, opts);
            if (cands.empty()) break;
            traj = detail::min_neighbor(cands, net, opts);
            improved = true;
        }
        if (!improved) return traj;
    }
}

struct BeamConfig {
    int width = 1000;            // w, must be >= the body count
    double shrink_factor = 0.1;  // f in (0, 1]
    int k_swap = 3;              // k > 2, perturbation block size
    enum class Termination { max_iterations, empty_queue, stagnation };
    Termination termination = Termination::stagnation;
    long termination_param = 0;  // 0: default 50 * n stagnation rounds
    uint64_t seed = 0;
};

struct BswanResult {
    Trajectory best;
    double value = std::numeric_limits<double>::infinity();
    long iterations = 0;
    size_t max_queue_size = 0;
    std::vector<std::pair<long, double>> incumbent_history;  // (iteration, value)
};

// Beam search over the swap/nudge space: expand swaps while not 2-opt, then
// nudges while not nudge-opt; 2-nudge-opt improvements become the incumbent
// and seed k-swap perturbations. The queue is a value-ordered set shrunk to
// f*w whenever it grows past w.
inline BswanResult b_swan(const TimeExpandedNetwork& net, const std::vector<Trajectory>& seeds,
                          const BeamConfig& cfg, const HeuristicOptions& opts = {}) {
    if (seeds.empty()) throw std::invalid_argument("b_swan: at least one seed required");
    if (cfg.width < net.n_bodies)
        throw std::invalid_argument("b_swan: beam width must be at least the body count");
    if (!(cfg.shrink_factor > 0.0) || cfg.shrink_factor > 1.0)
        throw std::invalid_argument("b_swan: shrink factor must be in (0, 1]");
    if (cfg.k_swap <= 2) throw std::invalid_argument("b_swan: k must exceed 2");

    struct Entry {
        double value;
        Trajectory traj;
        bool operator<(const Entry& o) const {
            if (value != o.value) return value < o.value;
            return trajectory_less(traj, o.traj);
        }
    };

    std::mt19937_64 rng(cfg.seed);
    std::set<Entry> queue;
    BswanResult res;
    for (const auto& seed : seeds) {
        const double v = heuristic_value(net, seed, opts);
        if (!std::isfinite(v))
            throw std::invalid_argument("b_swan: seed trajectory is infeasible on this network");
        queue.insert({v, seed});
        if (v < res.value || (v == res.value && trajectory_less(seed, res.best))) {
            res.value = v;
            res.best = seed;
        }
    }
    res.incumbent_history.push_back({0, res.value});

    const long stagnation_limit = cfg.termination_param > 0
                                      ? cfg.termination_param
                                      : 50l * std::max(1, net.n_bodies);
    long stagnant = 0;

    const size_t shrink_to =
        std::max<size_t>(1, static_cast<size_t>(cfg.shrink_factor * cfg.width));

    while (!queue.empty()) {
        if (cfg.termination == BeamConfig::Termination::max_iterations &&
            res.iterations >= cfg.termination_param)
            break;
        if (cfg.termination == BeamConfig::Termination::stagnation && stagnant >= stagnation_limit)
            break;
        ++res.iterations;
        ++stagnant;
        res.max_queue_size = std::max(res.max_queue_size, queue.size());

        if (queue.size() > static_cast<size_t>(cfg.width)) {
            while (queue.size() > shrink_to) queue.erase(std::prev(queue.end()));
            continue;
        }

        const Entry entry = *queue.begin();
        queue.erase(queue.begin());

        const auto swaps = swap_neighbors(entry.traj, net, opts);
        if (!swaps.empty()) {
            for (const auto& cand : swaps)
                queue.insert({heuristic_value(net, cand, opts), cand});
            continue;
        }
        const auto nudges = nudge_neighbors(entry.traj, net, opts);
        if (!nudges.empty()) {
            for (const auto& cand : nudges)
                queue.insert({heuristic_value(net, cand, opts), cand});
            continue;
        }

        // 2-nudge-opt: strict improvements become the incumbent; ties (the
        // seeded incumbent itself in particular) still fire perturbations,
        // otherwise a locally optimal single seed would end the search on
        // the spot
        const bool improved = entry.value < res.value;
        if (improved || entry.value <= res.value + 1e-12) {
            if (improved) {
                res.value = entry.value;
                res.best = entry.traj;
                res.incumbent_history.push_back({res.iterations, res.value});
                stagnant = 0;
            }

            // k-swap perturbations: cyclic shift of k random interior entries
            std::vector<size_t> interior;
            for (size_t i = 1; i + 1 < entry.traj.pi.size(); ++i) interior.push_back(i);
            const int k_eff = std::min<int>(cfg.k_swap, static_cast<int>(interior.size()));
            if (k_eff >= 2) {
                for (size_t r = 0; r < shrink_to; ++r) {
                    std::vector<size_t> pool = interior;
                    std::vector<size_t> picked;
                    for (int c = 0; c < k_eff; ++c) {
                        std::uniform_int_distribution<size_t> dist(0, pool.size() - 1);
                        const size_t at = dist(rng);
                        picked.push_back(pool[at]);
                        pool.erase(pool.begin() + at);
                    }
                    std::sort(picked.begin(), picked.end());
                    std::uniform_int_distribution<int> sdist(1, k_eff - 1);
                    const int shift = sdist(rng);
                    Trajectory cand = entry.traj;
                    for (int c = 0; c < k_eff; ++c) {
                        cand.pi[picked[c]] = entry.traj.pi[picked[(c + shift) % k_eff]];
                    }
                    const double v = heuristic_value(net, cand, opts);
                    if (std::isfinite(v)) queue.insert({v, cand});
                }
            }
        }
    }
    return res;
}

}  // namespace ktsp
