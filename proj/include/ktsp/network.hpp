#pragma once

// Time-expanded networks over a uniform grid. Vertices are (body, time index)
// pairs; coasting arcs (body, t) -> (body, t+1) carry weight zero and are
// implicit -- only transfer arcs are stored, sorted by
// (from.time, from.body, to.time, to.body).
//
// Network file format:
//
//   c <comment>
//   p ktspnet <n_bodies> <n_time_points> <t0_seconds> <tmax_seconds> <start_body_index>
//   a <from_body> <from_time_idx> <to_body> <to_time_idx> <delta_v>

#include <algorithm>
#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include "ktsp/instance.hpp"

namespace ktsp {

struct TimeGrid {
    double t0 = 0.0;
    double t_max = 0.0;
    int n_points = 0;
    double dt = 0.0;

    double time(int i) const { return t0 + i * dt; }
};

inline TimeGrid build_grid(double t0, double t_max, int n_points) {
    if (n_points < 2) throw std::invalid_argument("build_grid: n_points must be >= 2");
    if (!(t_max > t0)) throw std::invalid_argument("build_grid: t_max must exceed t0");
    TimeGrid g;
    g.t0 = t0;
    g.t_max = t_max;
    g.n_points = n_points;
    g.dt = (t_max - t0) / (n_points - 1);
    return g;
}

// Refined grid per the node-doubling construction: |T'| = 2(|T|-1)+1, halving
// dt exactly so every original grid point is preserved bit-for-bit.
inline TimeGrid double_grid(const TimeGrid& g) {
    TimeGrid d = g;
    d.n_points = 2 * (g.n_points - 1) + 1;
    d.dt = g.dt / 2.0;
    return d;
}

struct Node {
    int body = 0;
    int time = 0;

    bool operator==(const Node& o) const { return body == o.body && time == o.time; }
};

struct TransferArc {
    Node from;
    Node to;
    double weight = 0.0;
};

inline bool arc_order_less(const TransferArc& a, const TransferArc& b) {
    if (a.from.time != b.from.time) return a.from.time < b.from.time;
    if (a.from.body != b.from.body) return a.from.body < b.from.body;
    if (a.to.time != b.to.time) return a.to.time < b.to.time;
    return a.to.body < b.to.body;
}

struct TimeExpandedNetwork {
    int n_bodies = 0;
    TimeGrid grid;
    int start_index = 0;
    std::vector<TransferArc> arcs;  // canonical (from.time, from.body, to.time, to.body) order

    int n_nodes() const { return n_bodies * grid.n_points; }
    // time-major node ids give a topological order of the DAG
    int node_id(int body, int time) const { return time * n_bodies + body; }
    int node_id(const Node& n) const { return node_id(n.body, n.time); }

    // Arcs departing (body, time): contiguous in the canonical order.
    std::pair<size_t, size_t> out_range(int body, int time) const {
        TransferArc key;
        key.from = {body, time};
        key.to = {std::numeric_limits<int>::min(), std::numeric_limits<int>::min()};
        const auto lo = std::lower_bound(arcs.begin(), arcs.end(), key, arc_order_less);
        key.to = {std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
        const auto hi = std::upper_bound(arcs.begin(), arcs.end(), key, arc_order_less);
        return {static_cast<size_t>(lo - arcs.begin()), static_cast<size_t>(hi - arcs.begin())};
    }

    std::optional<size_t> find_arc(int from_body, int from_time, int to_body, int to_time) const {
        TransferArc key;
        key.from = {from_body, from_time};
        key.to = {to_body, to_time};
        const auto it = std::lower_bound(arcs.begin(), arcs.end(), key, arc_order_less);
        if (it == arcs.end() || it->from.body != from_body || it->from.time != from_time ||
            it->to.body != to_body || it->to.time != to_time)
            return std::nullopt;
        return static_cast<size_t>(it - arcs.begin());
    }

    bool operator==(const TimeExpandedNetwork& o) const {
        if (n_bodies != o.n_bodies || start_index != o.start_index) return false;
        if (grid.t0 != o.grid.t0 || grid.t_max != o.grid.t_max || grid.n_points != o.grid.n_points)
            return false;
        if (arcs.size() != o.arcs.size()) return false;
        for (size_t i = 0; i < arcs.size(); ++i) {
            if (!(arcs[i].from == o.arcs[i].from) || !(arcs[i].to == o.arcs[i].to) ||
                arcs[i].weight != o.arcs[i].weight)
                return false;
        }
        return true;
    }
};

inline void validate_network(const TimeExpandedNetwork& net) {
    if (net.n_bodies < 1) throw std::invalid_argument("network: n_bodies must be >= 1");
    if (net.grid.n_points < 2) throw std::invalid_argument("network: grid needs >= 2 points");
    if (net.start_index < 0 || net.start_index >= net.n_bodies)
        throw std::invalid_argument("network: start index out of range");
    for (size_t i = 0; i < net.arcs.size(); ++i) {
        const auto& a = net.arcs[i];
        if (a.from.body < 0 || a.from.body >= net.n_bodies || a.to.body < 0 ||
            a.to.body >= net.n_bodies)
            throw std::invalid_argument("network: arc body index out of range");
        if (a.from.time < 0 || a.from.time >= net.grid.n_points || a.to.time < 0 ||
            a.to.time >= net.grid.n_points)
            throw std::invalid_argument("network: arc time index out of range");
        if (a.from.time >= a.to.time)
            throw std::invalid_argument("network: transfer arc must move strictly forward in time");
        if (a.from.body == a.to.body)
            throw std::invalid_argument("network: transfer arc must change body");
        if (!(a.weight >= 0.0) || !std::isfinite(a.weight))
            throw std::invalid_argument("network: arc weight must be finite and >= 0");
        if (i > 0 && !arc_order_less(net.arcs[i - 1], a))
            throw std::invalid_argument("network: arcs not in canonical order or duplicated");
    }
}

// Transfer-cost oracle: delta-v to leave `from_body` at epoch t_depart and
// rendezvous with `to_body` at t_arrive, or nullopt when infeasible. Epochs
// are absolute seconds so that refined grids query consistent costs.
using CostOracle =
    std::function<std::optional<double>(int from_body, int to_body, double t_depart, double t_arrive)>;

struct BuildOptions {
    std::optional<double> dv_cap;    // omit arcs costlier than this
    std::optional<double> penalty;   // all-feasible mode: omitted arcs carry this weight instead
    int workers = 1;
};

inline constexpr double kDefaultPenaltyDv = 1e9;  // m/s, stands in for an infeasible transfer

// Lambert-backed cost oracle with a per-epoch propagation cache.
// max_revs < 0 selects the per-transfer default (tof / departure period, capped at 4).
inline CostOracle make_lambert_oracle(const Instance& inst, int max_revs = -1) {
    struct Cache {
        Instance inst;
        int max_revs;
        std::map<std::pair<int, double>, StateVector> states;
        std::mutex mtx;

        StateVector state_at(int body, double t) {
            const auto key = std::make_pair(body, t);
            {
                std::lock_guard<std::mutex> lock(mtx);
                const auto it = states.find(key);
                if (it != states.end()) return it->second;
            }
            const StateVector s = propagate(inst.bodies[body].state, inst.mu, t - inst.t0);
            std::lock_guard<std::mutex> lock(mtx);
            states.emplace(key, s);
            return s;
        }
    };
    auto cache = std::make_shared<Cache>();
    cache->inst = inst;
    cache->max_revs = max_revs;
    return [cache](int from_body, int to_body, double t_depart,
                   double t_arrive) -> std::optional<double> {
        const double tof = t_arrive - t_depart;
        if (!(tof > 0.0)) return std::nullopt;
        try {
            const StateVector a = cache->state_at(from_body, t_depart);
            const StateVector b = cache->state_at(to_body, t_arrive);
            const int revs = cache->max_revs >= 0 ? cache->max_revs
                                                  : default_max_revs(a, cache->inst.mu, tof);
            return transfer_cost(a, b, tof, cache->inst.mu, revs);
        } catch (const std::exception&) {
            return std::nullopt;  // oracle failure just omits the arc
        }
    };
}

inline TimeExpandedNetwork build_network(const Instance& inst, const TimeGrid& grid,
                                         const CostOracle& oracle,
                                         const BuildOptions& opts = {}) {
    validate_instance(inst);
    if (grid.t0 != inst.t0 || grid.t_max != inst.t_max)
        throw std::invalid_argument("build_network: grid window does not match instance window");
    TimeExpandedNetwork net;
    net.n_bodies = inst.n_bodies();
    net.grid = grid;
    net.start_index = inst.start_index;

    const int n = net.n_bodies;
    const int T = grid.n_points;

    // One chunk per departure time keeps the merge order canonical no matter
    // how many workers computed the costs.
    std::vector<std::vector<TransferArc>> chunks(T);
    const auto run_chunk = [&](int t) {
        auto& arcs = chunks[t];
        for (int a = 0; a < n; ++a) {
            for (int t2 = t + 1; t2 < T; ++t2) {
                for (int b = 0; b < n; ++b) {
                    if (b == a) continue;
                    std::optional<double> cost = oracle(a, b, grid.time(t), grid.time(t2));
                    if (cost && opts.dv_cap && *cost > *opts.dv_cap) cost.reset();
                    if (!cost) {
                        if (!opts.penalty) continue;
                        cost = *opts.penalty;
                    }
                    arcs.push_back({{a, t}, {b, t2}, *cost});
                }
            }
        }
    };

    const int workers = std::max(1, opts.workers);
    if (workers == 1) {
        for (int t = 0; t < T - 1; ++t) run_chunk(t);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < T - 1; t = next.fetch_add(1)) run_chunk(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (auto& chunk : chunks) {
        net.arcs.insert(net.arcs.end(), chunk.begin(), chunk.end());
    }
    std::sort(net.arcs.begin(), net.arcs.end(), arc_order_less);
    validate_network(net);
    return net;
}

inline TimeExpandedNetwork parse_network(const std::string& text) {
    TimeExpandedNetwork net;
    bool have_header = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0] == "c") continue;
        if (toks[0] == "p") {
            if (have_header) throw ParseError(lineno, "duplicate 'p' header");
            if (toks.size() < 2 || toks[1] != "ktspnet")
                throw ParseError(lineno, "expected 'p ktspnet' header");
            if (toks.size() != 7)
                throw ParseError(lineno,
                                 "'p ktspnet' header: expected <n_bodies> <n_time_points> "
                                 "<t0_seconds> <tmax_seconds> <start_body_index>");
            net.n_bodies = static_cast<int>(detail::parse_int(toks[2], lineno, "n_bodies"));
            const int n_points = static_cast<int>(detail::parse_int(toks[3], lineno, "n_time_points"));
            const double t0 = detail::parse_double(toks[4], lineno, "t0_seconds");
            const double t_max = detail::parse_double(toks[5], lineno, "tmax_seconds");
            net.start_index = static_cast<int>(detail::parse_int(toks[6], lineno, "start_body_index"));
            if (n_points < 2) throw ParseError(lineno, "n_time_points must be >= 2");
            if (!(t_max > t0)) throw ParseError(lineno, "tmax must exceed t0");
            net.grid = build_grid(t0, t_max, n_points);
            have_header = true;
        } else if (toks[0] == "a") {
            if (!have_header) throw ParseError(lineno, "'a' line before 'p ktspnet' header");
            if (toks.size() != 6)
                throw ParseError(lineno,
                                 "'a' line: expected <from_body> <from_time_idx> <to_body> "
                                 "<to_time_idx> <delta_v>");
            TransferArc a;
            a.from.body = static_cast<int>(detail::parse_int(toks[1], lineno, "from_body"));
            a.from.time = static_cast<int>(detail::parse_int(toks[2], lineno, "from_time_idx"));
            a.to.body = static_cast<int>(detail::parse_int(toks[3], lineno, "to_body"));
            a.to.time = static_cast<int>(detail::parse_int(toks[4], lineno, "to_time_idx"));
            a.weight = detail::parse_double(toks[5], lineno, "delta_v");
            if (a.from.body < 0 || a.from.body >= net.n_bodies || a.to.body < 0 ||
                a.to.body >= net.n_bodies)
                throw ParseError(lineno, "arc body index out of range");
            if (a.from.time < 0 || a.from.time >= net.grid.n_points || a.to.time < 0 ||
                a.to.time >= net.grid.n_points)
                throw ParseError(lineno, "arc time index out of range");
            if (a.from.time >= a.to.time)
                throw ParseError(lineno, "arc must satisfy from_time < to_time");
            if (a.from.body == a.to.body)
                throw ParseError(lineno, "arc must connect two distinct bodies");
            if (!(a.weight >= 0.0) || !std::isfinite(a.weight))
                throw ParseError(lineno, "arc weight must be finite and >= 0");
            net.arcs.push_back(a);
        } else {
            throw ParseError(lineno, "unknown line type '" + toks[0] + "'");
        }
    }
    if (!have_header) throw ParseError(lineno, "missing 'p ktspnet' header");
    if (net.start_index < 0 || net.start_index >= net.n_bodies)
        throw ParseError(lineno, "start body index out of range");

    std::sort(net.arcs.begin(), net.arcs.end(), arc_order_less);
    for (size_t i = 1; i < net.arcs.size(); ++i) {
        if (!arc_order_less(net.arcs[i - 1], net.arcs[i]))
            throw ParseError(lineno, "duplicate arc (" + std::to_string(net.arcs[i].from.body) +
                                         "," + std::to_string(net.arcs[i].from.time) + ") -> (" +
                                         std::to_string(net.arcs[i].to.body) + "," +
                                         std::to_string(net.arcs[i].to.time) + ")");
    }
    return net;
}

inline std::string serialize_network(const TimeExpandedNetwork& net,
                                     const std::string& comment = "") {
    validate_network(net);
    std::ostringstream out;
    if (!comment.empty()) out << "c " << comment << "\n";
    out << "p ktspnet " << net.n_bodies << " " << net.grid.n_points << " " << fmt17(net.grid.t0)
        << " " << fmt17(net.grid.t_max) << " " << net.start_index << "\n";
    for (const auto& a : net.arcs) {
        out << "a " << a.from.body << " " << a.from.time << " " << a.to.body << " " << a.to.time
            << " " << fmt17(a.weight) << "\n";
    }
    return out.str();
}

}  // namespace ktsp
