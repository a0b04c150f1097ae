#pragma once

// Permutation-schedule tours. pi lists the bodies in visiting order and sigma
// the grid epochs; consecutive equal bodies denote coasting, any other leg is
// exactly one transfer arc departing at sigma[i] and arriving at sigma[i+1].
//
// Tour file format:
//
//   c <comment>
//   t ktsptour <n_legs> <value>
//   <body> <time_idx>          one line per visited node, in order

#include <set>

#include "ktsp/network.hpp"

namespace ktsp {

struct Trajectory {
    std::vector<int> pi;     // body index per visited node
    std::vector<int> sigma;  // grid index per visited node, strictly increasing
    bool allow_revisits = false;
};

struct ValidationResult {
    bool feasible = false;
    std::string reason;   // empty when feasible
    int leg = -1;         // offending leg index when applicable

    explicit operator bool() const { return feasible; }
};

struct MissingArcError : std::runtime_error {
    int leg;
    MissingArcError(int leg_, const std::string& what) : std::runtime_error(what), leg(leg_) {}
};

inline ValidationResult validate(const Trajectory& traj, const TimeExpandedNetwork& net) {
    const auto fail = [](const std::string& reason, int leg = -1) {
        return ValidationResult{false, reason, leg};
    };
    const size_t len = traj.pi.size();
    if (len != traj.sigma.size()) return fail("pi and sigma differ in length");
    if (len < 2) return fail("trajectory needs at least start and end entries");
    for (size_t i = 0; i < len; ++i) {
        if (traj.pi[i] < 0 || traj.pi[i] >= net.n_bodies) return fail("body index out of range");
        if (traj.sigma[i] < 0 || traj.sigma[i] >= net.grid.n_points)
            return fail("time index out of range");
    }
    if (traj.pi.front() != net.start_index || traj.pi.back() != net.start_index)
        return fail("trajectory must start and end at the start body");
    if (traj.sigma.front() != 0) return fail("schedule must start at t0");
    if (traj.sigma.back() != net.grid.n_points - 1) return fail("schedule must end at t_max");
    for (size_t i = 0; i + 1 < len; ++i) {
        if (traj.sigma[i] >= traj.sigma[i + 1])
            return fail("schedule not increasing", static_cast<int>(i));
    }

    std::vector<char> visited(net.n_bodies, 0);
    for (int b : traj.pi) visited[b] = 1;
    for (int b = 0; b < net.n_bodies; ++b) {
        if (!visited[b]) return fail("body not visited: " + std::to_string(b));
    }

    if (!traj.allow_revisits) {
        // collapse coasting runs to visits; interior visits must be distinct
        // and must not return to the start body before the final entry
        std::vector<int> visits;
        for (size_t i = 0; i < len; ++i) {
            if (i == 0 || traj.pi[i] != traj.pi[i - 1]) visits.push_back(traj.pi[i]);
        }
        std::set<int> seen;
        for (size_t k = 1; k + 1 < visits.size(); ++k) {
            if (visits[k] == net.start_index || !seen.insert(visits[k]).second)
                return fail("body revisited but revisits are disabled: " + std::to_string(visits[k]));
        }
    }

    for (size_t i = 0; i + 1 < len; ++i) {
        if (traj.pi[i] == traj.pi[i + 1]) continue;  // coasting chain
        if (!net.find_arc(traj.pi[i], traj.sigma[i], traj.pi[i + 1], traj.sigma[i + 1]))
            return fail("leg " + std::to_string(i) + " uses a transfer arc absent from the network",
                        static_cast<int>(i));
    }
    return {true, "", -1};
}

inline double value(const Trajectory& traj, const TimeExpandedNetwork& net) {
    double total = 0.0;
    for (size_t i = 0; i + 1 < traj.pi.size(); ++i) {
        if (traj.pi[i] == traj.pi[i + 1]) continue;  // coasting is free
        const auto idx = net.find_arc(traj.pi[i], traj.sigma[i], traj.pi[i + 1], traj.sigma[i + 1]);
        if (!idx) {
            throw MissingArcError(
                static_cast<int>(i),
                "leg " + std::to_string(i) + ": arc (" + std::to_string(traj.pi[i]) + "," +
                    std::to_string(traj.sigma[i]) + ") -> (" + std::to_string(traj.pi[i + 1]) + "," +
                    std::to_string(traj.sigma[i + 1]) + ") not in network");
        }
        total += net.arcs[*idx].weight;
    }
    return total;
}

inline bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.pi == b.pi && a.sigma == b.sigma;
}

inline bool trajectory_less(const Trajectory& a, const Trajectory& b) {
    if (a.pi != b.pi) return a.pi < b.pi;
    return a.sigma < b.sigma;
}

inline Trajectory parse_tour(const std::string& text) {
    Trajectory traj;
    bool have_header = false;
    long declared_legs = 0;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0] == "c") continue;
        if (toks[0] == "t") {
            if (have_header) throw ParseError(lineno, "duplicate 't' header");
            if (toks.size() != 4 || toks[1] != "ktsptour")
                throw ParseError(lineno, "expected 't ktsptour <n_legs> <value>' header");
            declared_legs = detail::parse_int(toks[2], lineno, "n_legs");
            detail::parse_double(toks[3], lineno, "value");
            have_header = true;
        } else {
            if (!have_header) throw ParseError(lineno, "node line before 't ktsptour' header");
            if (toks.size() != 2) throw ParseError(lineno, "expected '<body> <time_idx>'");
            traj.pi.push_back(static_cast<int>(detail::parse_int(toks[0], lineno, "body")));
            traj.sigma.push_back(static_cast<int>(detail::parse_int(toks[1], lineno, "time_idx")));
        }
    }
    if (!have_header) throw ParseError(lineno, "missing 't ktsptour' header");
    if (declared_legs + 1 != static_cast<long>(traj.pi.size()))
        throw ParseError(lineno, "header declares " + std::to_string(declared_legs) +
                                     " legs, file has " + std::to_string(traj.pi.size()) + " nodes");
    return traj;
}

inline std::string serialize_tour(const Trajectory& traj, double tour_value,
                                  const std::string& comment = "") {
    std::ostringstream out;
    if (!comment.empty()) out << "c " << comment << "\n";
    out << "t ktsptour " << (traj.pi.size() - 1) << " " << fmt17(tour_value) << "\n";
    for (size_t i = 0; i < traj.pi.size(); ++i) {
        out << traj.pi[i] << " " << traj.sigma[i] << "\n";
    }
    return out.str();
}

}  // namespace ktsp
