#pragma once

// Abstract binary minimization models plus the time-indexed encoding of a
// time-expanded network: one variable per arc (coasting and transfer),
// departure / flow / vehicle constraint families, and an LP-format writer
// with 17-significant-digit coefficients.

#include <map>
#include <unordered_map>

#include "ktsp/trajectory.hpp"

namespace ktsp {

enum class Sense { le, ge, eq };

struct LinTerm {
    int var = 0;
    double coef = 0.0;
};

struct IlpConstraint {
    std::string name;
    std::vector<LinTerm> terms;
    Sense sense = Sense::le;
    double rhs = 0.0;
};

struct IlpModel {
    std::vector<std::string> var_names;  // all variables binary
    std::vector<double> costs;           // objective: minimize costs . x
    std::vector<IlpConstraint> constraints;

    int n_vars() const { return static_cast<int>(var_names.size()); }

    int add_var(const std::string& name, double cost) {
        var_names.push_back(name);
        costs.push_back(cost);
        return static_cast<int>(var_names.size()) - 1;
    }

    void validate() const {
        for (double c : costs) {
            if (!(c >= 0.0) || !std::isfinite(c))
                throw std::invalid_argument("ilp model: costs must be finite and >= 0");
        }
        for (const auto& con : constraints) {
            for (const auto& t : con.terms) {
                if (t.var < 0 || t.var >= n_vars())
                    throw std::invalid_argument("ilp model: constraint '" + con.name +
                                                "' references undeclared variable");
            }
        }
    }
};

inline std::string grid_var_name(const Node& from, const Node& to) {
    return "x_" + std::to_string(from.body) + "_" + std::to_string(from.time) + "_" +
           std::to_string(to.body) + "_" + std::to_string(to.time);
}

// Time-indexed model for a network. Arcs (coasting then transfer candidates)
// are emitted in the canonical (from.time, from.body, to.time, to.body)
// order. For a single body no departure constraint is emitted: the tour is
// pure coasting.
inline IlpModel build_time_indexed(const TimeExpandedNetwork& net) {
    validate_network(net);
    IlpModel m;
    const int n = net.n_bodies;
    const int T = net.grid.n_points;

    struct ArcRef {
        Node from, to;
        double weight;
        bool transfer;
    };
    std::vector<ArcRef> all;
    all.reserve(net.arcs.size() + static_cast<size_t>(n) * (T - 1));
    for (int t = 0; t + 1 < T; ++t) {
        for (int b = 0; b < n; ++b) all.push_back({{b, t}, {b, t + 1}, 0.0, false});
    }
    for (const auto& a : net.arcs) all.push_back({a.from, a.to, a.weight, true});
    std::sort(all.begin(), all.end(), [](const ArcRef& a, const ArcRef& b) {
        if (a.from.time != b.from.time) return a.from.time < b.from.time;
        if (a.from.body != b.from.body) return a.from.body < b.from.body;
        if (a.to.time != b.to.time) return a.to.time < b.to.time;
        return a.to.body < b.to.body;
    });

    std::vector<std::vector<LinTerm>> out_terms(static_cast<size_t>(n) * T);
    std::vector<std::vector<LinTerm>> in_terms(static_cast<size_t>(n) * T);
    std::vector<std::vector<LinTerm>> depart_terms(n);
    for (const auto& a : all) {
        const int v = m.add_var(grid_var_name(a.from, a.to), a.weight);
        out_terms[static_cast<size_t>(a.from.time) * n + a.from.body].push_back({v, 1.0});
        in_terms[static_cast<size_t>(a.to.time) * n + a.to.body].push_back({v, 1.0});
        if (a.transfer) depart_terms[a.from.body].push_back({v, 1.0});
    }

    if (n > 1) {
        for (int b = 0; b < n; ++b) {
            IlpConstraint c;
            c.name = "depart_" + std::to_string(b);
            c.terms = depart_terms[b];
            c.sense = Sense::ge;
            c.rhs = 1.0;
            m.constraints.push_back(std::move(c));
        }
    }
    for (int b = 0; b < n; ++b) {
        for (int t = 0; t < T; ++t) {
            if (b == net.start_index && (t == 0 || t == T - 1)) continue;
            IlpConstraint c;
            c.name = "flow_" + std::to_string(b) + "_" + std::to_string(t);
            c.terms = out_terms[static_cast<size_t>(t) * n + b];
            for (auto term : in_terms[static_cast<size_t>(t) * n + b]) {
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
        c.terms = out_terms[static_cast<size_t>(0) * n + net.start_index];
        c.sense = Sense::le;
        c.rhs = 1.0;
        m.constraints.push_back(std::move(c));
    }
    return m;
}

// Checks a 0/1 assignment against every constraint; returns the name of the
// first violated constraint or an empty string.
inline std::string first_violated_constraint(const IlpModel& m, const std::vector<int8_t>& x,
                                             double tol = 1e-6) {
    for (const auto& c : m.constraints) {
        double lhs = 0.0;
        for (const auto& t : c.terms) lhs += t.coef * (x[t.var] ? 1.0 : 0.0);
        const bool ok = (c.sense == Sense::le)   ? lhs <= c.rhs + tol
                        : (c.sense == Sense::ge) ? lhs >= c.rhs - tol
                                                 : std::abs(lhs - c.rhs) <= tol;
        if (!ok) return c.name;
    }
    return "";
}

inline double assignment_objective(const IlpModel& m, const std::vector<int8_t>& x) {
    double obj = 0.0;
    for (int v = 0; v < m.n_vars(); ++v) obj += x[v] ? m.costs[v] : 0.0;
    return obj;
}

// Extracts the tour from a feasible time-indexed solution by walking the
// selected arcs from (start, t0). The selected arcs of a valid solution form
// exactly one walk; anything else trips an error.
inline Trajectory extract_trajectory(const IlpModel& m, const std::vector<int8_t>& x,
                                     const TimeExpandedNetwork& net) {
    if (static_cast<int>(x.size()) != m.n_vars())
        throw std::invalid_argument("extract_trajectory: assignment size mismatch");
    const int n = net.n_bodies;
    const int T = net.grid.n_points;

    std::vector<std::vector<std::pair<Node, int>>> out(static_cast<size_t>(n) * T);
    size_t selected = 0;
    for (int v = 0; v < m.n_vars(); ++v) {
        if (!x[v]) continue;
        int fb, ft, tb, tt;
        if (std::sscanf(m.var_names[v].c_str(), "x_%d_%d_%d_%d", &fb, &ft, &tb, &tt) != 4)
            throw std::invalid_argument("extract_trajectory: variable '" + m.var_names[v] +
                                        "' is not a grid arc");
        out[static_cast<size_t>(ft) * n + fb].push_back({{tb, tt}, v});
        ++selected;
    }

    std::vector<std::pair<int, int>> nodes;  // (body, time)
    Node cur{net.start_index, 0};
    nodes.push_back({cur.body, cur.time});
    size_t used = 0;
    while (true) {
        auto& outs = out[static_cast<size_t>(cur.time) * n + cur.body];
        if (outs.empty()) break;
        if (outs.size() > 1)
            throw std::runtime_error("extract_trajectory: selected arcs do not form one walk "
                                     "(two arcs leave the same node)");
        cur = outs.front().first;
        outs.clear();
        ++used;
        nodes.push_back({cur.body, cur.time});
    }
    if (used != selected)
        throw std::runtime_error("extract_trajectory: selected arcs do not form one walk "
                                 "(disconnected arcs remain)");
    if (cur.body != net.start_index || cur.time != T - 1)
        throw std::runtime_error("extract_trajectory: walk does not end at (start, t_max)");

    Trajectory traj;
    traj.pi.push_back(nodes.front().first);
    traj.sigma.push_back(nodes.front().second);
    for (size_t i = 1; i < nodes.size(); ++i) {
        const auto [pb, pt] = nodes[i - 1];
        const auto [cb, ct] = nodes[i];
        if (cb == pb) continue;
        if (traj.sigma.back() != pt) {
            traj.pi.push_back(pb);
            traj.sigma.push_back(pt);
        }
        traj.pi.push_back(cb);
        traj.sigma.push_back(ct);
    }
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
    return traj;
}

// LP text format: objective, constraints, binary section. Coefficients use
// 17 significant digits so the file round-trips doubles exactly.
inline std::string write_lp(const IlpModel& m, const std::string& comment = "") {
    std::ostringstream out;
    if (!comment.empty()) out << "\\ " << comment << "\n";
    out << "Minimize\n obj:";
    int on_line = 0;
    for (int v = 0; v < m.n_vars(); ++v) {
        out << " + " << fmt17(m.costs[v]) << " " << m.var_names[v];
        if (++on_line % 8 == 0) out << "\n     ";
    }
    out << "\nSubject To\n";
    for (const auto& c : m.constraints) {
        out << " " << c.name << ":";
        on_line = 0;
        for (const auto& t : c.terms) {
            if (t.coef >= 0.0) {
                out << " + " << fmt17(t.coef);
            } else {
                out << " - " << fmt17(-t.coef);
            }
            out << " " << m.var_names[t.var];
            if (++on_line % 8 == 0) out << "\n     ";
        }
        if (c.terms.empty()) out << " 0 " << m.var_names.at(0);  // LP rows need a term
        out << (c.sense == Sense::le ? " <= " : c.sense == Sense::ge ? " >= " : " = ")
            << fmt17(c.rhs) << "\n";
    }
    out << "Binary\n";
    for (const auto& name : m.var_names) out << " " << name << "\n";
    out << "End\n";
    return out.str();
}

}  // namespace ktsp
