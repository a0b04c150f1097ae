#pragma once

// Instance definition and its line-oriented file format:
//
//   c <comment>
//   p ktsp <n_bodies> <t0_seconds> <tmax_seconds> <mu_m3s2> <start_id>
//   b <id> <rx> <ry> <rz> <vx> <vy> <vz>
//
// All values SI. Comment lines and blank lines may appear anywhere.

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "ktsp/astro.hpp"

namespace ktsp {

struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(int line_, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}
};

struct Body {
    std::string id;
    StateVector state;  // Cartesian state at t0
};

struct Instance {
    double mu = 0.0;
    double t0 = 0.0;
    double t_max = 0.0;
    std::vector<Body> bodies;
    int start_index = 0;

    int n_bodies() const { return static_cast<int>(bodies.size()); }
};

// Shortest decimal form that round-trips a double exactly.
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void validate_instance(const Instance& inst) {
    if (inst.bodies.empty()) throw std::invalid_argument("instance: bodies must be non-empty");
    if (!(inst.mu > 0.0)) throw std::invalid_argument("instance: mu must be positive");
    if (!(inst.t_max > inst.t0)) throw std::invalid_argument("instance: t_max must exceed t0");
    if (inst.start_index < 0 || inst.start_index >= inst.n_bodies())
        throw std::invalid_argument("instance: start_index out of range");
    std::unordered_set<std::string> ids;
    for (const auto& b : inst.bodies) {
        if (!ids.insert(b.id).second)
            throw std::invalid_argument("instance: duplicate body id '" + b.id + "'");
        if (!(b.state.position.norm() > 0.0))
            throw std::invalid_argument("instance: body '" + b.id + "' at central-mass singularity");
        for (double c : {b.state.position.x, b.state.position.y, b.state.position.z,
                         b.state.velocity.x, b.state.velocity.y, b.state.velocity.z}) {
            if (!std::isfinite(c))
                throw std::invalid_argument("instance: body '" + b.id + "' has non-finite state");
        }
    }
}

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline double parse_double(const std::string& tok, int line, const char* what) {
    try {
        size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, std::string("expected number for ") + what + ", got '" + tok + "'");
    }
}

inline long parse_int(const std::string& tok, int line, const char* what) {
    try {
        size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, std::string("expected integer for ") + what + ", got '" + tok + "'");
    }
}

}  // namespace detail

inline Instance parse_instance(const std::string& text) {
    Instance inst;
    bool have_header = false;
    long declared_bodies = 0;
    std::string start_id;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = detail::split_ws(line);
        if (toks.empty() || toks[0] == "c") continue;
        if (toks[0] == "p") {
            if (have_header) throw ParseError(lineno, "duplicate 'p' header");
            if (toks.size() < 2 || toks[1] != "ktsp")
                throw ParseError(lineno, "expected 'p ktsp' header");
            static const char* kFields[] = {"n_bodies", "t0_seconds", "tmax_seconds",
                                            "mu_m3s2", "start_id"};
            if (toks.size() != 7) {
                const size_t got = toks.size() - 2;
                std::string msg = "'p ktsp' header: expected fields";
                for (const char* f : kFields) msg += std::string(" <") + f + ">";
                if (got < 5) msg += "; missing " + std::string(kFields[got]);
                throw ParseError(lineno, msg);
            }
            declared_bodies = detail::parse_int(toks[2], lineno, "n_bodies");
            inst.t0 = detail::parse_double(toks[3], lineno, "t0_seconds");
            inst.t_max = detail::parse_double(toks[4], lineno, "tmax_seconds");
            inst.mu = detail::parse_double(toks[5], lineno, "mu_m3s2");
            start_id = toks[6];
            have_header = true;
        } else if (toks[0] == "b") {
            if (!have_header) throw ParseError(lineno, "'b' line before 'p ktsp' header");
            if (toks.size() != 8)
                throw ParseError(lineno, "'b' line: expected <id> <rx> <ry> <rz> <vx> <vy> <vz>");
            Body b;
            b.id = toks[1];
            b.state.position = {detail::parse_double(toks[2], lineno, "rx"),
                                detail::parse_double(toks[3], lineno, "ry"),
                                detail::parse_double(toks[4], lineno, "rz")};
            b.state.velocity = {detail::parse_double(toks[5], lineno, "vx"),
                                detail::parse_double(toks[6], lineno, "vy"),
                                detail::parse_double(toks[7], lineno, "vz")};
            inst.bodies.push_back(std::move(b));
        } else {
            throw ParseError(lineno, "unknown line type '" + toks[0] + "'");
        }
    }
    if (!have_header) throw ParseError(lineno, "missing 'p ktsp' header");
    if (declared_bodies != static_cast<long>(inst.bodies.size()))
        throw ParseError(lineno, "header declares " + std::to_string(declared_bodies) +
                                     " bodies, file has " + std::to_string(inst.bodies.size()));
    inst.start_index = -1;
    for (size_t i = 0; i < inst.bodies.size(); ++i) {
        if (inst.bodies[i].id == start_id) inst.start_index = static_cast<int>(i);
    }
    if (inst.start_index < 0)
        throw ParseError(lineno, "start body id '" + start_id + "' not found among 'b' lines");
    try {
        validate_instance(inst);
    } catch (const std::invalid_argument& e) {
        throw ParseError(lineno, e.what());
    }
    return inst;
}

inline std::string serialize_instance(const Instance& inst, const std::string& comment = "") {
    validate_instance(inst);
    std::ostringstream out;
    if (!comment.empty()) out << "c " << comment << "\n";
    out << "p ktsp " << inst.bodies.size() << " " << fmt17(inst.t0) << " " << fmt17(inst.t_max)
        << " " << fmt17(inst.mu) << " " << inst.bodies[inst.start_index].id << "\n";
    for (const auto& b : inst.bodies) {
        out << "b " << b.id << " " << fmt17(b.state.position.x) << " " << fmt17(b.state.position.y)
            << " " << fmt17(b.state.position.z) << " " << fmt17(b.state.velocity.x) << " "
            << fmt17(b.state.velocity.y) << " " << fmt17(b.state.velocity.z) << "\n";
    }
    return out.str();
}

}  // namespace ktsp
