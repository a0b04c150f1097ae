#pragma once

// Solver backends behind one interface: the internal exact backend (network
// DP when the model is a recognized time-indexed encoding, implicit
// enumeration otherwise) and an adapter that shells out to an external MIP
// solver through LP files.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>

#include "ktsp/bnb.hpp"
#include "ktsp/dp.hpp"

namespace ktsp {

enum class SolveStatus { optimal, feasible_with_gap, infeasible, limit_reached, error };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::feasible_with_gap: return "feasible-with-gap";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::limit_reached: return "limit-reached";
        case SolveStatus::error: return "error";
    }
    return "?";
}

struct SolveOutcome {
    SolveStatus status = SolveStatus::error;
    double objective = std::numeric_limits<double>::infinity();
    double lower_bound = -std::numeric_limits<double>::infinity();
    std::vector<int8_t> assignment;  // empty unless a solution was produced
    double wall_time_s = 0.0;
    std::string message;
};

struct SolveLimits {
    double time_limit_s = 4.0 * 3600.0;
    uint64_t node_limit = 200'000'000;
};

struct BackendConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackendProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual SolveOutcome solve(const IlpModel& model, const SolveLimits& limits = {}) = 0;
    virtual std::string name() const = 0;
};

namespace detail {

struct RecognizedGrid {
    TimeExpandedNetwork net;
    std::unordered_map<std::string, int> var_index;
};

// A model is a recognized time-indexed encoding when rebuilding the model
// from the arcs named by its variables reproduces it exactly.
inline std::optional<RecognizedGrid> recognize_time_indexed(const IlpModel& m) {
    if (m.n_vars() == 0) return std::nullopt;
    int n = 0, T = 0, start = -1;
    std::vector<TransferArc> transfers;
    for (int v = 0; v < m.n_vars(); ++v) {
        int fb, ft, tb, tt;
        char tail;
        if (std::sscanf(m.var_names[v].c_str(), "x_%d_%d_%d_%d%c", &fb, &ft, &tb, &tt, &tail) != 4)
            return std::nullopt;
        if (fb < 0 || ft < 0 || tb < 0 || tt < 0) return std::nullopt;
        n = std::max({n, fb + 1, tb + 1});
        T = std::max({T, ft + 1, tt + 1});
        if (fb == tb) {
            if (tt != ft + 1 || m.costs[v] != 0.0) return std::nullopt;
        } else {
            if (tt <= ft) return std::nullopt;
            transfers.push_back({{fb, ft}, {tb, tt}, m.costs[v]});
        }
    }
    if (T < 2) return std::nullopt;
    for (const auto& c : m.constraints) {
        if (c.name == "vehicle") {
            if (c.terms.empty()) return std::nullopt;
            int fb, ft, tb, tt;
            if (std::sscanf(m.var_names[c.terms[0].var].c_str(), "x_%d_%d_%d_%d", &fb, &ft, &tb,
                            &tt) != 4)
                return std::nullopt;
            start = fb;
        }
    }
    if (start < 0) return std::nullopt;

    RecognizedGrid rec;
    rec.net.n_bodies = n;
    rec.net.grid = build_grid(0.0, static_cast<double>(T - 1), T);
    rec.net.start_index = start;
    rec.net.arcs = std::move(transfers);
    std::sort(rec.net.arcs.begin(), rec.net.arcs.end(), arc_order_less);
    try {
        validate_network(rec.net);
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }

    const IlpModel rebuilt = build_time_indexed(rec.net);
    if (rebuilt.var_names != m.var_names || rebuilt.costs != m.costs) return std::nullopt;
    if (rebuilt.constraints.size() != m.constraints.size()) return std::nullopt;
    for (size_t i = 0; i < m.constraints.size(); ++i) {
        const auto& a = rebuilt.constraints[i];
        const auto& b = m.constraints[i];
        if (a.name != b.name || a.sense != b.sense || a.rhs != b.rhs ||
            a.terms.size() != b.terms.size())
            return std::nullopt;
        for (size_t k = 0; k < a.terms.size(); ++k) {
            if (a.terms[k].var != b.terms[k].var || a.terms[k].coef != b.terms[k].coef)
                return std::nullopt;
        }
    }
    for (int v = 0; v < m.n_vars(); ++v) rec.var_index[m.var_names[v]] = v;
    return rec;
}

inline void set_trajectory_vars(const Trajectory& traj,
                                const std::unordered_map<std::string, int>& var_index,
                                std::vector<int8_t>& x) {
    const auto set_var = [&](const Node& a, const Node& b) {
        const auto it = var_index.find(grid_var_name(a, b));
        if (it == var_index.end())
            throw std::invalid_argument("trajectory arc " + grid_var_name(a, b) +
                                        " has no model variable");
        x[it->second] = 1;
    };
    for (size_t i = 0; i + 1 < traj.pi.size(); ++i) {
        const int b0 = traj.pi[i], b1 = traj.pi[i + 1];
        const int t0 = traj.sigma[i], t1 = traj.sigma[i + 1];
        if (b0 == b1) {
            for (int t = t0; t < t1; ++t) set_var({b0, t}, {b0, t + 1});
        } else {
            set_var({b0, t0}, {b1, t1});
        }
    }
}

}  // namespace detail

// Encodes a feasible tour as a full 0/1 assignment over the model variables
// (transfers plus every coasting step), verified before being handed out.
inline std::vector<int8_t> warm_start(const IlpModel& model, const Trajectory& traj) {
    std::unordered_map<std::string, int> var_index;
    for (int v = 0; v < model.n_vars(); ++v) var_index[model.var_names[v]] = v;
    std::vector<int8_t> x(model.n_vars(), 0);
    detail::set_trajectory_vars(traj, var_index, x);
    const std::string bad = first_violated_constraint(model, x);
    if (!bad.empty())
        throw std::logic_error("warm_start: encoded trajectory violates constraint '" + bad + "'");
    return x;
}

class InternalBackend : public Backend {
public:
    std::string name() const override { return "dp"; }

    SolveOutcome solve(const IlpModel& model, const SolveLimits& limits = {}) override {
        const auto t_start = std::chrono::steady_clock::now();
        model.validate();
        SolveOutcome out;
        if (auto rec = detail::recognize_time_indexed(model)) {
            const DpResult dp = dp_exact_solve(rec->net, dp_cap);
            if (!dp.feasible) {
                out.status = SolveStatus::infeasible;
            } else {
                out.status = SolveStatus::optimal;
                out.objective = dp.value;
                out.lower_bound = dp.value;
                out.assignment.assign(model.n_vars(), 0);
                detail::set_trajectory_vars(dp.trajectory, rec->var_index, out.assignment);
                const std::string bad = first_violated_constraint(model, out.assignment);
                if (!bad.empty())
                    throw std::logic_error("internal backend: DP solution violates '" + bad + "'");
            }
        } else {
            const BnbResult r = bnb_solve(model, limits.time_limit_s, limits.node_limit);
            switch (r.status) {
                case BnbStatus::optimal:
                    out.status = SolveStatus::optimal;
                    out.objective = r.objective;
                    out.lower_bound = r.objective;
                    out.assignment = r.assignment;
                    break;
                case BnbStatus::infeasible:
                    out.status = SolveStatus::infeasible;
                    break;
                case BnbStatus::limit_reached:
                    out.status = SolveStatus::limit_reached;
                    out.objective = r.objective;
                    out.assignment = r.assignment;
                    break;
            }
            if (!out.assignment.empty()) {
                const std::string bad = first_violated_constraint(model, out.assignment);
                if (!bad.empty())
                    throw std::logic_error("internal backend: solution violates '" + bad + "'");
            }
        }
        out.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return out;
    }

    int dp_cap = 14;
};

// Tries the primary backend first and hands anything it cannot finish
// (limit or error outcomes) to the fallback. Useful for driving the DDD loop
// internally while routing the occasional cut-heavy interval model to an
// external solver.
class FallbackBackend : public Backend {
public:
    FallbackBackend(Backend& primary, Backend& fallback, SolveLimits primary_limits)
        : primary_(primary), fallback_(fallback), primary_limits_(primary_limits) {}

    std::string name() const override { return primary_.name() + "+" + fallback_.name(); }

    SolveOutcome solve(const IlpModel& model, const SolveLimits& limits = {}) override {
        // after a primary failure, retry the primary only on clearly smaller
        // models until it succeeds again
        const bool try_primary = failed_at_ == 0 || model.n_vars() < failed_at_ * 3 / 4;
        if (try_primary) {
            SolveLimits first = primary_limits_;
            first.time_limit_s = std::min(first.time_limit_s, limits.time_limit_s);
            const SolveOutcome out = primary_.solve(model, first);
            if (out.status == SolveStatus::optimal || out.status == SolveStatus::infeasible) {
                failed_at_ = 0;
                return out;
            }
            failed_at_ = model.n_vars();
        }
        return fallback_.solve(model, limits);
    }

private:
    Backend& primary_;
    Backend& fallback_;
    SolveLimits primary_limits_;
    int failed_at_ = 0;
};

struct ExternalSolverConfig {
    // Placeholders: {model} LP file, {solution} output file, {timelimit} seconds.
    // Persistent mode starts the command once and streams one
    // "<model> <solution> <timelimit>" job line per solve to its stdin,
    // expecting a "done" line on stdout after the solution file is written.
    std::string command_template;
    std::string workdir = ".";
    bool persistent = false;
};

namespace detail {

// Long-lived worker process with line-oriented stdin/stdout handshake.
class PersistentSolverProcess {
public:
    explicit PersistentSolverProcess(const std::string& command) {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw BackendConfigError("persistent solver: pipe failed");
        pid_ = fork();
        if (pid_ < 0) throw BackendConfigError("persistent solver: fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], 0);
            dup2(from_child[1], 1);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
    }

    ~PersistentSolverProcess() {
        if (in_fd_ >= 0) close(in_fd_);
        if (out_fd_ >= 0) close(out_fd_);
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    PersistentSolverProcess(const PersistentSolverProcess&) = delete;
    PersistentSolverProcess& operator=(const PersistentSolverProcess&) = delete;

    std::string request(const std::string& job_line) {
        const std::string msg = job_line + "\n";
        size_t off = 0;
        while (off < msg.size()) {
            const ssize_t n = write(in_fd_, msg.data() + off, msg.size() - off);
            if (n <= 0) throw BackendConfigError("persistent solver: worker is gone");
            off += static_cast<size_t>(n);
        }
        std::string reply;
        char ch;
        while (true) {
            const ssize_t n = read(out_fd_, &ch, 1);
            if (n <= 0)
                throw BackendConfigError("persistent solver: worker exited (is the command valid?)");
            if (ch == '\n') break;
            reply.push_back(ch);
        }
        return reply;
    }

private:
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
};

}  // namespace detail

class ExternalBackend : public Backend {
public:
    explicit ExternalBackend(ExternalSolverConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.command_template.empty())
            throw BackendConfigError("external backend: empty command template");
    }

    std::string name() const override { return "external"; }

    SolveOutcome solve(const IlpModel& model, const SolveLimits& limits = {}) override {
        const auto t_start = std::chrono::steady_clock::now();
        model.validate();
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.workdir);
        const int k = ++counter_;
        const fs::path model_path = fs::path(cfg_.workdir) / ("model_" + std::to_string(k) + ".lp");
        const fs::path sol_path = fs::path(cfg_.workdir) / ("solution_" + std::to_string(k) + ".txt");
        {
            std::ofstream f(model_path);
            f << write_lp(model);
        }
        std::error_code ec;
        fs::remove(sol_path, ec);

        if (cfg_.persistent) {
            if (!worker_) worker_ = std::make_unique<detail::PersistentSolverProcess>(
                cfg_.command_template);
            const std::string reply = worker_->request(
                model_path.string() + " " + sol_path.string() + " " + fmt17(limits.time_limit_s));
            if (reply.rfind("error", 0) == 0)
                throw BackendProtocolError("external solver failed: " + reply);
        } else {
            std::string cmd = cfg_.command_template;
            const auto substitute = [&cmd](const std::string& key, const std::string& value) {
                for (size_t pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key)) {
                    cmd.replace(pos, key.size(), value);
                }
            };
            substitute("{model}", model_path.string());
            substitute("{solution}", sol_path.string());
            substitute("{timelimit}", fmt17(limits.time_limit_s));

            const int rc = std::system(cmd.c_str());
            const int exit_code = (rc >= 0 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
            if (exit_code == 127 || exit_code == 126)
                throw BackendConfigError("external solver executable missing or not runnable: " +
                                         cmd);
        }

        SolveOutcome out = parse_solution_file(model, sol_path.string());
        if (out.status == SolveStatus::optimal || out.status == SolveStatus::feasible_with_gap) {
            if (out.assignment.empty())
                throw BackendProtocolError("external solver reported a solution without values");
            const std::string bad = first_violated_constraint(model, out.assignment);
            if (!bad.empty())
                throw BackendProtocolError("external solution violates constraint '" + bad + "'");
            out.objective = assignment_objective(model, out.assignment);
            if (out.status == SolveStatus::optimal) out.lower_bound = out.objective;
        }
        out.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return out;
    }

private:
    // Accepted solution formats: `=status=`, `=obj=`, `=lb=` markers, an
    // `Objective ...` log line, and plain `<name> <value>` rows. Unknown
    // variable names are ignored; model variables absent from the file are 0
    // (external presolve may eliminate them).
    SolveOutcome parse_solution_file(const IlpModel& model, const std::string& path) const {
        std::ifstream f(path);
        if (!f) throw BackendProtocolError("external solver produced no solution file: " + path);
        std::unordered_map<std::string, int> var_index;
        for (int v = 0; v < model.n_vars(); ++v) var_index[model.var_names[v]] = v;

        SolveOutcome out;
        out.assignment.assign(model.n_vars(), 0);
        bool any_assignment = false;
        bool have_status = false, have_obj = false;
        std::string line;
        while (std::getline(f, line)) {
            std::istringstream ss(line);
            std::string key;
            if (!(ss >> key)) continue;
            if (key == "#" || key == "c" || key == "\\") continue;
            if (key == "=status=") {
                std::string st;
                ss >> st;
                have_status = true;
                if (st == "optimal") out.status = SolveStatus::optimal;
                else if (st == "infeasible") out.status = SolveStatus::infeasible;
                else if (st == "feasible" || st == "gap") out.status = SolveStatus::feasible_with_gap;
                else if (st == "limit") out.status = SolveStatus::limit_reached;
                else out.status = SolveStatus::error;
                continue;
            }
            if (key == "=obj=") {
                ss >> out.objective;
                have_obj = true;
                continue;
            }
            if (key == "=lb=") {
                ss >> out.lower_bound;
                continue;
            }
            if (key == "Objective" || key == "objective") {  // MIP log style
                std::string tok;
                while (ss >> tok) {
                    try {
                        out.objective = std::stod(tok);
                        have_obj = true;
                    } catch (const std::exception&) {
                    }
                }
                continue;
            }
            double value;
            if (ss >> value) {
                const auto it = var_index.find(key);
                if (it != var_index.end()) {
                    out.assignment[it->second] = value > 0.5 ? 1 : 0;
                    any_assignment = true;
                }
            }
        }
        if (!have_status && !have_obj && !any_assignment)
            throw BackendProtocolError("external solution file unparsable: " + path);
        if (!have_status) out.status = any_assignment ? SolveStatus::optimal : SolveStatus::error;
        if (out.status == SolveStatus::infeasible || out.status == SolveStatus::error ||
            (out.status == SolveStatus::limit_reached && !any_assignment)) {
            out.assignment.clear();
        }
        return out;
    }

    ExternalSolverConfig cfg_;
    int counter_ = 0;
    std::unique_ptr<detail::PersistentSolverProcess> worker_;
};

}  // namespace ktsp
