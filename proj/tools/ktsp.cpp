// Command-line surface for the KTSP toolkit: build networks from orbital
// instances, reduce them, run heuristics, solve exactly (DP / ILP backends /
// DDD) and batch-benchmark over a manifest.
//
// Exit codes: 0 success, 2 infeasible, 3 limit reached, 4 input error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "ktsp/backend.hpp"
#include "ktsp/ddd.hpp"
#include "ktsp/dp.hpp"
#include "ktsp/heuristics.hpp"
#include "ktsp/reduce.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitLimit = 3;
constexpr int kExitInput = 4;

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

struct BackendChoice {
    std::unique_ptr<ktsp::Backend> internal;
    std::unique_ptr<ktsp::Backend> external;
    std::unique_ptr<ktsp::Backend> hybrid;
    ktsp::Backend* active = nullptr;
};

// --backend dp | external[:persistent] | hybrid; external command template
// comes from --solver-cmd or KTSP_EXTERNAL_SOLVER.
BackendChoice make_backend(const std::string& spec, const std::string& solver_cmd,
                           const std::string& workdir) {
    BackendChoice out;
    out.internal = std::make_unique<ktsp::InternalBackend>();
    if (spec == "dp") {
        out.active = out.internal.get();
        return out;
    }
    std::string cmd = solver_cmd;
    if (cmd.empty()) {
        if (const char* env = std::getenv("KTSP_EXTERNAL_SOLVER")) cmd = env;
    }
    if (cmd.empty()) {
        throw std::runtime_error("backend '" + spec +
                                 "' needs --solver-cmd or KTSP_EXTERNAL_SOLVER");
    }
    ktsp::ExternalSolverConfig cfg;
    cfg.command_template = cmd;
    cfg.workdir = workdir;
    cfg.persistent = spec == "external:persistent" || spec == "hybrid";
    out.external = std::make_unique<ktsp::ExternalBackend>(cfg);
    if (spec == "external" || spec == "external:persistent") {
        out.active = out.external.get();
        return out;
    }
    if (spec == "hybrid") {
        ktsp::SolveLimits budget;
        budget.time_limit_s = 0.5;
        budget.node_limit = 200000;
        out.hybrid = std::make_unique<ktsp::FallbackBackend>(*out.internal, *out.external, budget);
        out.active = out.hybrid.get();
        return out;
    }
    throw std::runtime_error("unknown backend '" + spec + "'");
}

json reduction_report_json(const ktsp::ReductionReport& rep) {
    json removed = json::object();
    for (const auto& [rule, count] : rep.removed_per_rule) removed[rule] = count;
    json first = json::object();
    for (const auto& [rule, count] : rep.first_round_removed) first[rule] = count;
    return json{{"arcs_before", rep.arcs_before},
                {"arcs_after", rep.arcs_after},
                {"rounds", rep.rounds},
                {"removed_per_rule", removed},
                {"first_round_removed", first}};
}

json ddd_report_json(const ktsp::DddReport& rep) {
    const char* status = rep.status == ktsp::DddStatus::optimal        ? "optimal"
                         : rep.status == ktsp::DddStatus::infeasible   ? "infeasible"
                         : rep.status == ktsp::DddStatus::limit_reached ? "limit-reached"
                                                                        : "backend-error";
    return json{{"status", status},
                {"value", rep.value},
                {"lower_bound", rep.lower_bound},
                {"rounds", rep.rounds},
                {"ilp_calls", rep.ilp_calls},
                {"final_model_size", {rep.final_model_size.first, rep.final_model_size.second}},
                {"max_model_size", {rep.max_model_size.first, rep.max_model_size.second}},
                {"bound_history", rep.bound_history},
                {"message", rep.message}};
}

ktsp::Trajectory heuristic_seed_set(const ktsp::TimeExpandedNetwork& net,
                                    const ktsp::HeuristicOptions& opts, uint64_t seed,
                                    std::vector<ktsp::Trajectory>& seeds) {
    const auto t_init = ktsp::init_heuristic(net, opts);
    seeds.push_back(t_init);
    seeds.push_back(ktsp::swan(t_init, net, opts));
    ktsp::HeuristicOptions arbitrary = opts;
    arbitrary.cheapest_insertion = false;
    try {
        seeds.push_back(ktsp::init_heuristic(net, arbitrary));
    } catch (const ktsp::ConstructionFailure&) {
    }
    // sigma-resampled copies of the constructive tour diversify the schedules
    std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
    const int T = net.grid.n_points;
    const int interior = static_cast<int>(t_init.pi.size()) - 2;
    for (int j = 0; j < 12 && interior > 0 && T - 2 >= interior; ++j) {
        ktsp::Trajectory v = t_init;
        std::vector<int> epochs;
        for (int t = 1; t < T - 1; ++t) epochs.push_back(t);
        while (static_cast<int>(epochs.size()) > interior) {
            std::uniform_int_distribution<size_t> d(0, epochs.size() - 1);
            epochs.erase(epochs.begin() + d(rng));
        }
        for (int c = 0; c < interior; ++c) v.sigma[c + 1] = epochs[c];
        if (std::isfinite(ktsp::heuristic_value(net, v, opts))) seeds.push_back(v);
    }
    return t_init;
}

int run_gen(const std::string& instance_path, int n_points, bool double_grid_flag, int max_revs,
            double dv_cap, bool penalty_mode, double penalty_value, int workers,
            const std::string& out_path, const std::string& comment) {
    const ktsp::Instance inst = ktsp::parse_instance(read_file(instance_path));
    ktsp::TimeGrid grid = ktsp::build_grid(inst.t0, inst.t_max, n_points);
    if (double_grid_flag) grid = ktsp::double_grid(grid);
    ktsp::BuildOptions opts;
    if (dv_cap > 0) opts.dv_cap = dv_cap;
    if (penalty_mode) opts.penalty = penalty_value;
    opts.workers = workers;
    const auto oracle = ktsp::make_lambert_oracle(inst, max_revs);
    const auto net = ktsp::build_network(inst, grid, oracle, opts);
    write_file(out_path, ktsp::serialize_network(net, comment));
    std::cout << "network: " << net.n_bodies << " bodies, " << net.grid.n_points
              << " time points, " << net.arcs.size() << " transfer arcs -> " << out_path << "\n";
    return kExitOk;
}

int run_reduce(const std::string& net_path, double ub, int rounds, const std::string& out_path,
               const std::string& report_path) {
    ktsp::TimeExpandedNetwork net = ktsp::parse_network(read_file(net_path));
    const auto rep = ktsp::apply_all(net, ub, rounds);
    write_file(out_path, ktsp::serialize_network(net, "reduced with ub " + ktsp::fmt17(ub)));
    if (!report_path.empty()) write_file(report_path, reduction_report_json(rep).dump(2) + "\n");
    std::cout << "reduced " << rep.arcs_before << " -> " << rep.arcs_after << " arcs in "
              << rep.rounds << " rounds\n";
    return kExitOk;
}

int run_heuristic(const std::string& net_path, const std::string& algo, int width, double shrink,
                  int k_swap, uint64_t seed, long stagnation, long iterations,
                  double time_limit_s, bool penalty_mode, double penalty_value,
                  const std::string& out_path, const std::string& report_path) {
    (void)time_limit_s;
    const auto net = ktsp::parse_network(read_file(net_path));
    ktsp::HeuristicOptions opts;
    if (penalty_mode) opts.penalty = penalty_value;

    ktsp::Trajectory best;
    json report{{"algo", algo}, {"seed", seed}};
    if (algo == "init") {
        best = ktsp::init_heuristic(net, opts);
        report["iterations"] = 0;
        report["incumbent_history"] = json::array();
    } else if (algo == "swan") {
        best = ktsp::swan(ktsp::init_heuristic(net, opts), net, opts);
        report["iterations"] = 0;
        report["incumbent_history"] = json::array();
    } else if (algo == "bswan") {
        std::vector<ktsp::Trajectory> seeds;
        heuristic_seed_set(net, opts, seed, seeds);
        ktsp::BeamConfig cfg;
        cfg.width = std::max(width, net.n_bodies);
        cfg.shrink_factor = shrink;
        cfg.k_swap = k_swap;
        cfg.seed = seed;
        if (iterations > 0) {
            cfg.termination = ktsp::BeamConfig::Termination::max_iterations;
            cfg.termination_param = iterations;
        } else {
            cfg.termination = ktsp::BeamConfig::Termination::stagnation;
            cfg.termination_param = stagnation;
        }
        const auto res = ktsp::b_swan(net, seeds, cfg, opts);
        best = res.best;
        report["iterations"] = res.iterations;
        json hist = json::array();
        for (const auto& [it, v] : res.incumbent_history) hist.push_back({it, v});
        report["incumbent_history"] = hist;
        report["max_queue_size"] = res.max_queue_size;
    } else {
        throw std::runtime_error("unknown --algo '" + algo + "' (init|swan|bswan)");
    }

    const auto check = ktsp::validate(best, net);
    if (!check) throw std::runtime_error("heuristic produced an infeasible tour: " + check.reason);
    const double val = ktsp::value(best, net);
    report["value"] = val;
    write_file(out_path, ktsp::serialize_tour(best, val, algo + " tour"));
    if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
    std::cout << algo << " value " << ktsp::fmt17(val) << " -> " << out_path << "\n";
    return kExitOk;
}

int run_solve(const std::string& net_path, const std::string& backend_spec,
              const std::string& solver_cmd, const std::string& workdir, double time_limit_s,
              const std::string& warm_tour_path, const std::string& export_lp,
              const std::string& out_path, const std::string& report_path) {
    const auto net = ktsp::parse_network(read_file(net_path));
    const auto model = ktsp::build_time_indexed(net);
    if (!export_lp.empty()) write_file(export_lp, ktsp::write_lp(model, "time-indexed model"));

    auto backend = make_backend(backend_spec, solver_cmd, workdir);
    if (!warm_tour_path.empty()) {
        const auto tour = ktsp::parse_tour(read_file(warm_tour_path));
        const auto hint = ktsp::warm_start(model, tour);  // verified encoding
        std::cout << "warm start value " << ktsp::fmt17(ktsp::assignment_objective(model, hint))
                  << " verified\n";
    }
    ktsp::SolveLimits limits;
    limits.time_limit_s = time_limit_s;
    const auto out = backend.active->solve(model, limits);

    json report{{"backend", backend.active->name()},
                {"status", ktsp::to_string(out.status)},
                {"objective", out.objective},
                {"lower_bound", out.lower_bound},
                {"wall_time_s", out.wall_time_s}};
    if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");

    if (out.status == ktsp::SolveStatus::infeasible) {
        std::cout << "infeasible\n";
        return kExitInfeasible;
    }
    if (out.status == ktsp::SolveStatus::limit_reached) {
        std::cout << "limit reached, best bound " << out.lower_bound << "\n";
        return kExitLimit;
    }
    if (out.status != ktsp::SolveStatus::optimal) {
        std::cout << "solver error: " << out.message << "\n";
        return kExitInput;
    }
    const auto traj = ktsp::extract_trajectory(model, out.assignment, net);
    const double val = ktsp::value(traj, net);
    write_file(out_path, ktsp::serialize_tour(traj, val, "optimal tour"));
    std::cout << "optimal " << ktsp::fmt17(val) << " -> " << out_path << "\n";
    return kExitOk;
}

int run_ddd(const std::string& net_path, const std::string& backend_spec,
            const std::string& solver_cmd, const std::string& workdir, bool precompute,
            double time_limit_s, const std::string& out_path, const std::string& report_path) {
    const auto net = ktsp::parse_network(read_file(net_path));
    auto backend = make_backend(backend_spec, solver_cmd, workdir);
    ktsp::DddOptions opts;
    opts.precompute_cycles = precompute;
    opts.time_limit_s = time_limit_s;
    const auto rep = ktsp::ddd_solve(net, *backend.active, opts);
    if (!report_path.empty()) write_file(report_path, ddd_report_json(rep).dump(2) + "\n");
    if (rep.status == ktsp::DddStatus::infeasible) {
        std::cout << "infeasible\n";
        return kExitInfeasible;
    }
    if (rep.status == ktsp::DddStatus::limit_reached) {
        std::cout << "limit reached, lower bound " << rep.lower_bound << "\n";
        return kExitLimit;
    }
    if (rep.status != ktsp::DddStatus::optimal) {
        std::cout << "backend error: " << rep.message << "\n";
        return kExitInput;
    }
    write_file(out_path, ktsp::serialize_tour(rep.trajectory, rep.value, "ddd optimal tour"));
    std::cout << "optimal " << ktsp::fmt17(rep.value) << " in " << rep.rounds << " rounds, "
              << rep.ilp_calls << " ilp calls -> " << out_path << "\n";
    return kExitOk;
}

int run_model(const std::string& net_path, bool interval, const std::string& out_path) {
    const auto net = ktsp::parse_network(read_file(net_path));
    if (interval) {
        const auto inet = ktsp::build_interval_network(net, ktsp::initial_partition(net));
        write_file(out_path, ktsp::write_lp(ktsp::build_interval_model(inet), "interval model"));
    } else {
        write_file(out_path, ktsp::write_lp(ktsp::build_time_indexed(net), "time-indexed model"));
    }
    std::cout << "model -> " << out_path << "\n";
    return kExitOk;
}

int run_check(const std::string& net_path, const std::string& tour_path) {
    const auto net = ktsp::parse_network(read_file(net_path));
    auto tour = ktsp::parse_tour(read_file(tour_path));
    auto res = ktsp::validate(tour, net);
    if (!res) {
        tour.allow_revisits = true;
        res = ktsp::validate(tour, net);
        if (res) std::cout << "feasible (with revisits), ";
    } else {
        std::cout << "feasible, ";
    }
    if (!res) {
        std::cout << "infeasible: " << res.reason << "\n";
        return kExitInfeasible;
    }
    std::cout << "value " << ktsp::fmt17(ktsp::value(tour, net)) << "\n";
    return kExitOk;
}

struct BenchRow {
    std::string instance;
    int n_bodies = 0;
    int n_points = 0;
    std::string method;
    double lower_bound = std::numeric_limits<double>::quiet_NaN();
    double upper_bound = std::numeric_limits<double>::quiet_NaN();
    double gap_percent = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
    size_t arcs_removed = 0;
    json incumbents = json::array();
};

BenchRow bench_one(const std::string& id, const ktsp::TimeExpandedNetwork& net,
                   const std::string& method, double time_limit_s, uint64_t seed,
                   const std::string& solver_cmd, const std::string& workdir) {
    BenchRow row;
    row.instance = id;
    row.n_bodies = net.n_bodies;
    row.n_points = net.grid.n_points;
    row.method = method;
    const auto t0 = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    if (method == "dp") {
        const auto dp = ktsp::dp_exact_solve(net);
        if (dp.feasible) {
            row.lower_bound = dp.value;
            row.upper_bound = dp.value;
        }
    } else if (method == "bswan") {
        ktsp::HeuristicOptions opts;
        std::vector<ktsp::Trajectory> seeds;
        heuristic_seed_set(net, opts, seed, seeds);
        ktsp::BeamConfig cfg;
        cfg.width = std::max(1000, net.n_bodies);
        cfg.seed = seed;
        const auto res = ktsp::b_swan(net, seeds, cfg, opts);
        row.upper_bound = res.value;
        for (const auto& [it, v] : res.incumbent_history) row.incumbents.push_back({it, v});
    } else if (method == "pp+dp") {
        ktsp::HeuristicOptions opts;
        std::vector<ktsp::Trajectory> seeds;
        heuristic_seed_set(net, opts, seed, seeds);
        ktsp::BeamConfig cfg;
        cfg.width = std::max(1000, net.n_bodies);
        cfg.seed = seed;
        const double ub = ktsp::b_swan(net, seeds, cfg, opts).value;
        ktsp::TimeExpandedNetwork reduced = net;
        const auto rep = ktsp::apply_all(reduced, ub);
        row.arcs_removed = rep.arcs_before - rep.arcs_after;
        const auto dp = ktsp::dp_exact_solve(reduced);
        if (dp.feasible) {
            row.lower_bound = dp.value;
            row.upper_bound = dp.value;
        }
    } else if (method == "ddd" || method == "ddd-pc") {
        auto backend = make_backend(solver_cmd.empty() ? "dp" : "hybrid", solver_cmd, workdir);
        ktsp::DddOptions opts;
        opts.precompute_cycles = method == "ddd-pc";
        opts.time_limit_s = time_limit_s;
        const auto rep = ktsp::ddd_solve(net, *backend.active, opts);
        row.lower_bound = rep.lower_bound;
        if (rep.status == ktsp::DddStatus::optimal) {
            row.upper_bound = rep.value;
            row.lower_bound = rep.value;
        }
        for (const double b : rep.bound_history) row.incumbents.push_back(b);
    } else {
        throw std::runtime_error("unknown bench method '" + method + "'");
    }
    row.wall_time_s = elapsed();
    if (std::isfinite(row.lower_bound) && std::isfinite(row.upper_bound) && row.upper_bound != 0) {
        row.gap_percent = 100.0 * (row.upper_bound - row.lower_bound) / row.upper_bound;
    }
    return row;
}

int run_bench(const std::string& manifest_path, const std::string& methods_csv, int workers,
              double time_limit_s, uint64_t seed, const std::string& out_dir,
              const std::string& solver_cmd, const std::string& workdir) {
    std::vector<std::pair<std::string, std::string>> entries;  // id, path
    {
        std::istringstream in(read_file(manifest_path));
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto toks = ktsp::detail::split_ws(line);
            if (toks.empty() || toks[0] == "c" || toks[0][0] == '#') continue;
            if (toks.size() == 1) {
                entries.push_back({fs::path(toks[0]).stem().string(), toks[0]});
            } else if (toks.size() == 2) {
                entries.push_back({toks[0], toks[1]});
            } else {
                throw ktsp::ParseError(lineno, "manifest line: expected [<id>] <network-path>");
            }
        }
    }
    std::vector<std::string> methods;
    {
        std::stringstream ss(methods_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) methods.push_back(tok);
        }
    }

    struct Task {
        std::string id, path, method;
    };
    std::vector<Task> tasks;
    for (const auto& [id, path] : entries) {
        for (const auto& m : methods) tasks.push_back({id, path, m});
    }
    std::vector<BenchRow> rows(tasks.size());
    std::atomic<size_t> next{0};
    const auto worker_fn = [&] {
        for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
            const auto& t = tasks[i];
            try {
                const auto net = ktsp::parse_network(read_file(t.path));
                rows[i] = bench_one(t.id, net, t.method, time_limit_s, seed, solver_cmd, workdir);
            } catch (const std::exception& e) {
                rows[i].instance = t.id;
                rows[i].method = t.method + " [failed: " + e.what() + "]";
            }
        }
    };
    const int n_workers = std::max(1, workers);
    if (n_workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker_fn);
        for (auto& th : pool) th.join();
    }

    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "instance,n_bodies,n_points,method,lower_bound,upper_bound,gap_percent,wall_time_s,"
           "arcs_removed\n";
    for (const auto& row : rows) {
        csv << row.instance << "," << row.n_bodies << "," << row.n_points << "," << row.method
            << "," << (std::isfinite(row.lower_bound) ? ktsp::fmt17(row.lower_bound) : "") << ","
            << (std::isfinite(row.upper_bound) ? ktsp::fmt17(row.upper_bound) : "") << ","
            << (std::isfinite(row.gap_percent) ? ktsp::fmt17(row.gap_percent) : "") << ","
            << row.wall_time_s << "," << row.arcs_removed << "\n";
        if (!row.incumbents.empty()) {
            const json dump{{"instance", row.instance},
                            {"method", row.method},
                            {"history", row.incumbents}};
            write_file((fs::path(out_dir) / (row.instance + "_" + row.method + ".json")).string(),
                       dump.dump(2) + "\n");
        }
    }
    write_file((fs::path(out_dir) / "bench.csv").string(), csv.str());
    std::cout << rows.size() << " rows -> " << (fs::path(out_dir) / "bench.csv").string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Keplerian TSP solver toolkit"};
    app.require_subcommand(1);

    std::string instance_path, net_path, tour_path, out_path = "out.ktsp", report_path;
    std::string backend_spec = "dp", solver_cmd, solve_workdir = "ktsp_solver_work";
    std::string algo = "bswan", methods = "dp", manifest_path, out_dir = "bench_out";
    std::string export_lp, warm_tour, comment;
    int n_points = 11, max_revs = -1, workers = 1, rounds = 10, width = 1000, k_swap = 3;
    double dv_cap = 0.0, penalty_value = ktsp::kDefaultPenaltyDv, ub = 0.0, shrink = 0.1;
    double time_limit_s = 4.0 * 3600.0;
    bool double_grid_flag = false, penalty_mode = false, precompute = false, interval = false;
    long stagnation = 0, iterations = 0;
    uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen", "build a time-expanded network from an instance");
    gen->add_option("--instance", instance_path)->required();
    gen->add_option("--points", n_points, "number of grid points");
    gen->add_flag("--double", double_grid_flag, "refine to 2(|T|-1)+1 points");
    gen->add_option("--max-revs", max_revs, "Lambert revolution cap (-1: auto)");
    gen->add_option("--dv-cap", dv_cap, "omit arcs above this delta-v");
    gen->add_flag("--penalty-mode", penalty_mode, "keep infeasible arcs at the penalty weight");
    gen->add_option("--penalty", penalty_value, "penalty weight for --penalty-mode");
    gen->add_option("--workers", workers);
    gen->add_option("-o,--out", out_path)->required();
    gen->add_option("--comment", comment);

    auto* red = app.add_subcommand("reduce", "apply the four reduction rules");
    red->add_option("--net", net_path)->required();
    red->add_option("--ub", ub, "upper bound licensing deletions")->required();
    red->add_option("--rounds", rounds);
    red->add_option("-o,--out", out_path)->required();
    red->add_option("--report", report_path);

    auto* heu = app.add_subcommand("heuristic", "constructive / improving heuristics");
    heu->add_option("--net", net_path)->required();
    heu->add_option("--algo", algo, "init|swan|bswan");
    heu->add_option("--width", width);
    heu->add_option("--shrink", shrink);
    heu->add_option("--k", k_swap);
    heu->add_option("--seed", seed);
    heu->add_option("--stagnation", stagnation);
    heu->add_option("--iterations", iterations);
    heu->add_option("--time-limit", time_limit_s);
    heu->add_flag("--penalty-mode", penalty_mode);
    heu->add_option("--penalty", penalty_value);
    heu->add_option("-o,--out", out_path)->required();
    heu->add_option("--report", report_path);

    auto* sol = app.add_subcommand("solve", "solve the time-indexed model exactly");
    sol->add_option("--net", net_path)->required();
    sol->add_option("--backend", backend_spec, "dp|external[:persistent]|hybrid");
    sol->add_option("--solver-cmd", solver_cmd, "external command template");
    sol->add_option("--solver-workdir", solve_workdir);
    sol->add_option("--time-limit", time_limit_s);
    sol->add_option("--warm-start", warm_tour, "tour file used as a verified start hint");
    sol->add_option("--export-lp", export_lp);
    sol->add_option("-o,--out", out_path)->required();
    sol->add_option("--report", report_path);

    auto* ddd = app.add_subcommand("ddd", "interval-based dynamic discretization discovery");
    ddd->add_option("--net", net_path)->required();
    ddd->add_option("--backend", backend_spec, "dp|external[:persistent]|hybrid");
    ddd->add_option("--solver-cmd", solver_cmd);
    ddd->add_option("--solver-workdir", solve_workdir);
    ddd->add_flag("--precompute-cycles", precompute);
    ddd->add_option("--time-limit", time_limit_s);
    ddd->add_option("-o,--out", out_path)->required();
    ddd->add_option("--report", report_path);

    auto* mod = app.add_subcommand("model", "export the ILP in LP format");
    mod->add_option("--net", net_path)->required();
    mod->add_flag("--interval", interval, "interval model over the initial partition");
    mod->add_option("-o,--out", out_path)->required();

    auto* chk = app.add_subcommand("check", "validate a tour file against a network");
    chk->add_option("--net", net_path)->required();
    chk->add_option("--tour", tour_path)->required();

    auto* ben = app.add_subcommand("bench", "run methods over a manifest of networks");
    ben->add_option("--manifest", manifest_path)->required();
    ben->add_option("--methods", methods, "comma list: dp,bswan,pp+dp,ddd,ddd-pc");
    ben->add_option("--workers", workers);
    ben->add_option("--time-limit", time_limit_s);
    ben->add_option("--seed", seed);
    ben->add_option("--solver-cmd", solver_cmd);
    ben->add_option("--solver-workdir", solve_workdir);
    ben->add_option("--out-dir", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return run_gen(instance_path, n_points, double_grid_flag, max_revs, dv_cap,
                           penalty_mode, penalty_value, workers, out_path, comment);
        if (red->parsed()) return run_reduce(net_path, ub, rounds, out_path, report_path);
        if (heu->parsed())
            return run_heuristic(net_path, algo, width, shrink, k_swap, seed, stagnation,
                                 iterations, time_limit_s, penalty_mode, penalty_value, out_path,
                                 report_path);
        if (sol->parsed())
            return run_solve(net_path, backend_spec, solver_cmd, solve_workdir, time_limit_s,
                             warm_tour, export_lp, out_path, report_path);
        if (ddd->parsed())
            return run_ddd(net_path, backend_spec, solver_cmd, solve_workdir, precompute,
                           time_limit_s, out_path, report_path);
        if (mod->parsed()) return run_model(net_path, interval, out_path);
        if (chk->parsed()) return run_check(net_path, tour_path);
        if (ben->parsed())
            return run_bench(manifest_path, methods, workers, time_limit_s, seed, out_dir,
                             solver_cmd, solve_workdir);
    } catch (const ktsp::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
