#pragma once

// Interval-based dynamic discretization discovery. Outer rounds refine the
// partition on temporal violations; the inner loop adds DFJ cuts for
// discovered subtours. A feasible check result from a cut-laden model is
// certified against the cut-free model before the loop declares optimality,
// because a DFJ cut can in principle exclude the encoding of a revisiting
// walk; certification keeps the returned value exact either way.

#include "ktsp/backend.hpp"
#include "ktsp/flow_bound.hpp"
#include "ktsp/interval.hpp"

namespace ktsp {

enum class DddStatus { optimal, infeasible, limit_reached, backend_error };

struct DddOptions {
    bool precompute_cycles = false;
    std::optional<IntervalPartition> initial_partition;
    int max_rounds = 100000;
    double time_limit_s = 4.0 * 3600.0;
    SolveLimits solve_limits;
};

struct DddReport {
    DddStatus status = DddStatus::backend_error;
    double value = std::numeric_limits<double>::infinity();
    Trajectory trajectory;  // meaningful when status == optimal
    double lower_bound = -std::numeric_limits<double>::infinity();
    int rounds = 0;
    int ilp_calls = 0;
    std::pair<int, int> final_model_size{0, 0};
    std::pair<int, int> max_model_size{0, 0};
    std::vector<double> bound_history;  // first interval bound of every round
    std::string message;
};

inline DddReport ddd_solve(const TimeExpandedNetwork& net, Backend& backend,
                           const DddOptions& options = {}) {
    DddReport rep;
    const auto t_start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    };

    IntervalPartition partition =
        options.initial_partition ? *options.initial_partition : initial_partition(net);
    partition.validate();

    // progress fallback: split the first splittable interval on a cycle
    const auto split_on_cycle = [&](const std::vector<IntervalNode>& cycle)
        -> std::optional<IntervalPartition> {
        for (const auto& node : cycle) {
            const auto [lo, hi] = partition.per_body[node.body][node.interval];
            if (lo < hi) {
                TemporalViolation tv{node.body, node.interval, lo + 1, lo};
                return refine(partition, {tv});
            }
        }
        return std::nullopt;
    };

    while (true) {
        if (rep.rounds >= options.max_rounds || elapsed() > options.time_limit_s) {
            rep.status = DddStatus::limit_reached;
            rep.message = "round or time limit reached";
            return rep;
        }
        ++rep.rounds;

        const TimeIntervalNetwork inet = build_interval_network(net, partition);
        const IlpModel base_model = build_interval_model(inet);
        std::vector<IlpConstraint> cuts;
        std::set<std::set<int>> cut_sets;
        if (options.precompute_cycles) {
            cuts = precompute_cycle_constraints(inet);
            for (const auto& c : cuts) {
                std::set<int> vars;
                for (const auto& t : c.terms) vars.insert(t.var);
                cut_sets.insert(vars);
            }
        }

        // certified round bound: the cut-free interval relaxation, priced by
        // the Lagrangian when cuts would taint the first solve
        std::optional<FlowLagrangianBound> base_bound;
        const auto pure_lower_bound = [&]() -> double {
            if (!base_bound) base_bound.emplace(base_model);
            const std::vector<int8_t> free(base_model.n_vars(), -1);
            return base_bound->bound(free);
        };

        bool bound_recorded = false;
        std::optional<IntervalPartition> next_partition;
        int discovered = 0;

        while (true) {
            IlpModel model = base_model;
            for (const auto& c : cuts) model.constraints.push_back(c);
            rep.max_model_size.first = std::max(rep.max_model_size.first, model.n_vars());
            rep.max_model_size.second =
                std::max(rep.max_model_size.second, static_cast<int>(model.constraints.size()));
            rep.final_model_size = {model.n_vars(), static_cast<int>(model.constraints.size())};

            SolveOutcome out = backend.solve(model, options.solve_limits);
            ++rep.ilp_calls;
            if (out.status == SolveStatus::infeasible && !cuts.empty()) {
                // cuts may over-restrict; only the cut-free model decides
                IlpModel pure = base_model;
                out = backend.solve(pure, options.solve_limits);
                ++rep.ilp_calls;
                if (out.status == SolveStatus::infeasible) {
                    rep.status = DddStatus::infeasible;
                    return rep;
                }
                if (out.status != SolveStatus::optimal) {
                    rep.status = out.status == SolveStatus::limit_reached
                                     ? DddStatus::limit_reached
                                     : DddStatus::backend_error;
                    rep.message = out.message;
                    return rep;
                }
                const auto res = check_interval_solution(out.assignment, inet, net);
                if (!bound_recorded) {
                    rep.lower_bound = std::max(rep.lower_bound, out.objective);
                    rep.bound_history.push_back(rep.lower_bound);
                    bound_recorded = true;
                }
                if (res.kind == IntervalCheckResult::Kind::feasible) {
                    rep.status = DddStatus::optimal;
                    rep.value = res.value;
                    rep.trajectory = res.trajectory;
                    return rep;
                }
                if (res.kind == IntervalCheckResult::Kind::temporal_violation) {
                    next_partition = refine(partition, res.violations);
                    break;
                }
                next_partition = split_on_cycle(res.cycle);
                if (!next_partition) {
                    rep.status = DddStatus::backend_error;
                    rep.message = "stuck subtour over singleton intervals";
                    return rep;
                }
                break;
            }
            if (out.status == SolveStatus::infeasible) {
                rep.status = DddStatus::infeasible;
                return rep;
            }
            if (out.status != SolveStatus::optimal) {
                rep.status = out.status == SolveStatus::limit_reached ? DddStatus::limit_reached
                                                                      : DddStatus::backend_error;
                rep.message = out.message;
                return rep;
            }
            if (!bound_recorded) {
                // first solve of the round; cut-laden objectives are not
                // certified bounds, price the pure model instead
                const double certified = cuts.empty() ? out.objective : pure_lower_bound();
                if (std::isfinite(certified)) rep.lower_bound = std::max(rep.lower_bound, certified);
                rep.bound_history.push_back(rep.lower_bound);
                bound_recorded = true;
            }

            const auto res = check_interval_solution(out.assignment, inet, net);
            if (res.kind == IntervalCheckResult::Kind::subtour) {
                bool added = false;
                std::vector<std::vector<IntervalNode>> found{res.cycle};
                for (const auto& c : res.extra_cycles) found.push_back(c);
                for (const auto& cyc : found) {
                    auto cut = subtour_constraint(inet, cyc,
                                                  "cycle_" + std::to_string(discovered));
                    std::set<int> vars;
                    for (const auto& t : cut.terms) vars.insert(t.var);
                    if (cut_sets.insert(vars).second) {
                        cuts.push_back(std::move(cut));
                        ++discovered;
                        added = true;
                    }
                }
                if (added) continue;
                // cut already present yet the solution still leaves arcs
                // behind; resolve by refining any splittable cycle interval
                next_partition = split_on_cycle(res.cycle);
                if (!next_partition) {
                    rep.status = DddStatus::backend_error;
                    rep.message = "stuck subtour over singleton intervals";
                    return rep;
                }
                break;
            }
            if (res.kind == IntervalCheckResult::Kind::temporal_violation) {
                next_partition = refine(partition, res.violations);
                break;
            }

            // feasible: certify when cuts could have inflated the optimum
            if (cuts.empty()) {
                rep.lower_bound = std::max(rep.lower_bound, out.objective);
                rep.status = DddStatus::optimal;
                rep.value = res.value;
                rep.trajectory = res.trajectory;
                return rep;
            }
            if (pure_lower_bound() >= out.objective - 1e-6) {
                // the cut-free relaxation cannot beat the found tour
                rep.lower_bound = std::max(rep.lower_bound, out.objective - 1e-6);
                rep.status = DddStatus::optimal;
                rep.value = res.value;
                rep.trajectory = res.trajectory;
                return rep;
            }
            SolveOutcome pure_out = backend.solve(base_model, options.solve_limits);
            ++rep.ilp_calls;
            if (pure_out.status != SolveStatus::optimal) {
                rep.status = DddStatus::backend_error;
                rep.message = "certification solve failed";
                return rep;
            }
            if (pure_out.objective >= out.objective - 1e-9) {
                rep.lower_bound = std::max(rep.lower_bound, pure_out.objective);
                rep.status = DddStatus::optimal;
                rep.value = res.value;
                rep.trajectory = res.trajectory;
                return rep;
            }
            rep.lower_bound = std::max(rep.lower_bound, pure_out.objective);
            const auto pure_res = check_interval_solution(pure_out.assignment, inet, net);
            if (pure_res.kind == IntervalCheckResult::Kind::feasible) {
                rep.status = DddStatus::optimal;
                rep.value = pure_res.value;
                rep.trajectory = pure_res.trajectory;
                return rep;
            }
            if (pure_res.kind == IntervalCheckResult::Kind::temporal_violation) {
                next_partition = refine(partition, pure_res.violations);
                break;
            }
            {
                auto cut = subtour_constraint(inet, pure_res.cycle,
                                              "cycle_" + std::to_string(discovered++));
                std::set<int> vars;
                for (const auto& t : cut.terms) vars.insert(t.var);
                if (cut_sets.insert(vars).second) {
                    cuts.push_back(std::move(cut));
                    continue;
                }
                next_partition = split_on_cycle(pure_res.cycle);
                if (!next_partition) {
                    rep.status = DddStatus::backend_error;
                    rep.message = "stuck subtour over singleton intervals";
                    return rep;
                }
                break;
            }
        }

        if (!next_partition) {
            rep.status = DddStatus::backend_error;
            rep.message = "inner loop exited without a refinement";
            return rep;
        }
        partition = *next_partition;
    }
}

}  // namespace ktsp
