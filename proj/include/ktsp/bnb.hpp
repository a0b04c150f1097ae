#pragma once

// Exact implicit enumeration for the small binary models this toolkit
// produces (flow equalities, unit-coefficient covering rows, cycle cuts).
//
// Presolve eliminates zero-cost variables through equality rows (the
// coasting chains of grid and interval models), leaving a search over
// positive-cost transfer variables with prefix-style range rows. The search
// is depth-first branch and bound with bound-consistency propagation and a
// row-reduction lower bound over disjoint covering families.

#include <chrono>
#include <memory>
#include <cstdint>
#include <unordered_map>

#include "ktsp/flow_bound.hpp"
#include "ktsp/ilp_model.hpp"

namespace ktsp {

enum class BnbStatus { optimal, infeasible, limit_reached };

struct BnbResult {
    BnbStatus status = BnbStatus::infeasible;
    double objective = std::numeric_limits<double>::infinity();
    std::vector<int8_t> assignment;
    uint64_t nodes = 0;
};

class BnbSolver {
public:
    explicit BnbSolver(const IlpModel& model) : m_(model) {
        for (const auto& c : m_.constraints) {
            Row r;
            r.sense = c.sense;
            r.rhs = c.rhs;
            for (const auto& t : c.terms) {
                if (t.coef != 0.0) r.terms.push_back({t.var, t.coef});
            }
            rows_.push_back(std::move(r));
        }
        eliminated_.assign(m_.n_vars(), 0);
        presolve();
        build_indexes();
        flow_bound_ = std::make_unique<FlowLagrangianBound>(m_);
    }

    BnbResult solve(double time_limit_s = 3600.0, uint64_t node_limit = 200'000'000) {
        deadline_ = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(time_limit_s));
        node_limit_ = node_limit;
        val_.assign(m_.n_vars(), -1);
        fixed_cost_ = 0.0;
        nodes_ = 0;
        hit_limit_ = false;
        best_obj_ = std::numeric_limits<double>::infinity();
        best_.clear();

        std::vector<int> root_trail;
        bool root_ok = true;
        for (size_t ri = 0; ri < rows_.size() && root_ok; ++ri)
            root_ok = check_row(static_cast<int>(ri));
        if (root_ok) {
            std::vector<int> dirty(rows_.size());
            for (size_t i = 0; i < dirty.size(); ++i) dirty[i] = static_cast<int>(i);
            root_ok = propagate(dirty, root_trail);
        }
        if (root_ok) {
            offer_incumbent(flow_bound_->trained_incumbent());
            if (node_bound() < best_obj_ - kEps) dive();
        }

        BnbResult res;
        res.nodes = nodes_;
        if (hit_limit_) {
            res.status = BnbStatus::limit_reached;
            res.objective = best_obj_;
            res.assignment = best_;
            return res;
        }
        if (best_.empty()) {
            res.status = BnbStatus::infeasible;
            return res;
        }
        res.status = BnbStatus::optimal;
        res.objective = best_obj_;
        res.assignment = best_;
        return res;
    }

private:
    struct Term {
        int var;
        double coef;
    };
    struct Row {
        std::vector<Term> terms;
        Sense sense = Sense::le;
        double rhs = 0.0;
        double min_lhs = 0.0, max_lhs = 0.0;
    };
    struct Substitution {
        int var;
        double constant;
        std::vector<Term> terms;  // var = constant + sum(terms)
    };
    struct Occ {
        int row;
        double coef;
    };

    static constexpr double kEps = 1e-9;

    const IlpModel& m_;
    std::vector<Row> rows_;
    std::vector<Substitution> subs_;
    std::vector<char> eliminated_;
    std::vector<std::vector<Occ>> occ_;
    std::vector<int> cover_rows_;                 // all covering rows (for branching)
    std::vector<std::vector<int>> cover_groups_;  // disjoint-support groups (for bounds)
    std::vector<int8_t> val_;
    double fixed_cost_ = 0.0;
    uint64_t nodes_ = 0, node_limit_ = 0;
    bool hit_limit_ = false;
    std::chrono::steady_clock::time_point deadline_;
    double best_obj_ = std::numeric_limits<double>::infinity();
    std::vector<int8_t> best_;
    std::unique_ptr<FlowLagrangianBound> flow_bound_;
#ifdef KTSP_BNB_DEBUG
public:
    uint64_t dbg_leaves = 0, dbg_rejected = 0;
private:
#endif

    static void merge_term(std::vector<Term>& terms, int var, double coef) {
        for (auto& t : terms) {
            if (t.var == var) {
                t.coef += coef;
                return;
            }
        }
        terms.push_back({var, coef});
    }

    static void drop_zero_terms(std::vector<Term>& terms) {
        terms.erase(std::remove_if(terms.begin(), terms.end(),
                                   [](const Term& t) { return std::abs(t.coef) < 1e-12; }),
                    terms.end());
    }

    // Substitute zero-cost variables out of the row system through equality
    // rows where they carry a unit coefficient. Each elimination swaps the
    // equality for a 0 <= expr <= 1 range pair, keeping the variable's
    // binary domain.
    void presolve() {
        while (true) {
            int pick_var = -1, pick_row = -1;
            size_t pick_len = std::numeric_limits<size_t>::max();
            for (size_t ri = 0; ri < rows_.size(); ++ri) {
                const Row& r = rows_[ri];
                if (r.sense != Sense::eq) continue;
                for (const auto& t : r.terms) {
                    if (m_.costs[t.var] != 0.0 || eliminated_[t.var]) continue;
                    if (std::abs(std::abs(t.coef) - 1.0) > 1e-12) continue;
                    if (r.terms.size() < pick_len ||
                        (r.terms.size() == pick_len && t.var < pick_var)) {
                        pick_var = t.var;
                        pick_row = static_cast<int>(ri);
                        pick_len = r.terms.size();
                    }
                }
            }
            if (pick_var < 0) break;

            const Row eq = rows_[pick_row];
            double coef_v = 0.0;
            for (const auto& t : eq.terms) {
                if (t.var == pick_var) coef_v = t.coef;
            }
            Substitution sub;
            sub.var = pick_var;
            sub.constant = eq.rhs / coef_v;
            for (const auto& t : eq.terms) {
                if (t.var != pick_var) sub.terms.push_back({t.var, -t.coef / coef_v});
            }
            eliminated_[pick_var] = 1;
            rows_.erase(rows_.begin() + pick_row);

            for (auto& r : rows_) {
                double cv = 0.0;
                for (const auto& t : r.terms) {
                    if (t.var == pick_var) cv = t.coef;
                }
                if (cv == 0.0) continue;
                r.terms.erase(std::remove_if(r.terms.begin(), r.terms.end(),
                                             [&](const Term& t) { return t.var == pick_var; }),
                              r.terms.end());
                r.rhs -= cv * sub.constant;
                for (const auto& t : sub.terms) merge_term(r.terms, t.var, cv * t.coef);
                drop_zero_terms(r.terms);
            }
            {
                Row lo;  // constant + expr >= 0
                lo.sense = Sense::ge;
                lo.rhs = -sub.constant;
                lo.terms = sub.terms;
                drop_zero_terms(lo.terms);
                Row hi;  // constant + expr <= 1
                hi.sense = Sense::le;
                hi.rhs = 1.0 - sub.constant;
                hi.terms = sub.terms;
                drop_zero_terms(hi.terms);
                if (!lo.terms.empty() || lo.rhs > kEps) rows_.push_back(std::move(lo));
                if (!hi.terms.empty() || hi.rhs < -kEps) rows_.push_back(std::move(hi));
            }
            subs_.push_back(std::move(sub));
        }
    }

    void build_indexes() {
        const int nv = m_.n_vars();
        occ_.assign(nv, {});
        for (size_t ri = 0; ri < rows_.size(); ++ri) {
            Row& r = rows_[ri];
            double lo = 0.0, hi = 0.0;
            for (const auto& t : r.terms) {
                occ_[t.var].push_back({static_cast<int>(ri), t.coef});
                lo += std::min(0.0, t.coef);
                hi += std::max(0.0, t.coef);
            }
            r.min_lhs = lo;
            r.max_lhs = hi;
        }
        std::vector<int> covers;
        for (size_t ri = 0; ri < rows_.size(); ++ri) {
            const Row& r = rows_[ri];
            if (r.sense != Sense::ge || r.rhs != 1.0 || r.terms.empty()) continue;
            bool unit = true;
            for (const auto& t : r.terms) unit = unit && t.coef == 1.0;
            if (unit) covers.push_back(static_cast<int>(ri));
        }
        std::vector<char> grouped(covers.size(), 0);
        while (true) {
            std::vector<int> group;
            std::vector<char> var_used(nv, 0);
            for (size_t k = 0; k < covers.size(); ++k) {
                if (grouped[k]) continue;
                const Row& r = rows_[covers[k]];
                bool disjoint = true;
                for (const auto& t : r.terms) disjoint = disjoint && !var_used[t.var];
                if (!disjoint) continue;
                for (const auto& t : r.terms) var_used[t.var] = 1;
                group.push_back(covers[k]);
                grouped[k] = 1;
            }
            if (group.empty()) break;
            cover_groups_.push_back(std::move(group));
        }
        for (const auto& g : cover_groups_)
            cover_rows_.insert(cover_rows_.end(), g.begin(), g.end());
    }

    bool check_row(int ri) const {
        const Row& r = rows_[ri];
        if (r.sense != Sense::ge && r.min_lhs > r.rhs + kEps) return false;
        if (r.sense != Sense::le && r.max_lhs < r.rhs - kEps) return false;
        return true;
    }

    void apply(int v, int8_t x, std::vector<int>& trail, std::vector<int>& dirty) {
        val_[v] = x;
        if (x) fixed_cost_ += m_.costs[v];
        trail.push_back(v);
        for (const auto& o : occ_[v]) {
            rows_[o.row].min_lhs += o.coef * x - std::min(0.0, o.coef);
            rows_[o.row].max_lhs += o.coef * x - std::max(0.0, o.coef);
            dirty.push_back(o.row);
        }
    }

    void undo(std::vector<int>& trail, size_t mark) {
        while (trail.size() > mark) {
            const int v = trail.back();
            trail.pop_back();
            const int8_t x = val_[v];
            if (x) fixed_cost_ -= m_.costs[v];
            for (const auto& o : occ_[v]) {
                rows_[o.row].min_lhs -= o.coef * x - std::min(0.0, o.coef);
                rows_[o.row].max_lhs -= o.coef * x - std::max(0.0, o.coef);
            }
            val_[v] = -1;
        }
    }

    // bound-consistency fixpoint over the touched rows
    bool propagate(std::vector<int>& dirty, std::vector<int>& trail) {
        while (!dirty.empty()) {
            const int ri = dirty.back();
            dirty.pop_back();
            if (!check_row(ri)) return false;
            const Row& r = rows_[ri];
            for (const auto& t : r.terms) {
                if (val_[t.var] != -1) continue;
                const double lo1 = r.min_lhs - std::min(0.0, t.coef) + t.coef;
                const double hi1 = r.max_lhs - std::max(0.0, t.coef) + t.coef;
                const double lo0 = r.min_lhs - std::min(0.0, t.coef);
                const double hi0 = r.max_lhs - std::max(0.0, t.coef);
                bool can1 = true, can0 = true;
                if (r.sense != Sense::ge && lo1 > r.rhs + kEps) can1 = false;
                if (r.sense != Sense::le && hi1 < r.rhs - kEps) can1 = false;
                if (r.sense != Sense::ge && lo0 > r.rhs + kEps) can0 = false;
                if (r.sense != Sense::le && hi0 < r.rhs - kEps) can0 = false;
                if (!can0 && !can1) return false;
                if (!can0 || !can1) apply(t.var, can1 ? 1 : 0, trail, dirty);
            }
        }
        return true;
    }

    // Row-reduction bound over two disjoint covering families: unsatisfied
    // rows of the first family pay their cheapest open variable, those of
    // the second pay the cheapest open variable net of the first family's
    // row minimum. A variable can serve one row of each family but never two
    // rows of the same family, so the parts add.
    double reduction_bound(const std::vector<int>& primary,
                           const std::vector<int>& secondary) const {
        double extra = 0.0;
        std::unordered_map<int, double> var_reduction;
        for (const int ri : primary) {
            const Row& r = rows_[ri];
            bool satisfied = false;
            double cheapest = std::numeric_limits<double>::infinity();
            for (const auto& t : r.terms) {
                if (val_[t.var] == 1) {
                    satisfied = true;
                    break;
                }
                if (val_[t.var] == -1) cheapest = std::min(cheapest, m_.costs[t.var]);
            }
            if (std::isfinite(cheapest)) {
                for (const auto& t : r.terms) {
                    if (val_[t.var] == -1) var_reduction[t.var] = cheapest;
                }
            }
            if (!satisfied) extra += cheapest;  // inf when unsatisfiable; caller prunes
        }
        if (secondary.empty() || !std::isfinite(extra)) return extra;
        for (const int ri : secondary) {
            const Row& r = rows_[ri];
            bool satisfied = false;
            double cheapest = std::numeric_limits<double>::infinity();
            for (const auto& t : r.terms) {
                if (val_[t.var] == 1) {
                    satisfied = true;
                    break;
                }
                if (val_[t.var] != -1) continue;
                const auto it = var_reduction.find(t.var);
                const double reduced =
                    m_.costs[t.var] - (it == var_reduction.end() ? 0.0 : it->second);
                cheapest = std::min(cheapest, std::max(0.0, reduced));
            }
            if (!satisfied) extra += cheapest;
        }
        return extra;
    }

    double lower_bound() const {
        double best_extra = 0.0;
        static const std::vector<int> kEmpty;
        const auto& g0 = cover_groups_.size() > 0 ? cover_groups_[0] : kEmpty;
        const auto& g1 = cover_groups_.size() > 1 ? cover_groups_[1] : kEmpty;
        if (!g0.empty()) best_extra = std::max(best_extra, reduction_bound(g0, g1));
        if (!g1.empty()) best_extra = std::max(best_extra, reduction_bound(g1, g0));
        return fixed_cost_ + best_extra;
    }

    // branch target: unsatisfied covering row with maximal regret, else the
    // cheapest open variable of the first row an all-zero completion violates
    int pick_branch_var(bool& complete) const {
        complete = false;
        int best_var = -1;
        double best_regret = -1.0;
        for (const int ri : cover_rows_) {
            const Row& r = rows_[ri];
            bool satisfied = false;
            double c1 = std::numeric_limits<double>::infinity();
            double c2 = std::numeric_limits<double>::infinity();
            int v1 = -1;
            for (const auto& t : r.terms) {
                if (val_[t.var] == 1) {
                    satisfied = true;
                    break;
                }
                if (val_[t.var] != -1) continue;
                if (m_.costs[t.var] < c1) {
                    c2 = c1;
                    c1 = m_.costs[t.var];
                    v1 = t.var;
                } else if (m_.costs[t.var] < c2) {
                    c2 = m_.costs[t.var];
                }
            }
            if (satisfied || v1 < 0) continue;
            const double regret = (c2 == std::numeric_limits<double>::infinity()) ? 1e300 : c2 - c1;
            if (regret > best_regret) {
                best_regret = regret;
                best_var = v1;
            }
        }
        if (best_var >= 0) return best_var;
        for (size_t ri = 0; ri < rows_.size(); ++ri) {
            const Row& r = rows_[ri];
            double at_zero = 0.0;
            int cand = -1;
            for (const auto& t : r.terms) {
                if (val_[t.var] == 1) at_zero += t.coef;
                if (val_[t.var] == -1 && (cand < 0 || m_.costs[t.var] < m_.costs[cand]))
                    cand = t.var;
            }
            const bool ok = (r.sense == Sense::le)   ? at_zero <= r.rhs + kEps
                            : (r.sense == Sense::ge) ? at_zero >= r.rhs - kEps
                                                     : std::abs(at_zero - r.rhs) <= kEps;
            if (!ok && cand >= 0) return cand;
            if (!ok) return -2;  // violated with nothing left to assign
        }
        complete = true;
        return -1;
    }

    // Resolve eliminated variables in reverse elimination order; keep the
    // incumbent when every substitution lands on a binary value.
    void record_incumbent() {
        std::vector<int8_t> full(val_.begin(), val_.end());
        for (auto& x : full) {
            if (x == -1) x = 0;
        }
        for (auto it = subs_.rbegin(); it != subs_.rend(); ++it) {
            double v = it->constant;
            for (const auto& t : it->terms) v += t.coef * (full[t.var] ? 1.0 : 0.0);
            if (std::abs(v) < 1e-6) full[it->var] = 0;
            else if (std::abs(v - 1.0) < 1e-6) full[it->var] = 1;
            else return;  // substitution landed off the binary domain
        }
        double obj = 0.0;
        for (int v = 0; v < m_.n_vars(); ++v) obj += full[v] ? m_.costs[v] : 0.0;
        if (obj < best_obj_ - kEps) {
            best_obj_ = obj;
            best_ = full;
        }
    }

    void offer_incumbent(const std::vector<int8_t>& x) {
        if (x.empty()) return;
        double obj = 0.0;
        for (int v = 0; v < m_.n_vars(); ++v) obj += x[v] ? m_.costs[v] : 0.0;
        if (obj < best_obj_ - kEps) {
            best_obj_ = obj;
            best_ = x;
        }
    }

    double node_bound() {
        const double cheap = lower_bound();
        if (cheap >= best_obj_ - kEps) return cheap;
        if (!flow_bound_->usable()) return cheap;
        std::vector<int8_t> feasible;
        const double b = flow_bound_->bound(val_, &feasible, best_obj_ - kEps);
        offer_incumbent(feasible);  // feasible anywhere counts globally
        return std::max(cheap, b);
    }

    void dive() {
        if (hit_limit_) return;
        if (++nodes_ > node_limit_ ||
            (nodes_ % 1024 == 0 && std::chrono::steady_clock::now() > deadline_)) {
            hit_limit_ = true;
            return;
        }

        bool complete = false;
        const int branch = pick_branch_var(complete);
        if (branch == -2) return;
        if (complete) {
#ifdef KTSP_BNB_DEBUG
            ++dbg_leaves;
            const double before = best_obj_;
#endif
            record_incumbent();
#ifdef KTSP_BNB_DEBUG
            if (best_obj_ < before)
                std::fprintf(stderr, "incumbent %.6f at node %llu (leaf %llu)\n", best_obj_,
                             (unsigned long long)nodes_, (unsigned long long)dbg_leaves);
            else ++dbg_rejected;
#endif
            return;
        }

        // probe both children and explore the tighter bound first; the
        // Lagrangian bound is near-exact on these models, so this dives
        // straight toward optimal leaves
        struct Probe {
            int8_t value;
            double bound;
            bool feasible;
        };
        Probe probes[2] = {{1, 0.0, false}, {0, 0.0, false}};
        for (auto& p : probes) {
            std::vector<int> trail;
            std::vector<int> dirty;
            apply(branch, p.value, trail, dirty);
            if (propagate(dirty, trail)) {
                p.feasible = true;
                p.bound = node_bound();
            }
            undo(trail, 0);
        }
        if (probes[1].feasible &&
            (!probes[0].feasible || probes[1].bound < probes[0].bound - kEps)) {
            std::swap(probes[0], probes[1]);
        }
        for (const auto& p : probes) {
            if (!p.feasible || p.bound >= best_obj_ - kEps) continue;
            std::vector<int> trail;
            std::vector<int> dirty;
            apply(branch, p.value, trail, dirty);
            if (propagate(dirty, trail)) dive();
            undo(trail, 0);
            if (hit_limit_) return;
        }
    }
};

inline BnbResult bnb_solve(const IlpModel& model, double time_limit_s = 3600.0,
                           uint64_t node_limit = 200'000'000) {
    model.validate();
    BnbSolver solver(model);
    return solver.solve(time_limit_s, node_limit);
}

}  // namespace ktsp
