#pragma once

// Lagrangian lower bound for the network-shaped binary models: flow
// equalities stay as a unit-capacity circulation structure, every other row
// is priced into the arc costs with a multiplier. The inner minimization is
// a min-cost circulation solved by negative-cycle canceling, which is
// integral, so the fully converged dual matches the LP bound.
//
// Multipliers are trained once by deterministic subgradient steps; node
// bounds re-run the inner circulation against the current variable fixings
// (excluded arcs are dropped, which only tightens a valid bound).

#include <cmath>

#include "ktsp/ilp_model.hpp"

namespace ktsp {

class FlowLagrangianBound {
public:
    explicit FlowLagrangianBound(const IlpModel& model) : m_(model) {
        const int nv = m_.n_vars();
        tail_.assign(nv, -1);
        head_.assign(nv, -1);
        int n_flow = 0;
        std::vector<int> flow_row_node(m_.constraints.size(), -1);
        for (size_t ri = 0; ri < m_.constraints.size(); ++ri) {
            const auto& c = m_.constraints[ri];
            if (c.sense != Sense::eq || c.rhs != 0.0) continue;
            bool unit = true;
            for (const auto& t : c.terms) unit = unit && std::abs(t.coef) == 1.0;
            if (!unit) continue;
            flow_row_node[ri] = n_flow++;
        }
        usable_ = n_flow > 0;
        if (!usable_) return;
        hub_ = n_flow;  // exempt endpoints collapse into one free hub node
        n_nodes_ = n_flow + 1;
        for (size_t ri = 0; ri < m_.constraints.size(); ++ri) {
            const int node = flow_row_node[ri];
            if (node < 0) {
                priced_rows_.push_back(static_cast<int>(ri));
                continue;
            }
            for (const auto& t : m_.constraints[ri].terms) {
                if (t.coef > 0.0) {
                    if (tail_[t.var] != -1) usable_ = false;
                    tail_[t.var] = node;
                } else {
                    if (head_[t.var] != -1) usable_ = false;
                    head_[t.var] = node;
                }
            }
        }
        if (!usable_) return;
        for (int v = 0; v < nv; ++v) {
            if (tail_[v] < 0) tail_[v] = hub_;
            if (head_[v] < 0) head_[v] = hub_;
        }
        lambda_.assign(priced_rows_.size(), 0.0);
        train();
    }

    bool usable() const { return usable_; }

    // Valid lower bound on the full objective under the given fixings
    // (entries of `val` in {-1, 0, 1}; only 0-fixings restrict the inner
    // problem, 1-fixings are relaxed away, both keep the bound valid).
    // When the inner minimizer happens to satisfy every model constraint it
    // is exported through `feasible_x` as a ready-made incumbent.
    double bound(const std::vector<int8_t>& val, std::vector<int8_t>* feasible_x = nullptr,
                 double prune_at = std::numeric_limits<double>::infinity()) const {
        if (!usable_) return -std::numeric_limits<double>::infinity();
        // a few warm-started subgradient steps let the bound react to the
        // fixings; every feasible inner minimizer is offered as incumbent
        std::vector<double> lam = lambda_;
        double best = -std::numeric_limits<double>::infinity();
        double step_scale = 0.25;
        for (int it = 0; it < refine_steps_ + 1; ++it) {
            std::vector<int8_t> x;
            const double value = evaluate(lam, val, &x);
            if (!std::isfinite(value)) break;
            best = std::max(best, value);
            if (best >= prune_at) return best;  // caller prunes; skip refinement
            if (feasible_x && satisfies_all(x)) {
                double obj = 0.0, cur = std::numeric_limits<double>::infinity();
                for (int v = 0; v < m_.n_vars(); ++v) obj += x[v] ? m_.costs[v] : 0.0;
                if (!feasible_x->empty()) {
                    cur = 0.0;
                    for (int v = 0; v < m_.n_vars(); ++v)
                        cur += (*feasible_x)[v] ? m_.costs[v] : 0.0;
                }
                if (obj < cur) *feasible_x = x;
            }
            if (it == refine_steps_) break;
            std::vector<double> grad(priced_rows_.size(), 0.0);
            double norm2 = 0.0;
            for (size_t k = 0; k < priced_rows_.size(); ++k) {
                const auto& c = m_.constraints[priced_rows_[k]];
                double ax = 0.0;
                for (const auto& t : c.terms) ax += t.coef * (x[t.var] ? 1.0 : 0.0);
                grad[k] = c.sense == Sense::ge ? c.rhs - ax : ax - c.rhs;
                norm2 += grad[k] * grad[k];
            }
            if (norm2 < 1e-18) break;
            const double step = step_scale * (std::abs(value) + 1.0) / norm2;
            for (size_t k = 0; k < priced_rows_.size(); ++k)
                lam[k] = std::max(0.0, lam[k] + step * grad[k]);
            step_scale *= 0.7;
        }
        return best;
    }

    int refine_steps_ = 6;

    // best feasible inner solution seen while training the multipliers
    const std::vector<int8_t>& trained_incumbent() const { return incumbent_x_; }

    bool satisfies_all(const std::vector<int8_t>& x) const {
        for (const auto& c : m_.constraints) {
            double lhs = 0.0;
            for (const auto& t : c.terms) lhs += t.coef * (x[t.var] ? 1.0 : 0.0);
            const bool ok = (c.sense == Sense::le)   ? lhs <= c.rhs + 1e-9
                            : (c.sense == Sense::ge) ? lhs >= c.rhs - 1e-9
                                                     : std::abs(lhs - c.rhs) <= 1e-9;
            if (!ok) return false;
        }
        return true;
    }

private:
    const IlpModel& m_;
    bool usable_ = false;
    int n_nodes_ = 0;
    int hub_ = 0;
    std::vector<int> tail_, head_;
    std::vector<int> priced_rows_;
    std::vector<double> lambda_;
    std::vector<int8_t> incumbent_x_;

    // L(lambda) with an optional export of the inner minimizer.
    double evaluate(const std::vector<double>& lambda, const std::vector<int8_t>& val,
                    std::vector<int8_t>* inner_x) const {
        const int nv = m_.n_vars();
        std::vector<double> red(m_.costs);
        double constant = 0.0;
        for (size_t k = 0; k < priced_rows_.size(); ++k) {
            const auto& c = m_.constraints[priced_rows_[k]];
            const double lam = lambda[k];
            if (lam == 0.0) continue;
            // ge rows enter as lam*(rhs - Ax), le rows as lam*(Ax - rhs)
            const double sign = c.sense == Sense::ge ? -1.0 : 1.0;
            constant += (c.sense == Sense::ge ? lam * c.rhs : -lam * c.rhs);
            for (const auto& t : c.terms) red[t.var] += sign * lam * t.coef;
        }

        // min-cost circulation over unit-capacity arcs by canceling negative
        // residual cycles (Bellman-Ford, deterministic scan order)
        std::vector<int8_t> x(nv, 0);
        double cost = 0.0;
        const double kTol = 1e-9;
        bool proven = false;
        for (int rounds = 0; rounds < 4 * nv + 16; ++rounds) {
            std::vector<double> dist(n_nodes_, 0.0);
            std::vector<int> pred_arc(n_nodes_, -1);
            std::vector<int> pred_node(n_nodes_, -1);
            int touched = -1;
            for (int it = 0; it < n_nodes_ && touched < 0; ++it) {
                bool changed = false;
                for (int v = 0; v < nv; ++v) {
                    if (val[v] == 0 && !x[v]) continue;  // excluded arc
                    int u, w;
                    double c;
                    if (!x[v]) {
                        u = tail_[v];
                        w = head_[v];
                        c = red[v];
                    } else {
                        u = head_[v];
                        w = tail_[v];
                        c = -red[v];
                    }
                    if (u == w) continue;
                    if (dist[u] + c < dist[w] - kTol) {
                        dist[w] = dist[u] + c;
                        pred_arc[w] = v;
                        pred_node[w] = u;
                        changed = true;
                        if (it == n_nodes_ - 1) touched = w;
                    }
                }
                if (!changed) {
                    proven = true;  // no residual cycle beats the tolerance
                    break;
                }
            }
            if (proven || touched < 0) {
                proven = proven || touched < 0;
                break;
            }
            // step inside the cycle before extracting (predecessor entries
            // outside it may be stale)
            int node = touched;
            for (int i = 0; i < n_nodes_; ++i) node = pred_node[node];
            double sum = 0.0;
            {
                int walk = node;
                do {
                    const int v = pred_arc[walk];
                    sum += x[v] ? -red[v] : red[v];
                    walk = pred_node[walk];
                } while (walk != node);
            }
            if (!(sum < -kTol / 2)) return -std::numeric_limits<double>::infinity();
            int walk = node;
            do {
                const int v = pred_arc[walk];
                cost += x[v] ? -red[v] : red[v];
                x[v] ^= 1;
                walk = pred_node[walk];
            } while (walk != node);
        }
        if (!proven) return -std::numeric_limits<double>::infinity();
        if (inner_x) *inner_x = x;
        // residual cycles below tolerance can shave at most this much
        return constant + cost - kTol * nv;
    }

    void train() {
        if (priced_rows_.empty()) return;
        const std::vector<int8_t> free(m_.n_vars(), -1);
        std::vector<double> lam(priced_rows_.size(), 0.0);
        std::vector<double> best_lam = lam;
        double best = evaluate(lam, free, nullptr);
        double step_scale = 2.0;

        // crude pessimistic target for the Polyak step length
        double target = 0.0;
        for (const int ri : priced_rows_) {
            const auto& c = m_.constraints[ri];
            if (c.sense != Sense::ge) continue;
            double cheapest = std::numeric_limits<double>::infinity();
            for (const auto& t : c.terms) cheapest = std::min(cheapest, m_.costs[t.var]);
            if (std::isfinite(cheapest)) target += 2.0 * cheapest;
        }
        if (target <= 0.0) target = 1.0;

        int stall = 0;
        for (int it = 0; it < 120; ++it) {
            std::vector<int8_t> x;
            const double value = evaluate(lam, free, &x);
            if (!std::isfinite(value)) break;
            if (satisfies_all(x)) {
                double obj = 0.0;
                for (int v = 0; v < m_.n_vars(); ++v) obj += x[v] ? m_.costs[v] : 0.0;
                double inc_obj = std::numeric_limits<double>::infinity();
                if (!incumbent_x_.empty()) {
                    inc_obj = 0.0;
                    for (int v = 0; v < m_.n_vars(); ++v)
                        inc_obj += incumbent_x_[v] ? m_.costs[v] : 0.0;
                }
                if (obj < inc_obj) incumbent_x_ = x;
            }
            if (value > best + 1e-12) {
                best = value;
                best_lam = lam;
                stall = 0;
            } else if (++stall >= 10) {
                step_scale /= 2.0;
                stall = 0;
                if (step_scale < 1e-4) break;
            }
            std::vector<double> grad(priced_rows_.size(), 0.0);
            double norm2 = 0.0;
            for (size_t k = 0; k < priced_rows_.size(); ++k) {
                const auto& c = m_.constraints[priced_rows_[k]];
                double ax = 0.0;
                for (const auto& t : c.terms) ax += t.coef * (x[t.var] ? 1.0 : 0.0);
                grad[k] = c.sense == Sense::ge ? c.rhs - ax : ax - c.rhs;
                norm2 += grad[k] * grad[k];
            }
            if (norm2 < 1e-18) break;  // relaxed solution satisfies all priced rows
            const double gap = std::max(target - value, 0.1 * std::abs(target) + 1.0);
            const double step = step_scale * gap / norm2;
            for (size_t k = 0; k < priced_rows_.size(); ++k) {
                lam[k] = std::max(0.0, lam[k] + step * grad[k]);
            }
        }
        lambda_ = best_lam;
    }
};

}  // namespace ktsp
