#pragma once

// Two-body propagation and Lambert transfer costs. Propagation uses the
// universal-variable Kepler formulation (Battin/Curtis), Lambert arcs are
// found by bracketing the universal time-of-flight equation, including the
// multi-revolution windows. Elliptic orbits only.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ktsp/vec3.hpp"

namespace ktsp {

struct StateVector {
    Vec3 position;  // m
    Vec3 velocity;  // m/s
};

struct CentralBody {
    double mu = 0.0;  // m^3/s^2
};

struct UnsupportedOrbitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    double residual;
    ConvergenceError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

struct DegenerateGeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LambertBranch { short_way, long_way, multi_rev_low, multi_rev_high };

struct LambertSolution {
    Vec3 v_depart;  // m/s at r1
    Vec3 v_arrive;  // m/s at r2
    int revolutions = 0;
    LambertBranch branch = LambertBranch::short_way;
};

// Stumpff functions C(z) and S(z); series expansion near z = 0.
inline double stumpff_c(double z) {
    if (z > 1e-4) {
        return (1.0 - std::cos(std::sqrt(z))) / z;
    }
    if (z < -1e-4) {
        const double sq = std::sqrt(-z);
        return (std::cosh(sq) - 1.0) / (-z);
    }
    return 1.0 / 2.0 - z / 24.0 + z * z / 720.0 - z * z * z / 40320.0;
}

inline double stumpff_s(double z) {
    if (z > 1e-4) {
        const double sq = std::sqrt(z);
        return (sq - std::sin(sq)) / (sq * sq * sq);
    }
    if (z < -1e-4) {
        const double sq = std::sqrt(-z);
        return (std::sinh(sq) - sq) / (sq * sq * sq);
    }
    return 1.0 / 6.0 - z / 120.0 + z * z / 5040.0 - z * z * z / 362880.0;
}

inline double specific_energy(const StateVector& s, double mu) {
    return s.velocity.norm2() / 2.0 - mu / s.position.norm();
}

inline double orbital_period(const StateVector& s, double mu) {
    const double energy = specific_energy(s, mu);
    if (!(energy < 0.0)) {
        throw UnsupportedOrbitError("orbital_period: orbit is not elliptic (energy >= 0)");
    }
    const double a = -mu / (2.0 * energy);
    return 2.0 * M_PI * std::sqrt(a * a * a / mu);
}

// Advances an elliptic two-body state by dt (dt may be negative). Newton
// iteration on the universal Kepler equation with a bisection fallback;
// stops when the anomaly residual drops below 1e-12 rad.
inline StateVector propagate(const StateVector& state, double mu, double dt) {
    if (!(mu > 0.0)) throw std::invalid_argument("propagate: mu must be positive");
    const double r0 = state.position.norm();
    if (!(r0 > 0.0)) throw std::invalid_argument("propagate: position at central-mass singularity");
    if (!std::isfinite(dt)) throw std::invalid_argument("propagate: dt not finite");
    if (dt == 0.0) return state;

    const double v02 = state.velocity.norm2();
    const double energy = v02 / 2.0 - mu / r0;
    if (!(energy < 0.0)) {
        throw UnsupportedOrbitError("propagate: orbit is not elliptic (energy >= 0)");
    }

    const double alpha = 2.0 / r0 - v02 / mu;  // 1/a, positive for ellipses
    const double a = 1.0 / alpha;
    const double period = 2.0 * M_PI * std::sqrt(a * a * a / mu);

    // Reduce to one revolution; the state is periodic in the period.
    double dtr = std::fmod(dt, period);
    if (dtr < 0.0) dtr += period;
    if (dtr == 0.0) return state;

    const double sqrt_mu = std::sqrt(mu);
    const double sigma0 = dot(state.position, state.velocity) / sqrt_mu;
    const double target = sqrt_mu * dtr;

    // Universal Kepler equation: F(chi) = sigma0 chi^2 C + (1 - r0 alpha) chi^3 S + r0 chi - sqrt(mu) dt
    const auto kepler_f = [&](double chi) {
        const double z = alpha * chi * chi;
        return sigma0 * chi * chi * stumpff_c(z) +
               (1.0 - r0 * alpha) * chi * chi * chi * stumpff_s(z) + r0 * chi - target;
    };
    const auto kepler_df = [&](double chi) {  // dF/dchi = r(chi) > 0 on ellipses
        const double z = alpha * chi * chi;
        return sigma0 * chi * (1.0 - z * stumpff_s(z)) +
               (1.0 - r0 * alpha) * chi * chi * stumpff_c(z) + r0;
    };

    // chi is monotone over one revolution: bracket [0, 2 pi sqrt(a)].
    double lo = 0.0;
    double hi = 2.0 * M_PI * std::sqrt(a);
    double chi = std::clamp(sqrt_mu * alpha * dtr, lo, hi);
    const double anomaly_scale = std::pow(alpha, 1.5);  // |F| * alpha^(3/2) is in radians

    bool converged = false;
    double f = kepler_f(chi);
    for (int it = 0; it < 50; ++it) {
        if (std::abs(f) * anomaly_scale <= 1e-12) {
            converged = true;
            break;
        }
        if (f > 0.0) hi = chi; else lo = chi;
        const double df = kepler_df(chi);
        double next = chi - f / df;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
        chi = next;
        f = kepler_f(chi);
    }
    if (!converged && std::abs(f) * anomaly_scale > 1e-12) {
        throw ConvergenceError("propagate: universal Kepler iteration did not converge",
                               std::abs(f) * anomaly_scale);
    }

    const double z = alpha * chi * chi;
    const double cz = stumpff_c(z);
    const double sz = stumpff_s(z);

    const double lf = 1.0 - chi * chi * cz / r0;
    const double lg = dtr - chi * chi * chi * sz / sqrt_mu;
    const Vec3 r_new = lf * state.position + lg * state.velocity;
    const double rn = r_new.norm();
    const double lfdot = sqrt_mu / (rn * r0) * chi * (z * sz - 1.0);
    const double lgdot = 1.0 - chi * chi * cz / rn;
    const Vec3 v_new = lfdot * state.position + lgdot * state.velocity;
    return {r_new, v_new};
}

namespace detail {

// Time of flight along the universal Lambert equation for parameter z.
// Returns NaN where the geometry parameter y(z) is not positive.
inline double lambert_tof(double z, double r1n, double r2n, double A, double mu) {
    const double cz = stumpff_c(z);
    const double sz = stumpff_s(z);
    if (!(cz > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double y = r1n + r2n + A * (z * sz - 1.0) / std::sqrt(cz);
    if (!(y > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double chi = std::sqrt(y / cz);
    return (chi * chi * chi * sz + A * std::sqrt(y)) / std::sqrt(mu);
}

inline double lambert_y(double z, double r1n, double r2n, double A) {
    const double cz = stumpff_c(z);
    const double sz = stumpff_s(z);
    return r1n + r2n + A * (z * sz - 1.0) / std::sqrt(cz);
}

// Bisection for lambert_tof(z) == tof on [zlo, zhi]; expects tof(zlo) and
// tof(zhi) to straddle the target, with the branch monotone on the bracket.
inline std::optional<double> lambert_bisect(double zlo, double zhi, double tof, bool increasing,
                                            double r1n, double r2n, double A, double mu) {
    for (int it = 0; it < 200; ++it) {
        const double zm = 0.5 * (zlo + zhi);
        const double tm = lambert_tof(zm, r1n, r2n, A, mu);
        if (std::isnan(tm)) {
            // y <= 0 happens only toward small z on the A < 0 side; step right.
            if (increasing) zlo = zm; else zhi = zm;
            continue;
        }
        if ((tm < tof) == increasing) zlo = zm; else zhi = zm;
        if (zhi - zlo <= 1e-14 * std::max(1.0, std::abs(zhi))) break;
    }
    const double z = 0.5 * (zlo + zhi);
    const double t = lambert_tof(z, r1n, r2n, A, mu);
    if (std::isnan(t) || std::abs(t - tof) > 1e-6 * tof) return std::nullopt;
    return z;
}

}  // namespace detail

// All Lambert arcs from r1 to r2 in time tof with at most max_revs full
// revolutions. Short- and long-way geometries are both searched; only
// elliptic transfer arcs (z > 0) are returned, each verified by propagating
// the departure state and checking the arrival position.
inline std::vector<LambertSolution> lambert(const Vec3& r1, const Vec3& r2, double tof, double mu,
                                            int max_revs) {
    if (!(tof > 0.0) || !std::isfinite(tof)) throw std::invalid_argument("lambert: tof must be positive");
    if (!(mu > 0.0)) throw std::invalid_argument("lambert: mu must be positive");
    const double r1n = r1.norm();
    const double r2n = r2.norm();
    if (!(r1n > 0.0) || !(r2n > 0.0)) throw std::invalid_argument("lambert: zero position vector");

    const Vec3 cr = cross(r1, r2);
    if (cr.norm() <= 1e-12 * r1n * r2n) {
        throw DegenerateGeometryError("lambert: r1 and r2 are collinear, transfer plane undefined");
    }

    double cos_dth = dot(r1, r2) / (r1n * r2n);
    cos_dth = std::clamp(cos_dth, -1.0, 1.0);
    const double dth_short = std::acos(cos_dth);

    std::vector<LambertSolution> out;

    for (int way = 0; way < 2; ++way) {
        const bool long_way = way == 1;
        const double dth = long_way ? 2.0 * M_PI - dth_short : dth_short;
        const double A = std::sin(dth) * std::sqrt(r1n * r2n / (1.0 - std::cos(dth)));
        if (!std::isfinite(A) || A == 0.0) continue;

        const auto emit = [&](double z, int revs, LambertBranch branch) {
            const double y = detail::lambert_y(z, r1n, r2n, A);
            if (!(y > 0.0)) return;
            const double lf = 1.0 - y / r1n;
            const double lg = A * std::sqrt(y / mu);
            const double lgdot = 1.0 - y / r2n;
            if (lg == 0.0) return;
            LambertSolution sol;
            sol.v_depart = (r2 - lf * r1) / lg;
            sol.v_arrive = (lgdot * r2 - r1) / lg;
            sol.revolutions = revs;
            sol.branch = branch;
            // Residual gate: reject arcs the propagator cannot reproduce.
            try {
                const StateVector end = propagate({r1, sol.v_depart}, mu, tof);
                if ((end.position - r2).norm() <= 1e-6 * r2n) out.push_back(sol);
            } catch (const UnsupportedOrbitError&) {
            } catch (const ConvergenceError&) {
            }
        };

        // Zero-revolution branch: time of flight is monotone increasing in z on
        // the elliptic window (0, 4 pi^2). Scan for a sign-change bracket.
        {
            const double zhi_lim = 4.0 * M_PI * M_PI - 1e-9;
            const int kScan = 128;
            double prev_z = std::numeric_limits<double>::quiet_NaN();
            double prev_t = std::numeric_limits<double>::quiet_NaN();
            for (int i = 0; i <= kScan; ++i) {
                const double zc = 1e-8 + (zhi_lim - 1e-8) * (double(i) / kScan);
                const double tc = detail::lambert_tof(zc, r1n, r2n, A, mu);
                if (!std::isnan(tc)) {
                    if (!std::isnan(prev_t) && (prev_t - tof) * (tc - tof) <= 0.0) {
                        const auto z = detail::lambert_bisect(prev_z, zc, tof, tc >= prev_t,
                                                              r1n, r2n, A, mu);
                        if (z) emit(*z, 0, long_way ? LambertBranch::long_way : LambertBranch::short_way);
                        break;
                    }
                    prev_z = zc;
                    prev_t = tc;
                }
            }
        }

        // Multi-revolution windows: z in ((2 pi N)^2, (2 pi (N+1))^2) where the
        // time of flight is unimodal with a single minimum; one solution on
        // each side when tof clears the minimum.
        for (int revs = 1; revs <= max_revs; ++revs) {
            const double zl = std::pow(2.0 * M_PI * revs, 2) + 1e-9;
            const double zr = std::pow(2.0 * M_PI * (revs + 1), 2) - 1e-9;
            double lo = zl, hi = zr;
            for (int it = 0; it < 200; ++it) {  // golden-section for the minimum
                const double m1 = lo + (hi - lo) * 0.381966011250105;
                const double m2 = hi - (hi - lo) * 0.381966011250105;
                const double t1 = detail::lambert_tof(m1, r1n, r2n, A, mu);
                const double t2 = detail::lambert_tof(m2, r1n, r2n, A, mu);
                if (std::isnan(t1)) { lo = m1; continue; }
                if (std::isnan(t2)) { hi = m2; continue; }
                if (t1 < t2) hi = m2; else lo = m1;
                if (hi - lo <= 1e-12 * hi) break;
            }
            const double zmin = 0.5 * (lo + hi);
            const double tmin = detail::lambert_tof(zmin, r1n, r2n, A, mu);
            if (std::isnan(tmin) || tmin > tof) continue;
            const auto zlow = detail::lambert_bisect(zl, zmin, tof, false, r1n, r2n, A, mu);
            if (zlow) emit(*zlow, revs, LambertBranch::multi_rev_low);
            const auto zhigh = detail::lambert_bisect(zmin, zr, tof, true, r1n, r2n, A, mu);
            if (zhigh) emit(*zhigh, revs, LambertBranch::multi_rev_high);
        }
    }
    return out;
}

// Rendezvous cost between two already-propagated endpoint states: departure
// burn plus arrival burn, minimized over every Lambert branch. Infeasible
// geometries yield an empty optional instead of throwing so that network
// construction can skip the arc.
inline std::optional<double> transfer_cost(const StateVector& state_a, const StateVector& state_b,
                                           double tof, double mu, int max_revs) {
    if (!(tof > 0.0)) return std::nullopt;
    std::vector<LambertSolution> sols;
    try {
        sols = lambert(state_a.position, state_b.position, tof, mu, max_revs);
    } catch (const DegenerateGeometryError&) {
        return std::nullopt;
    } catch (const ConvergenceError&) {
        return std::nullopt;
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
    std::optional<double> best;
    for (const auto& s : sols) {
        const double dv = (s.v_depart - state_a.velocity).norm() +
                          (state_b.velocity - s.v_arrive).norm();
        if (!best || dv < *best) best = dv;
    }
    return best;
}

// Default revolution budget for a transfer: one candidate revolution per
// departure-body period that fits in the time of flight, capped at 4.
inline int default_max_revs(const StateVector& departure_state, double mu, double tof) {
    try {
        const double period = orbital_period(departure_state, mu);
        const int revs = static_cast<int>(std::floor(tof / period));
        return std::clamp(revs, 0, 4);
    } catch (const UnsupportedOrbitError&) {
        return 0;
    }
}

}  // namespace ktsp
