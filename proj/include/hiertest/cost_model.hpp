#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hiertest/util.hpp"

namespace hiertest {

// Convex power functions Psi: [0,1] -> R+, increasing, Psi(0) = 0. The cost
// of a test with scope k and power b is c * Gamma(k) * Psi(b).
//
// The catalog (default parameters lambda = 1, mu = 8):
//   psi1: x(1 - sqrt(1-x))
//   psi2: x^2 / 2
//   psi3: 1 - sqrt(1-x^2)
//   psi4: exp(lambda x) - 1
//   psi5: 2 - x - 2 sqrt(1-x)        (the "harmonic" entry)
//   psi6: 1 - sqrt(1-x)
//   psi7: exp(mu x) - 1 - mu x
// psi2, psi4 and psi7 have Psi(1) != 1 and are flagged non-normalized.

enum class PsiKind { psi1, psi2, psi3, psi4, psi5, psi6, psi7, custom };

namespace detail {

inline double ternary_max_concave(const std::function<double(double)>& g,
                                  double lo, double hi, int iters = 200) {
    for (int i = 0; i < iters && hi - lo > 1e-15; ++i) {
        double m1 = lo + (hi - lo) / 3.0;
        double m2 = hi - (hi - lo) / 3.0;
        if (g(m1) < g(m2))
            lo = m1;
        else
            hi = m2;
    }
    return 0.5 * (lo + hi);
}

// Stationary point parameter for psi1: solving psi1'(1 - s^2) = u in
// s = sqrt(1 - beta) gives 3 s^2 + 2 s (u - 1) - 1 = 0.
inline double psi1_s(double u) {
    return ((1.0 - u) + std::sqrt((1.0 - u) * (1.0 - u) + 3.0)) / 3.0;
}

}  // namespace detail

class PowerFunction {
public:
    PsiKind kind = PsiKind::psi5;
    double lambda = 1.0;  // psi4 parameter
    double mu = 8.0;      // psi7 parameter

    PowerFunction() = default;

    static PowerFunction harmonic() { return of_kind(PsiKind::psi5); }

    static PowerFunction of_kind(PsiKind k, double lambda = 1.0, double mu = 8.0) {
        PowerFunction p;
        p.kind = k;
        p.lambda = lambda;
        p.mu = mu;
        return p;
    }

    /// Accepts "psi1".."psi7" or "harmonic" (alias of psi5).
    static PowerFunction catalog(const std::string& name, double lambda = 1.0, double mu = 8.0) {
        if (name == "harmonic" || name == "psi5") return of_kind(PsiKind::psi5);
        if (name == "psi1") return of_kind(PsiKind::psi1);
        if (name == "psi2") return of_kind(PsiKind::psi2);
        if (name == "psi3") return of_kind(PsiKind::psi3);
        if (name == "psi4") return of_kind(PsiKind::psi4, lambda, mu);
        if (name == "psi6") return of_kind(PsiKind::psi6);
        if (name == "psi7") return of_kind(PsiKind::psi7, lambda, mu);
        throw ConfigError("unknown power function: " + name);
    }

    static std::vector<PowerFunction> full_catalog() {
        return {of_kind(PsiKind::psi1), of_kind(PsiKind::psi2), of_kind(PsiKind::psi3),
                of_kind(PsiKind::psi4), of_kind(PsiKind::psi5), of_kind(PsiKind::psi6),
                of_kind(PsiKind::psi7)};
    }

    static PowerFunction custom(std::function<double(double)> value,
                                std::function<double(double)> deriv) {
        PowerFunction p;
        p.kind = PsiKind::custom;
        p.value_ = std::move(value);
        p.deriv_ = std::move(deriv);
        return p;
    }

    std::string name() const {
        switch (kind) {
            case PsiKind::psi1: return "psi1";
            case PsiKind::psi2: return "psi2";
            case PsiKind::psi3: return "psi3";
            case PsiKind::psi4: return "psi4";
            case PsiKind::psi5: return "psi5";
            case PsiKind::psi6: return "psi6";
            case PsiKind::psi7: return "psi7";
            case PsiKind::custom: return "custom";
        }
        return "?";
    }

    double operator()(double x) const {
        switch (kind) {
            case PsiKind::psi1: return x * (1.0 - std::sqrt(1.0 - x));
            case PsiKind::psi2: return 0.5 * x * x;
            case PsiKind::psi3: return 1.0 - std::sqrt(1.0 - x * x);
            case PsiKind::psi4: return std::exp(lambda * x) - 1.0;
            case PsiKind::psi5: return 2.0 - x - 2.0 * std::sqrt(1.0 - x);
            case PsiKind::psi6: return 1.0 - std::sqrt(1.0 - x);
            case PsiKind::psi7: return std::exp(mu * x) - 1.0 - mu * x;
            case PsiKind::custom: return value_(x);
        }
        return 0.0;
    }

    double deriv(double x) const {
        const double inf = std::numeric_limits<double>::infinity();
        switch (kind) {
            case PsiKind::psi1: {
                if (x >= 1.0) return inf;
                double s = std::sqrt(1.0 - x);
                return 1.0 - s + x / (2.0 * s);
            }
            case PsiKind::psi2: return x;
            case PsiKind::psi3:
                return x >= 1.0 ? inf : x / std::sqrt(1.0 - x * x);
            case PsiKind::psi4: return lambda * std::exp(lambda * x);
            case PsiKind::psi5:
                return x >= 1.0 ? inf : 1.0 / std::sqrt(1.0 - x) - 1.0;
            case PsiKind::psi6:
                return x >= 1.0 ? inf : 0.5 / std::sqrt(1.0 - x);
            case PsiKind::psi7: return mu * (std::exp(mu * x) - 1.0);
            case PsiKind::custom: return deriv_(x);
        }
        return 0.0;
    }

    double deriv0() const {
        switch (kind) {
            case PsiKind::psi4: return lambda;
            case PsiKind::psi6: return 0.5;
            case PsiKind::custom: return deriv_(0.0);
            default: return 0.0;
        }
    }

    double deriv1() const {
        const double inf = std::numeric_limits<double>::infinity();
        switch (kind) {
            case PsiKind::psi2: return 1.0;
            case PsiKind::psi4: return lambda * std::exp(lambda);
            case PsiKind::psi7: return mu * (std::exp(mu) - 1.0);
            case PsiKind::custom: return deriv_(1.0);
            default: return inf;
        }
    }

    bool normalized() const { return std::fabs((*this)(1.0) - 1.0) <= tol().exact; }

    /// Legendre conjugate sup_{b in [0,1]} (x b - Psi(b)) for x >= 0.
    double conjugate(double x) const {
        switch (kind) {
            case PsiKind::psi1: {
                if (!psi1_closed_form_ok()) return conjugate_numeric(x);
                return psi1_conjugate_closed(x);
            }
            case PsiKind::psi2:
                return x < 1.0 ? 0.5 * x * x : x - 0.5;
            case PsiKind::psi3:
                return std::sqrt(1.0 + x * x) - 1.0;
            case PsiKind::psi4: {
                if (x <= lambda) return 0.0;
                double top = lambda * std::exp(lambda);
                if (x >= top) return x - std::exp(lambda) + 1.0;
                double r = x / lambda;
                return r * std::log(r) - r + 1.0;
            }
            case PsiKind::psi5:
                return x * x / (1.0 + x);
            case PsiKind::psi6:
                return x <= 0.5 ? 0.0 : x - 1.0 + 0.25 / x;
            case PsiKind::psi7: {
                double top = mu * (std::exp(mu) - 1.0);
                if (x >= top) return x - (std::exp(mu) - 1.0 - mu);
                double r = x / mu;
                return (1.0 + r) * std::log1p(r) - r;
            }
            case PsiKind::custom: {
                double b = deriv_inverse(x);
                return x * b - (*this)(b);
            }
        }
        return 0.0;
    }

    /// Conjugate by direct maximization of the concave map b -> x b - Psi(b);
    /// the test-side oracle for the closed forms above.
    double conjugate_numeric(double x) const {
        auto g = [&](double b) { return x * b - (*this)(b); };
        double b = detail::ternary_max_concave(g, 0.0, 1.0);
        double best = std::max({g(b), g(0.0), g(1.0)});
        return best;
    }

    /// Monotone inverse of the derivative, clipped to [0,1] (the three cases
    /// of the optimal power formula).
    double deriv_inverse(double u) const {
        if (u <= deriv0()) return 0.0;
        switch (kind) {
            case PsiKind::psi1: {
                double s = detail::psi1_s(u);
                return s >= 1.0 ? 0.0 : 1.0 - s * s;
            }
            case PsiKind::psi2: return u >= 1.0 ? 1.0 : u;
            case PsiKind::psi3: return u / std::sqrt(1.0 + u * u);
            case PsiKind::psi4: {
                if (u >= lambda * std::exp(lambda)) return 1.0;
                return std::log(u / lambda) / lambda;
            }
            case PsiKind::psi5: {
                double t = 1.0 + u;
                return 1.0 - 1.0 / (t * t);
            }
            case PsiKind::psi6: return 1.0 - 0.25 / (u * u);
            case PsiKind::psi7: {
                double b = std::log1p(u / mu) / mu;
                return b >= 1.0 ? 1.0 : b;
            }
            case PsiKind::custom: return deriv_inverse_bisect(u);
        }
        return 0.0;
    }

private:
    std::function<double(double)> value_, deriv_;

    double psi1_conjugate_closed(double x) const {
        double s = detail::psi1_s(x);
        if (s >= 1.0) return 0.0;
        double b = 1.0 - s * s;
        return b * (x - 1.0 + s);
    }

    // The lengthy psi1 conjugate is trusted only after a one-time comparison
    // against the numeric maximizer.
    bool psi1_closed_form_ok() const {
        static const bool ok = [] {
            PowerFunction p = PowerFunction::of_kind(PsiKind::psi1);
            for (int i = 0; i <= 256; ++i) {
                double x = 10.0 * i / 256.0;
                double closed = p.psi1_conjugate_closed(x);
                if (std::fabs(closed - p.conjugate_numeric(x)) > tol().closed_form_check)
                    return false;
            }
            return true;
        }();
        return ok;
    }

    double deriv_inverse_bisect(double u) const {
        double hi_d = deriv_(1.0);
        if (std::isfinite(hi_d) && u >= hi_d) return 1.0;
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < tol().deriv_inverse_iters && hi - lo > tol().deriv_inverse; ++i) {
            double mid = 0.5 * (lo + hi);
            if (deriv_(mid) < u)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }
};

/// Complexity function Gamma over scopes, Gamma(1) = 1, subadditive.
class ComplexityFunction {
public:
    enum class Kind { identity, one, table };

    Kind kind = Kind::identity;
    std::vector<double> values;  // values[k-1] = Gamma(k), table kind only

    static ComplexityFunction identity() { return {}; }

    static ComplexityFunction one() {
        ComplexityFunction g;
        g.kind = Kind::one;
        return g;
    }

    static ComplexityFunction table(std::vector<double> v) {
        if (v.empty()) throw ConfigError("complexity table must not be empty");
        if (std::fabs(v[0] - 1.0) > tol().exact)
            throw ConfigError("complexity table requires Gamma(1) = 1");
        ComplexityFunction g;
        g.kind = Kind::table;
        g.values = std::move(v);
        return g;
    }

    double operator()(int scope) const {
        if (scope < 1) throw std::invalid_argument("scope must be >= 1");
        switch (kind) {
            case Kind::identity: return static_cast<double>(scope);
            case Kind::one: return 1.0;
            case Kind::table:
                if (scope > static_cast<int>(values.size()))
                    throw ConfigError("complexity table has no entry for scope " +
                                      std::to_string(scope));
                return values[scope - 1];
        }
        return 1.0;
    }

    std::string name() const {
        switch (kind) {
            case Kind::identity: return "identity";
            case Kind::one: return "one";
            case Kind::table: return "table";
        }
        return "?";
    }
};

/// Gamma(m+n) <= Gamma(m) + Gamma(n) for every pair of listed scopes whose
/// sum is also listed (or representable).
inline bool is_subadditive_on(const ComplexityFunction& g, const std::vector<int>& scopes) {
    for (int m : scopes)
        for (int n : scopes) {
            int s = m + n;
            bool have = g.kind != ComplexityFunction::Kind::table ||
                        s <= static_cast<int>(g.values.size());
            if (!have) continue;
            if (g(s) > g(m) + g(n) + tol().exact) return false;
        }
    return true;
}

struct CostModel {
    ComplexityFunction gamma{};
    PowerFunction psi = PowerFunction::harmonic();
    double c = 1.0;  // unit cost scale
    // Unit postprocessing cost. When unset it defaults to the price of a
    // power-1 singleton test, c * Gamma(1) * Psi(1); the two coincide under
    // the usual normalization but differ for the non-normalized catalog
    // entries, whose depth recursions assume the Psi(1) price.
    std::optional<double> c_star = std::nullopt;

    double effective_c_star() const { return c_star.value_or(c * psi(1.0)); }

    /// Effective complexity weight entering the power optimization.
    double a(int scope) const { return c * gamma(scope); }
};

inline double psi_star(const PowerFunction& psi, double x) {
    if (x < 0) throw std::invalid_argument("psi_star: x must be >= 0");
    return psi.conjugate(x);
}

/// Phi_a(x) = x - a Psi*(x/a), a > 0, x >= 0.
inline double phi(const PowerFunction& psi, double a, double x) {
    if (!(a > 0)) throw std::invalid_argument("phi: a must be > 0");
    if (x < 0) throw std::invalid_argument("phi: x must be >= 0");
    return x - a * psi.conjugate(x / a);
}

struct PowerChoice {
    double beta;
    double cost;
};

/// Optimal power for a test whose 0-branch costs x and 1-branch costs y
/// (y >= x >= 0), with complexity weight a: minimizes a Psi(b) + b x + (1-b) y.
inline PowerChoice optimal_power(const PowerFunction& psi, double a, double x, double y) {
    if (!(a > 0)) throw std::invalid_argument("optimal_power: a must be > 0");
    if (x < 0 || y < x) throw std::invalid_argument("optimal_power: need y >= x >= 0");
    double u = (y - x) / a;
    return {psi.deriv_inverse(u), x + phi(psi, a, y - x)};
}

/// As optimal_power but tolerates y < x (where the minimizer is b = 0 with
/// cost y); used by per-skeleton optimizers on arbitrary tree shapes.
inline PowerChoice optimal_power_clamped(const PowerFunction& psi, double a, double x, double y) {
    if (y <= x) return {0.0, y};
    return optimal_power(psi, a, x, y);
}

inline double test_cost(const CostModel& m, int scope, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::invalid_argument("test_cost: beta outside [0,1]");
    return m.c * m.gamma(scope) * m.psi(beta);
}

}  // namespace hiertest
