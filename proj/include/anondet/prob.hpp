#pragma once

// Finite-alphabet probability primitives: distributions, types (empirical
// count vectors), KL divergence in bits, mixtures and the problem instance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anondet/error.hpp"

namespace anondet {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLn2 = 0.693147180559945309417232121458176568;
inline constexpr double kDistTolerance = 1e-12;

// ---------------------------------------------------------------------------
// log2-domain arithmetic
// ---------------------------------------------------------------------------

/// log2(2^a + 2^b) without overflow; either argument may be -inf.
inline double log2_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log2(1.0 + std::exp2(b - a));
}

/// log2 of sum_i 2^{x_i}, extracting the max first.
inline double log2_sum(std::span<const double> xs) {
    double hi = -kInf;
    for (double x : xs) hi = std::max(hi, x);
    if (hi == -kInf || hi == kInf) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp2(x - hi);
    return hi + std::log2(acc);
}

inline double log2_factorial(int n) {
    if (n < 0) throw InvalidArgument("log2_factorial: negative argument");
    if (n < 2) return 0.0;
    return std::lgamma(static_cast<double>(n) + 1.0) / kLn2;
}

/// log2 of the multinomial coefficient n! / prod_i c_i!.
inline double log2_multinomial(std::span<const int> counts) {
    int n = 0;
    double acc = 0.0;
    for (int c : counts) {
        n += c;
        acc -= log2_factorial(c);
    }
    return acc + log2_factorial(n);
}

// ---------------------------------------------------------------------------
// Alphabet
// ---------------------------------------------------------------------------

class Alphabet {
public:
    explicit Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
        if (symbols_.size() < 2) throw InvalidArgument("Alphabet: need at least two symbols");
        auto sorted = symbols_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw InvalidArgument("Alphabet: duplicate symbol");
    }

    /// Symbols "0", "1", ..., "d-1".
    static Alphabet indexed(std::size_t d) {
        std::vector<std::string> s;
        for (std::size_t i = 0; i < d; ++i) s.push_back(std::to_string(i));
        return Alphabet(std::move(s));
    }

    std::size_t size() const { return symbols_.size(); }
    const std::string& symbol(std::size_t i) const { return symbols_.at(i); }

    std::optional<std::size_t> index_of(const std::string& s) const {
        auto it = std::find(symbols_.begin(), symbols_.end(), s);
        if (it == symbols_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - symbols_.begin());
    }

private:
    std::vector<std::string> symbols_;
};

// ---------------------------------------------------------------------------
// Dist
// ---------------------------------------------------------------------------

/// Probability vector over an ordered finite alphabet. Immutable.
class Dist {
public:
    Dist() = default;

    /// Validates nonnegativity and |sum - 1| <= 1e-12, then renormalizes.
    explicit Dist(std::vector<double> p) : p_(std::move(p)) {
        if (p_.empty()) throw InvalidArgument("Dist: empty probability vector");
        double s = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw InvalidArgument("Dist: entries must be finite and nonnegative");
            s += v;
        }
        if (std::abs(s - 1.0) > kDistTolerance)
            throw InvalidArgument("Dist: entries sum to " + std::to_string(s) + ", expected 1");
        for (double& v : p_) v /= s;
    }

    /// Normalizes arbitrary nonnegative weights with a positive total.
    static Dist normalized(std::vector<double> w) {
        double s = 0.0;
        for (double v : w) {
            if (!(v >= 0.0) || !std::isfinite(v))
                throw InvalidArgument("Dist::normalized: weights must be finite and nonnegative");
            s += v;
        }
        if (!(s > 0.0)) throw InvalidArgument("Dist::normalized: zero total weight");
        for (double& v : w) v /= s;
        Dist d;
        d.p_ = std::move(w);
        return d;
    }

    /// Ber(p) = [1 - p, p]: p is the probability of the second symbol.
    static Dist bernoulli(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("Dist::bernoulli: p outside [0,1]");
        return Dist({1.0 - p, p});
    }

    static Dist point_mass(std::size_t d, std::size_t x) {
        if (x >= d) throw InvalidArgument("Dist::point_mass: symbol out of range");
        std::vector<double> p(d, 0.0);
        p[x] = 1.0;
        return Dist(std::move(p));
    }

    static Dist uniform(std::size_t d) { return Dist(std::vector<double>(d, 1.0 / static_cast<double>(d))); }

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    std::span<const double> values() const { return p_; }
    const std::vector<double>& vec() const { return p_; }

    bool supports(std::size_t x) const { return p_[x] > 0.0; }

    friend bool operator==(const Dist&, const Dist&) = default;

private:
    std::vector<double> p_;
};

inline double l1_distance(const Dist& a, const Dist& b) {
    if (a.size() != b.size()) throw InvalidArgument("l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

/// D(P||Q) in bits, with 0 log 0 = 0; +inf iff P is not absolutely continuous w.r.t. Q.
inline double kl(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw InvalidArgument("kl: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) return kInf;
        s += p[i] * std::log2(p[i] / q[i]);
    }
    // Rounding can leave tiny negative residue when p == q.
    return std::max(0.0, s);
}

inline double kl(const Dist& p, const Dist& q) { return kl(p.values(), q.values()); }

// ---------------------------------------------------------------------------
// CompositeType and the type space P_n
// ---------------------------------------------------------------------------

/// Symbol counts of a length-n sequence.
class CompositeType {
public:
    CompositeType() = default;
    explicit CompositeType(std::vector<int> counts) : counts_(std::move(counts)) {
        if (counts_.empty()) throw InvalidArgument("CompositeType: empty count vector");
        for (int c : counts_) {
            if (c < 0) throw InvalidArgument("CompositeType: negative count");
            n_ += c;
        }
    }

    int n() const { return n_; }
    std::size_t size() const { return counts_.size(); }
    int operator[](std::size_t i) const { return counts_[i]; }
    std::span<const int> counts() const { return counts_; }
    const std::vector<int>& vec() const { return counts_; }

    /// counts / n; requires n >= 1.
    Dist as_dist() const {
        if (n_ == 0) throw InvalidArgument("CompositeType::as_dist: empty sequence has no type");
        std::vector<double> p(counts_.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(counts_[i]) / n_;
        return Dist::normalized(std::move(p));
    }

    friend bool operator==(const CompositeType&, const CompositeType&) = default;
    friend auto operator<=>(const CompositeType& a, const CompositeType& b) { return a.counts_ <=> b.counts_; }

private:
    std::vector<int> counts_;
    int n_ = 0;
};

/// Calls fn(counts) for every composition of n into d parts, in descending
/// lexicographic order: (n,0,..,0) first, (0,..,0,n) last.
template <class Fn>
void for_each_composition(int n, std::size_t d, Fn&& fn) {
    if (n < 0 || d < 1) throw InvalidArgument("for_each_composition: need n >= 0, d >= 1");
    std::vector<int> c(d, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
        if (pos + 1 == d) {
            c[pos] = left;
            fn(std::as_const(c));
            return;
        }
        for (int v = left; v >= 0; --v) {
            c[pos] = v;
            rec(pos + 1, left - v);
        }
    };
    rec(0, n);
}

/// Every type of length-n sequences over d symbols; |result| = C(n+d-1, d-1).
inline std::vector<CompositeType> enumerate_types(int n, std::size_t d) {
    std::vector<CompositeType> out;
    for_each_composition(n, d, [&](const std::vector<int>& c) { out.emplace_back(c); });
    return out;
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    return std::round(std::exp2(log2_factorial(n) - log2_factorial(k) - log2_factorial(n - k)));
}

/// Indexed collection of all types for fixed (n, d).
class TypeSpace {
public:
    TypeSpace(int n, std::size_t d) : n_(n), d_(d), types_(enumerate_types(n, d)) {
        for (std::size_t i = 0; i < types_.size(); ++i) index_.emplace(types_[i].vec(), i);
    }

    int n() const { return n_; }
    std::size_t alphabet_size() const { return d_; }
    std::size_t size() const { return types_.size(); }
    const CompositeType& operator[](std::size_t i) const { return types_[i]; }
    const std::vector<CompositeType>& types() const { return types_; }

    std::size_t index_of(std::span<const int> counts) const {
        auto it = index_.find(std::vector<int>(counts.begin(), counts.end()));
        if (it == index_.end()) throw InvalidArgument("TypeSpace: type not in P_n");
        return it->second;
    }
    std::size_t index_of(const CompositeType& t) const { return index_of(t.counts()); }

private:
    int n_;
    std::size_t d_;
    std::vector<CompositeType> types_;
    std::map<std::vector<int>, std::size_t> index_;
};

/// Exact log2 Q^{(x)n}(T_n(U)) = log2 multinomial + sum_a U_a log2 Q(a).
inline double type_class_log_prob(const CompositeType& u, const Dist& q) {
    if (u.size() != q.size()) throw InvalidArgument("type_class_log_prob: size mismatch");
    double acc = log2_multinomial(u.counts());
    for (std::size_t a = 0; a < u.size(); ++a) {
        if (u[a] == 0) continue;
        if (q[a] <= 0.0) return -kInf;
        acc += u[a] * std::log2(q[a]);
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Profile
// ---------------------------------------------------------------------------

/// Largest-remainder apportionment of n sensors to weights alpha.
inline std::vector<int> apportion(std::span<const double> alpha, int n) {
    if (n < 0) throw InvalidArgument("apportion: negative n");
    std::vector<int> nu(alpha.size());
    std::vector<std::pair<double, std::size_t>> rem;
    int used = 0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        double exact = alpha[k] * n;
        nu[k] = static_cast<int>(std::floor(exact + 1e-9));
        used += nu[k];
        rem.emplace_back(exact - nu[k], k);
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; used < n; ++i, ++used) nu[rem[i % rem.size()].second] += 1;
    return nu;
}

/// Problem instance: K groups, per-group distributions under H0 and H1,
/// asymptotic fractions alpha and (optionally) finite-n group sizes nu.
class Profile {
public:
    Profile(std::vector<Dist> p0, std::vector<Dist> p1, std::vector<double> alpha)
        : p0_(std::move(p0)), p1_(std::move(p1)), alpha_(std::move(alpha)) {
        validate();
    }

    /// Builds a finite-n profile; alpha is set to nu / n.
    static Profile from_counts(std::vector<Dist> p0, std::vector<Dist> p1, std::vector<int> nu) {
        int n = 0;
        for (int c : nu) {
            if (c < 0) throw InvalidArgument("Profile: negative group size");
            n += c;
        }
        if (n <= 0) throw InvalidArgument("Profile: group sizes sum to zero");
        std::vector<double> alpha;
        for (int c : nu) alpha.push_back(static_cast<double>(c) / n);
        Profile p(std::move(p0), std::move(p1), std::move(alpha));
        return p.with_counts(std::move(nu));
    }

    Profile with_counts(std::vector<int> nu) const {
        if (nu.size() != groups()) throw InvalidArgument("Profile: nu has wrong length");
        int n = 0;
        for (int c : nu) {
            if (c < 0) throw InvalidArgument("Profile: negative group size");
            n += c;
        }
        Profile out = *this;
        out.nu_ = std::move(nu);
        out.n_ = n;
        return out;
    }

    /// Attaches nu = apportion(alpha, n).
    Profile at_n(int n) const { return with_counts(apportion(alpha_, n)); }

    /// Exchanges the roles of H0 and H1.
    Profile swapped() const {
        Profile out = *this;
        std::swap(out.p0_, out.p1_);
        return out;
    }

    std::size_t groups() const { return p0_.size(); }
    std::size_t alphabet_size() const { return p0_.front().size(); }
    const std::vector<Dist>& p(int theta) const { return theta == 0 ? p0_ : p1_; }
    const std::vector<Dist>& p0() const { return p0_; }
    const std::vector<Dist>& p1() const { return p1_; }
    std::span<const double> alpha() const { return alpha_; }

    bool has_counts() const { return nu_.has_value(); }
    std::span<const int> nu() const {
        if (!nu_) throw InvalidArgument("Profile: group sizes nu are required here");
        return *nu_;
    }
    int n() const {
        if (!nu_) throw InvalidArgument("Profile: group sizes nu are required here");
        return n_;
    }

private:
    void validate() const {
        if (p0_.empty()) throw InvalidArgument("Profile: need at least one group");
        if (p1_.size() != p0_.size() || alpha_.size() != p0_.size())
            throw InvalidArgument("Profile: p0, p1 and alpha must have the same length");
        const std::size_t d = p0_.front().size();
        if (d < 2) throw InvalidArgument("Profile: alphabet needs at least two symbols");
        for (std::size_t k = 0; k < p0_.size(); ++k)
            if (p0_[k].size() != d || p1_[k].size() != d)
                throw InvalidArgument("Profile: all distributions must share one alphabet");
        double s = 0.0;
        for (double a : alpha_) {
            if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("Profile: alpha must be nonnegative");
            s += a;
        }
        if (std::abs(s - 1.0) > kDistTolerance) throw InvalidArgument("Profile: alpha must sum to 1");
    }

    std::vector<Dist> p0_, p1_;
    std::vector<double> alpha_;
    std::optional<std::vector<int>> nu_;
    int n_ = 0;
};

/// sum_k w_k P_k for an arbitrary weight vector.
inline Dist mix(std::span<const Dist> ps, std::span<const double> w) {
    if (ps.size() != w.size() || ps.empty()) throw InvalidArgument("mix: size mismatch");
    std::vector<double> m(ps.front().size(), 0.0);
    for (std::size_t k = 0; k < ps.size(); ++k)
        for (std::size_t x = 0; x < m.size(); ++x) m[x] += w[k] * ps[k][x];
    return Dist::normalized(std::move(m));
}

/// M_theta(alpha) = sum_k alpha_k P_{theta;k}.
inline Dist mixture(const Profile& profile, int theta) {
    if (theta != 0 && theta != 1) throw InvalidArgument("mixture: theta must be 0 or 1");
    return mix(profile.p(theta), profile.alpha());
}

} // namespace anondet
