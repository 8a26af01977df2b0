#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nilgrowth/errors.hpp"
#include "nilgrowth/group.hpp"
#include "nilgrowth/liealg.hpp"
#include "nilgrowth/nilprog.hpp"
#include "nilgrowth/rational.hpp"

#include <json.hpp>

namespace nilgrowth::growth {

using grp::Elem;
using grp::ElemSet;
using grp::OraclePtr;

// Logs in this module (profiles, fits, CSV columns) are base 10.

struct GrowthSeries {
    std::vector<std::pair<Int, unsigned long long>> entries;  // (n, |A^n|), n ascending
    bool truncated = false;  // state cap hit; entries hold the computed prefix
    std::optional<unsigned long long> card_at(Int n) const;
};

// Exact |A^n| (or |(A u {1} u A^-1)^n|) for n <= n_max.  When the base set
// contains the identity the sets are nested and only the frontier is
// multiplied; otherwise plain iterated products are taken.  Hits of the state
// cap return the partial series flagged as truncated.
GrowthSeries product_set_series(const OraclePtr& oracle, const std::vector<Elem>& a, bool symmetrize,
                                int n_max, const EnumCaps& caps = {});

// The power set A^k itself (for containment checks).
ElemSet product_power_set(const OraclePtr& oracle, const std::vector<Elem>& a, int k, const EnumCaps& caps = {});

struct PolyCheck {
    bool ok = false;
    double margin = 0.0;  // (n^d |A|) / |A^n| as a double
};
PolyCheck polynomial_growth_check(const GrowthSeries& s, Int n, int d);

// max over pairs of (|A^{km}| / |A^m|)^{1/k}, k >= 2.
double stability_constant(const GrowthSeries& s);

struct GrowthPolynomial {
    // (coefficient, degree), coefficients > 0, degrees distinct ascending.
    std::vector<std::pair<Rat, int>> terms;
    double log10_eval(double m) const;  // log10 V(m), m > 0
    nlohmann::json to_json() const;
};

// V(m) = sum over r-subsets S of words of |det(alpha rows)| prod N^{w_i} m^{sum |w_i|}.
GrowthPolynomial predict_volume_polynomial(const lie::WordTable& table, const lie::AlphaMatrix& alpha,
                                           const std::vector<Rat>& lengths);

struct PiecewiseLinearProfile {
    std::vector<double> breakpoints;  // ascending, breakpoints[0] == 0
    std::vector<int> slopes;          // natural numbers, one per piece
    double value(double x) const;     // f(x); f(0) = 0; last slope extends
    nlohmann::json to_json() const;
};

// f(x) = max_i (log10 c_i + d_i x) - max_i (log10 c_i): the log-log envelope
// of V, convex with integer slopes.
PiecewiseLinearProfile tropicalize(const GrowthPolynomial& v);

struct FitResult {
    PiecewiseLinearProfile profile;
    double sup_deviation = 0.0;
};

// Best continuous nondecreasing integer-slope piecewise-linear fit to
// x_m = log10 m, y_m = log10 |A^{m n0}| - log10 |A^{n0}|, with breakpoints
// restricted to sample abscissae.  Exhaustive with pruning; deterministic
// tie-break: fewest pieces, then lexicographically smallest slope vector,
// then earliest breakpoints.
FitResult fit_profile(const GrowthSeries& s, Int base_index, int max_pieces, int max_slope);

// Exact closed-form series |mA| = prod_i min(2 b_i m + 1, q_i) for the box
// A = prod {-b_i..b_i} inside prod Z/q_i.
GrowthSeries closed_form_cyclic_box_series(const std::vector<Int>& moduli, const std::vector<Int>& bounds,
                                           int m_max);

struct SandwichReport {
    struct Row {
        Int m = 0;
        bool lower_ok = false;   // HP^m inside S^{Cmn}
        bool upper_ok = false;   // S^{Cmn} inside X HP^{C^2 m}
        std::string witness_lower, witness_upper;
    };
    std::vector<Row> rows;
    bool all_ok() const;
    nlohmann::json to_json() const;
};

// Eq. (hom) materialized exactly: S = A u {1} u A^-1.
SandwichReport check_control_sandwich(const OraclePtr& oracle, const std::vector<Elem>& a,
                                      const nilprog::CosetNilprogression& hp, const std::vector<Elem>& x,
                                      Int n, Int C, const std::vector<Int>& m_values,
                                      const EnumCaps& caps = {});

}  // namespace nilgrowth::growth
