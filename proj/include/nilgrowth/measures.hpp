#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "nilgrowth/errors.hpp"
#include "nilgrowth/group.hpp"
#include "nilgrowth/nilprog.hpp"
#include "nilgrowth/rational.hpp"

#include <json.hpp>

namespace nilgrowth::meas {

using grp::Elem;
using grp::OraclePtr;

enum class MassMode { Rational, Double };

// Finitely supported probability measure.  Rational mode is exact and the
// default; double mode exists for quantities involving irrational weights.
class FiniteMeasure {
  public:
    static FiniteMeasure dirac(OraclePtr oracle, const Elem& g);
    // Uniform on a multiset: mass of x is (multiplicity of x) / size.
    static FiniteMeasure uniform(OraclePtr oracle, const std::vector<Elem>& support);
    static FiniteMeasure from_rational(OraclePtr oracle, std::vector<std::pair<Elem, Rat>> masses);
    static FiniteMeasure from_double(OraclePtr oracle, std::vector<std::pair<Elem, double>> masses);

    const OraclePtr& oracle() const { return oracle_; }
    MassMode mode() const { return mode_; }
    std::size_t support_size() const;

    Rat mass_rat(const Elem& g) const;      // rational mode
    double mass_double(const Elem& g) const;  // either mode

    FiniteMeasure convolve(const FiniteMeasure& nu, const EnumCaps& caps = {}) const;
    FiniteMeasure power(int n, const EnumCaps& caps = {}) const;  // repeated single convolution
    // Mixture a*this + b*other (same mode).
    FiniteMeasure mix(const Rat& a, const FiniteMeasure& other, const Rat& b) const;
    static FiniteMeasure mix_double(double a, const FiniteMeasure& mu, double b, const FiniteMeasure& nu);

    bool is_symmetric() const;  // mu(x^-1) == mu(x); exact in rational mode

    Rat l2_inv_sq_rat() const;    // (sum mu(x)^2)^-1, exact
    double l2_inv_sq() const;
    Rat linf_rat() const;
    double linf() const;
    // Argmax of the mass (smallest element under the oracle order on ties).
    Elem argmax() const;

    // Deterministic (sorted) view of the support.
    std::vector<std::pair<Elem, Rat>> sorted_rational() const;

    nlohmann::json to_json() const;
    static FiniteMeasure from_json(const OraclePtr& oracle, const nlohmann::json& j);

  private:
    FiniteMeasure() = default;
    void validate() const;
    OraclePtr oracle_;
    MassMode mode_ = MassMode::Rational;
    std::unordered_map<Elem, Rat, grp::ElemHash> rmass_;
    std::unordered_map<Elem, double, grp::ElemHash> dmass_;
};

struct MeasureSeriesRow {
    int n = 0;
    Rat l2_inv_sq;
    Rat linf;
};

struct MeasureSeries {
    std::vector<MeasureSeriesRow> rows;
    bool truncated = false;
    // l1 mass dropped when a truncation threshold is enabled (0 when off).
    double l1_truncation_error = 0.0;
};

// Series of ||mu^{*n}||_{l2}^{-2} and ||mu^{*n}||_{linf} for n <= n_max.
// The l2 column is asserted nondecreasing (Young).  Rational mode only.
MeasureSeries convolution_growth_series(const FiniteMeasure& mu, int n_max, const EnumCaps& caps = {},
                                        const Rat& truncate_below = Rat(0));

struct DonkResult {
    Rat lhs;      // sup_x mu_1 * ... * mu_n({x})
    Rat mid;      // mu^{*n}({1}),  mu = 1/2 delta + (1/2n) sum mu_j * mu_j
    double rhs;   // tilde mu_1 * ... * tilde mu_n({1}), double precision
    bool chain_ok = false;  // lhs <= mid and mid <= rhs + 1e-12
    nlohmann::json to_json() const;
};

// Prop. donk inequality chain; inputs must be symmetric rational measures on
// an abelian oracle.
DonkResult donk_bounds(const std::vector<FiniteMeasure>& mus, const EnumCaps& caps = {});

struct StochasticGauge {
    int d = 0;
    std::vector<double> t;       // mean-zero solution of the drift equation
    double residual = 0.0;       // max row residual
    double condition = 0.0;      // reciprocal condition estimate of the solve
    bool defective = false;      // near-reducible chain
    nlohmann::json to_json() const;
};

// Solves sum_j a_ij p_ij = t_i - sum_j p_ij t_j for t (mean zero), where p is
// symmetric stochastic and a antisymmetric.  Rank-deficient solve on the
// complement of the constant vector.
StochasticGauge solve_drift_gauge(const std::vector<std::vector<double>>& p,
                                  const std::vector<std::vector<double>>& a);

struct DirectCheckReport {
    bool integral_finite = true;
    Rat integral;                 // sum_g mu(g) ||g||_{HP,X}^2
    Rat measured_m;               // n * integral
    Rat l2_inv_sq;                // ||mu^{*n}||^{-2}
    unsigned long long hp_size = 0;
    double ratio = 0.0;           // l2_inv_sq / |HP|
    nlohmann::json to_json() const;
};

// Theorem `forward` desk check: exact hypothesis integral and conclusion ratio.
DirectCheckReport direct_theorem_check(const FiniteMeasure& mu, const nilprog::CosetNilprogression& hp,
                                       const std::vector<Elem>& x, int n, const EnumCaps& caps = {});

}  // namespace nilgrowth::meas
