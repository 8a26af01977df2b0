#pragma once

#include <optional>
#include <vector>

#include "nilgrowth/errors.hpp"
#include "nilgrowth/group.hpp"
#include "nilgrowth/measures.hpp"
#include "nilgrowth/rational.hpp"

#include <json.hpp>

namespace nilgrowth::lo {

using grp::Elem;
using grp::OraclePtr;

// Elements v_1..v_n (abelian case) or A_1..A_n (general), with multiplicity.
struct LOInstance {
    OraclePtr oracle;
    std::vector<Elem> elems;
};

struct Concentration {
    Rat rho;
    Elem witness;  // an argmax point (smallest under the oracle order)
};

// rho = sup_x P(xi_1 v_1 ... xi_n v_n = x) for independent Bernoulli signs;
// exact integer-numerator dynamic programming over 2^n sign patterns.
// Abelian oracles only.
Concentration bernoulli_concentration(const LOInstance& inst, const EnumCaps& caps = {});

// ||mu^{*steps}||_linf for mu uniform on the multiset {A_i, A_i^-1}; exact.
Rat symmetrized_walk_concentration(const LOInstance& inst, int steps, const EnumCaps& caps = {});

struct SubgroupReport {
    bool found = false;
    std::vector<Elem> subgroup;  // sorted; closed under mul/inv
    unsigned long long order = 0;
    double fraction = 0.0;  // fraction of the A_i (with multiplicity) inside
    nlohmann::json to_json(const grp::GroupOracle& o) const;
};

// Searches closures of candidate generating subsets (all subsets of the
// distinct A_i of size <= 3, plus the full set) for the smallest subgroup of
// order <= order_cap containing at least fraction_target of the A_i.
// Finite Cayley backends only; absence is a valid report.
SubgroupReport find_small_subgroup(const LOInstance& inst, unsigned long long order_cap,
                                   double fraction_target);

struct MamReport {
    int n = 0;
    Rat eps;
    Rat sup_prob;          // sup_B P(A'_1 ... A'_n = B), exact
    bool hypothesis = false;  // sup_prob > 1/(eps sqrt(n)), decided exactly
    SubgroupReport subgroup;
    double order_over_eps_sqrt_n = 0.0;
    double outlier_over_eps_sq = 0.0;
    nlohmann::json to_json(const grp::GroupOracle& o) const;
};

// Theorem `mam` experiment: evaluates the concentration hypothesis exactly
// (via sup^2 eps^2 n > 1) and reports the measured structural constants.
// Requires n >= 2.
MamReport mam_experiment(const LOInstance& inst, const Rat& eps, unsigned long long order_cap,
                         double fraction_target, const EnumCaps& caps = {});

// Bass-Guivarc'h degree D = sum_j j (dim L_j - dim L_{j+1}) of the rational
// Lie algebra generated by the logs of unitriangular generators, via exact
// rank computation of the lower central series.
long bass_guivarch_degree(const OraclePtr& oracle, const std::vector<Elem>& generators);

struct Mam2Report {
    int n = 0;
    int d = 0;
    double eps = 0.0;
    Rat linf;             // ||mu^{*n}||_linf, exact
    double threshold = 0.0;  // n^{-(d+1-eps)/2}
    bool hypothesis = false;
    std::optional<long> bass_degree;  // matrix backends
    bool consistent = true;           // hypothesis implies degree <= d
    nlohmann::json to_json() const;
};

// Theorem `mam-2` experiment; mu must be symmetric.
Mam2Report mam2_experiment(const meas::FiniteMeasure& mu, int d, double eps, int n,
                           const EnumCaps& caps = {});

}  // namespace nilgrowth::lo
