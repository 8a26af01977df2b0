#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nilgrowth/errors.hpp"
#include "nilgrowth/group.hpp"
#include "nilgrowth/rational.hpp"

#include <json.hpp>

namespace nilgrowth::nilprog {

using grp::Elem;
using grp::ElemSet;
using grp::OraclePtr;

// P(v_1..v_r; N_1..N_r): all evaluations of words in v_i^{+-1} where each
// generator (counting both signs) is used at most N_i times.  The generated
// group must be nilpotent; the class is verified at construction by
// iterated-commutator vanishing up to a depth cap.
class Nilprogression {
  public:
    Nilprogression(OraclePtr oracle, std::vector<Elem> generators, std::vector<Rat> lengths,
                   int class_cap = 12);

    const OraclePtr& oracle() const { return oracle_; }
    const std::vector<Elem>& generators() const { return gens_; }
    const std::vector<Rat>& lengths() const { return lengths_; }
    int rank() const { return static_cast<int>(gens_.size()); }
    int nilpotency_class() const { return class_; }

    nlohmann::json to_json() const;
    static Nilprogression from_json(const nlohmann::json& j);

  private:
    friend class CosetNilprogression;
    Nilprogression() = default;
    OraclePtr oracle_;
    std::vector<Elem> gens_;
    std::vector<Rat> lengths_;
    int class_ = 0;
};

// HP: the pullback of a nilprogression in N(H)/H, stored as an explicit
// finite subgroup H together with a progression whose generators normalize H.
// Quotient arithmetic works on canonical coset representatives.
class CosetNilprogression {
  public:
    CosetNilprogression(OraclePtr oracle, std::vector<Elem> subgroup, std::vector<Elem> generators,
                        std::vector<Rat> lengths, int class_cap = 12);
    // Trivial H.
    static CosetNilprogression wrap(const Nilprogression& p);

    const OraclePtr& oracle() const { return oracle_; }
    const std::vector<Elem>& subgroup() const { return subgroup_; }
    const std::vector<Elem>& generators() const { return gens_; }
    const std::vector<Rat>& lengths() const { return lengths_; }
    int rank() const { return static_cast<int>(gens_.size()); }
    int nilpotency_class() const { return class_; }

    // Canonical representative of gH (minimum under the oracle order).
    Elem coset_rep(const Elem& g) const;
    bool in_subgroup(const Elem& g) const;

    nlohmann::json to_json() const;
    static CosetNilprogression from_json(const nlohmann::json& j);

  private:
    OraclePtr oracle_;
    std::vector<Elem> subgroup_;  // sorted, contains identity
    std::vector<Elem> gens_;
    std::vector<Rat> lengths_;
    int class_ = 0;
};

// The dilate P^t as an explicit element set (budgets floor(t*N_i)).
ElemSet enumerate_dilate(const Nilprogression& p, const Rat& t, const EnumCaps& caps = {});
// Full pullback H * (quotient dilate) for a coset nilprogression.
ElemSet enumerate_dilate(const CosetNilprogression& hp, const Rat& t, const EnumCaps& caps = {});
// Quotient dilate as canonical coset representatives.
ElemSet enumerate_dilate_reps(const CosetNilprogression& hp, const Rat& t, const EnumCaps& caps = {});

// ||g||: least t on the candidate grid { j/N_i } with g in (H)P^t, found by
// binary search (membership is monotone in t); +inf beyond t_max.
// Dilate sets are enumerated lazily and cached, so bulk queries are cheap.
class NormCalculator {
  public:
    NormCalculator(CosetNilprogression hp, Rat t_max, EnumCaps caps = {});

    XRat norm(const Elem& g);
    // ||g||_{HP,X} = min over permutations sigma of X of max_x ||sigma(x)^-1 g x||.
    XRat norm_x(const std::vector<Elem>& X, const Elem& g);

    const std::vector<Rat>& grid() const { return grid_; }
    const CosetNilprogression& progression() const { return hp_; }

  private:
    const ElemSet& dilate_reps(std::size_t idx);
    bool member(const Elem& rep, std::size_t idx);

    CosetNilprogression hp_;
    Rat t_max_;
    EnumCaps caps_;
    std::vector<Rat> grid_;
    std::map<std::size_t, ElemSet> cache_;
};

XRat norm_p(const Nilprogression& p, const Elem& g, const Rat& t_max, const EnumCaps& caps = {});
XRat norm_hp(const CosetNilprogression& hp, const Elem& g, const Rat& t_max, const EnumCaps& caps = {});
XRat norm_hpx(const CosetNilprogression& hp, const std::vector<Elem>& X, const Elem& g, const Rat& t_max,
              const EnumCaps& caps = {});

// C-normal form: (i) upper-triangular commutator containment, (ii) local
// properness of u_1^{n_1}..u_r^{n_r} for |n_i| <= N_i/C, (iii) volume
// comparability with prod(2*floor(N_i)+1).
struct NormalFormReport {
    Rat C;
    bool holds_i = false, holds_ii = false, holds_iii = false;
    std::vector<std::string> witnesses_i;
    std::string witness_ii;
    unsigned long long p_size = 0;
    Rat volume_lower, volume_upper;
    bool holds() const { return holds_i && holds_ii && holds_iii; }
    nlohmann::json to_json() const;
};

NormalFormReport check_normal_form(const Nilprogression& p, const Rat& C, const EnumCaps& caps = {});
NormalFormReport check_normal_form(const CosetNilprogression& hp, const Rat& C, const EnumCaps& caps = {});

}  // namespace nilgrowth::nilprog
