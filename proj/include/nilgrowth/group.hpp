#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nilgrowth/errors.hpp"
#include "nilgrowth/rational.hpp"

#include <json.hpp>

namespace nilgrowth::grp {

class GroupOracle;
using OraclePtr = std::shared_ptr<const GroupOracle>;

// A group element with a canonical payload.  Two elements of the same oracle
// are equal iff their payloads are identical.
//  - iv holds integer payloads: lattice coordinates, cyclic residues in
//    [0, q), the dihedral pair (sign, shift), or a Cayley index.
//  - rm holds the strictly-upper entries of a unitriangular matrix, row-major.
struct Elem {
    const GroupOracle* oracle = nullptr;
    std::vector<Int> iv;
    std::vector<Rat> rm;

    bool operator==(const Elem& o) const { return iv == o.iv && rm == o.rm; }
    bool operator!=(const Elem& o) const { return !(*this == o); }
};

struct ElemHash {
    std::uint64_t operator()(const Elem& e) const {
        std::uint64_t h = 0x2545f4914f6cdd1dULL;
        for (Int x : e.iv) h = hash_combine(h, static_cast<std::uint64_t>(x));
        for (const Rat& r : e.rm) h = hash_combine(h, hash_rat(r));
        return h;
    }
};

using ElemSet = std::unordered_set<Elem, ElemHash>;

enum class Backend { Lattice, Cyclic, Dihedral, Unitriangular, Cayley };

// Pluggable exact group arithmetic.  Immutable; all operations are pure.
class GroupOracle : public std::enable_shared_from_this<GroupOracle> {
  public:
    static OraclePtr lattice(int rank);
    static OraclePtr cyclic(std::vector<Int> moduli);
    static OraclePtr dihedral_inf();
    static OraclePtr unitriangular(int k);
    // Explicit multiplication table; rows/cols indexed by element id.
    // Validates the group axioms; order is capped at 512.
    static OraclePtr cayley(std::vector<std::vector<int>> table);
    static OraclePtr cayley_cyclic(int q);
    // Dihedral group of order 2*rotations: ids 0..rotations-1 are rotations,
    // rotations..2*rotations-1 are reflections.
    static OraclePtr cayley_dihedral(int rotations);

    Backend backend() const { return backend_; }
    bool is_abelian() const { return abelian_; }
    int rank() const { return rank_; }                      // lattice rank / cyclic arity
    int matrix_size() const { return rank_; }               // unitriangular k
    int order() const { return static_cast<int>(table_.size()); }  // cayley only
    const std::vector<Int>& moduli() const { return moduli_; }

    Elem identity() const;
    Elem mul(const Elem& g, const Elem& h) const;
    Elem inv(const Elem& g) const;
    // [g,h] = g^-1 h^-1 g h, so that gh = hg [g,h].
    Elem commutator(const Elem& g, const Elem& h) const;
    Elem pow(const Elem& g, Int n) const;
    bool is_identity(const Elem& g) const;

    // Constructors for elements.
    Elem from_coords(std::vector<Int> coords) const;          // lattice / cyclic / cayley index
    Elem dihedral(Int sign, Int shift) const;                 // x -> sign*x + shift
    Elem from_upper(std::vector<Rat> upper) const;            // strict upper entries, row-major
    Elem ut3(Int a, Int b, Int c) const;                      // [[1,a,b],[0,1,c],[0,0,1]]

    // Deterministic total order on payloads (for canonical coset reps,
    // sorted output, argmax tie-breaking).
    int cmp(const Elem& a, const Elem& b) const;

    std::string to_string(const Elem& g) const;

    // Canonical backend-tagged JSON encoding used by all artifact outputs.
    nlohmann::json elem_to_json(const Elem& g) const;
    Elem elem_from_json(const nlohmann::json& j) const;
    nlohmann::json to_json() const;
    static OraclePtr from_json(const nlohmann::json& j);

    // Strict upper entry (i,j), i<j, of a unitriangular payload.
    const Rat& upper(const Elem& g, int i, int j) const;
    int upper_index(int i, int j) const;

  private:
    GroupOracle() = default;
    void check(const Elem& g) const;
    void check2(const Elem& g, const Elem& h) const;

    Backend backend_ = Backend::Lattice;
    bool abelian_ = true;
    int rank_ = 0;  // lattice rank, cyclic arity, or matrix size k
    std::vector<Int> moduli_;
    std::vector<std::vector<int>> table_;  // cayley mul table
    std::vector<int> inv_table_;
    int id_index_ = 0;
};

// Sorted copy of a set under the oracle's total order (deterministic output).
std::vector<Elem> sorted_elems(const GroupOracle& o, const ElemSet& s);

}  // namespace nilgrowth::grp
