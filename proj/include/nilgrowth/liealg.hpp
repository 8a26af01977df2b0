#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nilgrowth/group.hpp"
#include "nilgrowth/linalg.hpp"
#include "nilgrowth/rational.hpp"

#include <json.hpp>

namespace nilgrowth::lie {

// A nilpotent Lie algebra element: strictly upper triangular k x k rational
// matrix, stored row-major over the strict upper entries (as in grp::Elem).
struct NilMatrix {
    int k = 0;
    std::vector<Rat> upper;

    static NilMatrix zero(int k);
    static NilMatrix elementary(int k, int i, int j);  // E_{ij}, 0-based, i < j
    const Rat& at(int i, int j) const;
    Rat& at(int i, int j);
    bool is_zero() const;
    NilMatrix operator+(const NilMatrix& o) const;
    NilMatrix operator-() const;
    NilMatrix scaled(const Rat& s) const;
    bool operator==(const NilMatrix& o) const { return k == o.k && upper == o.upper; }

    // Matrix Lie bracket XY - YX (satisfies Jacobi exactly).
    static NilMatrix bracket(const NilMatrix& x, const NilMatrix& y);
};

// exp(X) = sum X^j / j!, a finite series for nilpotent X.
grp::Elem mat_exp(const grp::OraclePtr& oracle, const NilMatrix& x);
// log(g) = sum (-1)^(j+1) (g-I)^j / j, finite; exp(log g) = g exactly.
NilMatrix mat_log(const grp::Elem& g);

// Formal commutator word: a leaf i^(+-1) or a bracket [w1,w2]^(+-1).
class CommutatorWord {
  public:
    static CommutatorWord leaf(int gen_index, bool positive = true);  // 1-based index
    static CommutatorWord bracket(CommutatorWord w1, CommutatorWord w2, bool positive = true);

    bool is_leaf() const { return node_->leaf; }
    bool positive() const { return node_->positive; }
    int gen_index() const { return node_->gen; }
    const CommutatorWord& left() const { return *node_->l; }
    const CommutatorWord& right() const { return *node_->r; }

    int length() const;  // number of leaves
    // Bracket notation, e.g. "[[1,2^-1],[1^-1,3]]^-1".
    std::string str() const;

  private:
    struct Node {
        bool leaf = true;
        bool positive = true;
        int gen = 0;
        std::shared_ptr<const CommutatorWord> l, r;
    };
    std::shared_ptr<const Node> node_;
};

// X_w: leaves map to +-X_i, brackets to log([exp X_{w1}, exp X_{w2}]), and
// negative signs negate.
NilMatrix eval_word(const CommutatorWord& w, const std::vector<NilMatrix>& gens);

// N^w: multiplicative over brackets, sign-invariant, N^i = N_i.
Rat weight(const CommutatorWord& w, const std::vector<Rat>& lengths);

struct WordTable {
    std::vector<NilMatrix> gens;       // X_1..X_r
    std::vector<CommutatorWord> words; // nondecreasing length, generators first
    std::vector<NilMatrix> values;     // X_{w_i}
    std::vector<int> lengths;          // |w_i|
    std::vector<Rat> weights;          // N^{w_i}
    int rank() const { return static_cast<int>(gens.size()); }
    int size() const { return static_cast<int>(words.size()); }
    nlohmann::json to_json() const;
};

// Enumerates the canonical nonzero commutator words level by level.  Stored
// representatives have positive leaves and positive outermost sign; of each
// +-X pair of bracket orientations the one whose leading entry (scanned by
// superdiagonal, then row) is positive is kept.
WordTable enumerate_words(const std::vector<NilMatrix>& gens, const std::vector<Rat>& lengths);

// alpha_{i,j} with X_{w_i} = sum_j alpha_{i,j} X_j; rows 1..r are the identity.
// Errors when the generators are dependent or fail to span some X_w.
struct AlphaMatrix {
    std::vector<std::vector<Rat>> rows;  // size k x r
};
AlphaMatrix alpha_coeffs(const WordTable& table);

}  // namespace nilgrowth::lie
