#include "nilgrowth/liealg.hpp"

#include <sstream>

namespace nilgrowth::lie {

using grp::Elem;
using grp::GroupOracle;
using grp::OraclePtr;

namespace {

int upper_count(int k) { return k * (k - 1) / 2; }

int upper_index(int k, int i, int j) { return i * (2 * k - i - 1) / 2 + (j - i - 1); }

// Strict-upper matrix product of strict-upper a, b.
std::vector<Rat> umul(int k, const std::vector<Rat>& a, const std::vector<Rat>& b) {
    std::vector<Rat> r(static_cast<std::size_t>(upper_count(k)), Rat(0));
    for (int i = 0; i < k; ++i)
        for (int j = i + 2; j < k; ++j) {
            Rat s(0);
            for (int l = i + 1; l < j; ++l)
                s += a[static_cast<std::size_t>(upper_index(k, i, l))] * b[static_cast<std::size_t>(upper_index(k, l, j))];
            r[static_cast<std::size_t>(upper_index(k, i, j))] = s;
        }
    return r;
}

}  // namespace

NilMatrix NilMatrix::zero(int k) {
    NilMatrix m;
    m.k = k;
    m.upper.assign(static_cast<std::size_t>(upper_count(k)), Rat(0));
    return m;
}

NilMatrix NilMatrix::elementary(int k, int i, int j) {
    NilMatrix m = zero(k);
    m.at(i, j) = 1;
    return m;
}

const Rat& NilMatrix::at(int i, int j) const { return upper[static_cast<std::size_t>(upper_index(k, i, j))]; }
Rat& NilMatrix::at(int i, int j) { return upper[static_cast<std::size_t>(upper_index(k, i, j))]; }

bool NilMatrix::is_zero() const {
    for (const Rat& r : upper)
        if (r != 0) return false;
    return true;
}

NilMatrix NilMatrix::operator+(const NilMatrix& o) const {
    NilMatrix m = *this;
    for (std::size_t t = 0; t < upper.size(); ++t) m.upper[t] += o.upper[t];
    return m;
}

NilMatrix NilMatrix::operator-() const {
    NilMatrix m = *this;
    for (Rat& r : m.upper) r = -r;
    return m;
}

NilMatrix NilMatrix::scaled(const Rat& s) const {
    NilMatrix m = *this;
    for (Rat& r : m.upper) r *= s;
    return m;
}

NilMatrix NilMatrix::bracket(const NilMatrix& x, const NilMatrix& y) {
    NilMatrix m;
    m.k = x.k;
    m.upper = umul(x.k, x.upper, y.upper);
    const std::vector<Rat> yx = umul(x.k, y.upper, x.upper);
    for (std::size_t t = 0; t < m.upper.size(); ++t) m.upper[t] -= yx[t];
    return m;
}

grp::Elem mat_exp(const OraclePtr& oracle, const NilMatrix& x) {
    const int k = x.k;
    if (oracle->backend() != grp::Backend::Unitriangular || oracle->matrix_size() != k)
        throw BackendMismatchError("mat_exp: oracle is not unitriangular of matching size");
    std::vector<Rat> acc(static_cast<std::size_t>(upper_count(k)), Rat(0));
    std::vector<Rat> pw = x.upper;  // X^p
    Rat fact(1);
    for (int p = 1; p < k; ++p) {
        fact *= p;
        const Rat c = 1 / fact;
        for (std::size_t t = 0; t < acc.size(); ++t) acc[t] += pw[t] * c;
        if (p + 1 < k) pw = umul(k, pw, x.upper);
    }
    return oracle->from_upper(std::move(acc));
}

NilMatrix mat_log(const Elem& g) {
    const GroupOracle* o = g.oracle;
    if (o == nullptr || o->backend() != grp::Backend::Unitriangular)
        throw BackendMismatchError("mat_log: element is not unitriangular");
    const int k = o->matrix_size();
    NilMatrix m = NilMatrix::zero(k);
    std::vector<Rat> pw = g.rm;  // (g - I)^p
    for (int p = 1; p < k; ++p) {
        const Rat c = make_rat(p % 2 == 1 ? 1 : -1, p);
        for (std::size_t t = 0; t < m.upper.size(); ++t) m.upper[t] += pw[t] * c;
        if (p + 1 < k) pw = umul(k, pw, g.rm);
    }
    return m;
}

CommutatorWord CommutatorWord::leaf(int gen_index, bool positive) {
    CommutatorWord w;
    auto n = std::make_shared<Node>();
    n->leaf = true;
    n->positive = positive;
    n->gen = gen_index;
    w.node_ = std::move(n);
    return w;
}

CommutatorWord CommutatorWord::bracket(CommutatorWord w1, CommutatorWord w2, bool positive) {
    CommutatorWord w;
    auto n = std::make_shared<Node>();
    n->leaf = false;
    n->positive = positive;
    n->l = std::make_shared<const CommutatorWord>(std::move(w1));
    n->r = std::make_shared<const CommutatorWord>(std::move(w2));
    w.node_ = std::move(n);
    return w;
}

int CommutatorWord::length() const {
    if (is_leaf()) return 1;
    return left().length() + right().length();
}

std::string CommutatorWord::str() const {
    std::ostringstream os;
    if (is_leaf()) {
        os << gen_index();
    } else {
        os << "[" << left().str() << "," << right().str() << "]";
    }
    if (!positive()) os << "^-1";
    return os.str();
}

NilMatrix eval_word(const CommutatorWord& w, const std::vector<NilMatrix>& gens) {
    if (w.is_leaf()) {
        const int i = w.gen_index();
        if (i < 1 || i > static_cast<int>(gens.size())) throw std::invalid_argument("eval_word: generator index out of range");
        const NilMatrix& x = gens[static_cast<std::size_t>(i - 1)];
        return w.positive() ? x : -x;
    }
    const NilMatrix x1 = eval_word(w.left(), gens);
    const NilMatrix x2 = eval_word(w.right(), gens);
    const OraclePtr oracle = GroupOracle::unitriangular(x1.k);
    const Elem c = oracle->commutator(mat_exp(oracle, x1), mat_exp(oracle, x2));
    NilMatrix r = mat_log(c);
    return w.positive() ? r : -r;
}

Rat weight(const CommutatorWord& w, const std::vector<Rat>& lengths) {
    if (w.is_leaf()) {
        const int i = w.gen_index();
        if (i < 1 || i > static_cast<int>(lengths.size())) throw std::invalid_argument("weight: generator index out of range");
        return lengths[static_cast<std::size_t>(i - 1)];
    }
    return weight(w.left(), lengths) * weight(w.right(), lengths);
}

namespace {

// Sign of the first nonzero entry scanned by superdiagonal then row; the
// leading superdiagonal components of the two bracket orientations are exact
// negatives, so requiring a positive leading entry keeps one of each pair.
int leading_sign(const NilMatrix& x) {
    for (int d = 1; d < x.k; ++d)
        for (int i = 0; i + d < x.k; ++i) {
            const int s = sgn(x.at(i, i + d));
            if (s != 0) return s;
        }
    return 0;
}

}  // namespace

WordTable enumerate_words(const std::vector<NilMatrix>& gens, const std::vector<Rat>& lengths) {
    if (gens.empty()) throw std::invalid_argument("enumerate_words: no generators");
    if (gens.size() != lengths.size()) throw std::invalid_argument("enumerate_words: lengths arity mismatch");
    const int k = gens[0].k;
    WordTable t;
    t.gens = gens;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (gens[i].k != k) throw std::invalid_argument("enumerate_words: mixed matrix sizes");
        if (gens[i].is_zero()) throw std::invalid_argument("enumerate_words: zero generator");
        t.words.push_back(CommutatorWord::leaf(static_cast<int>(i) + 1));
        t.values.push_back(gens[i]);
        t.lengths.push_back(1);
        t.weights.push_back(lengths[i]);
    }
    // Words of length >= k evaluate to zero (k x k strict upper nilpotency).
    for (int len = 2; len <= k - 1; ++len) {
        const int sz = t.size();
        for (int a = 0; a < sz; ++a) {
            for (int b = 0; b < sz; ++b) {
                if (a == b || t.lengths[static_cast<std::size_t>(a)] + t.lengths[static_cast<std::size_t>(b)] != len) continue;
                CommutatorWord w = CommutatorWord::bracket(t.words[static_cast<std::size_t>(a)], t.words[static_cast<std::size_t>(b)]);
                const NilMatrix x = eval_word(w, gens);
                if (x.is_zero() || leading_sign(x) < 0) continue;
                t.words.push_back(std::move(w));
                t.values.push_back(x);
                t.lengths.push_back(len);
                t.weights.push_back(t.weights[static_cast<std::size_t>(a)] * t.weights[static_cast<std::size_t>(b)]);
            }
        }
    }
    return t;
}

AlphaMatrix alpha_coeffs(const WordTable& table) {
    const int r = table.rank();
    // Columns of the solve are the generator matrices.
    linalg::RatMat gen_rows;
    for (int j = 0; j < r; ++j) gen_rows.push_back(table.gens[static_cast<std::size_t>(j)].upper);
    if (auto dep = linalg::row_dependency(gen_rows)) {
        std::ostringstream os;
        for (std::size_t i = 0; i < dep->size(); ++i) os << (i ? "," : "") << rat_to_string((*dep)[i]);
        throw DependentGeneratorsError("alpha_coeffs: generators X_1..X_r are linearly dependent", os.str());
    }
    const std::size_t dim = table.gens[0].upper.size();
    linalg::RatMat a(dim, linalg::RatVec(static_cast<std::size_t>(r), Rat(0)));
    for (int j = 0; j < r; ++j)
        for (std::size_t d = 0; d < dim; ++d) a[d][static_cast<std::size_t>(j)] = table.gens[static_cast<std::size_t>(j)].upper[d];

    AlphaMatrix alpha;
    for (int i = 0; i < table.size(); ++i) {
        const auto sol = linalg::solve(a, table.values[static_cast<std::size_t>(i)].upper);
        if (!sol)
            throw DependentGeneratorsError(
                "alpha_coeffs: X_w outside the rational span of the generators",
                table.words[static_cast<std::size_t>(i)].str());
        alpha.rows.push_back(*sol);
    }
    return alpha;
}

nlohmann::json WordTable::to_json() const {
    nlohmann::json j;
    j["rank"] = rank();
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < size(); ++i) {
        nlohmann::json w;
        w["word"] = words[static_cast<std::size_t>(i)].str();
        w["length"] = lengths[static_cast<std::size_t>(i)];
        w["weight"] = rat_to_string(weights[static_cast<std::size_t>(i)]);
        std::vector<std::string> entries;
        for (const Rat& r : values[static_cast<std::size_t>(i)].upper) entries.push_back(rat_to_string(r));
        w["X"] = entries;
        arr.push_back(std::move(w));
    }
    j["words"] = std::move(arr);
    return j;
}

}  // namespace nilgrowth::lie
