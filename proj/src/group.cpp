#include "nilgrowth/group.hpp"

#include <algorithm>
#include <sstream>

namespace nilgrowth::grp {

using nlohmann::json;

namespace {

Int add_checked(Int a, Int b) {
    Int r;
    if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("lattice coordinate overflow");
    return r;
}

Int mod_reduce(Int x, Int q) {
    Int r = x % q;
    return r < 0 ? r + q : r;
}

}  // namespace

OraclePtr GroupOracle::lattice(int rank) {
    if (rank < 0) throw std::invalid_argument("lattice: negative rank");
    auto o = std::shared_ptr<GroupOracle>(new GroupOracle());
    o->backend_ = Backend::Lattice;
    o->abelian_ = true;
    o->rank_ = rank;
    return o;
}

OraclePtr GroupOracle::cyclic(std::vector<Int> moduli) {
    for (Int q : moduli)
        if (q <= 0) throw std::invalid_argument("cyclic: moduli must be positive");
    auto o = std::shared_ptr<GroupOracle>(new GroupOracle());
    o->backend_ = Backend::Cyclic;
    o->abelian_ = true;
    o->rank_ = static_cast<int>(moduli.size());
    o->moduli_ = std::move(moduli);
    return o;
}

OraclePtr GroupOracle::dihedral_inf() {
    auto o = std::shared_ptr<GroupOracle>(new GroupOracle());
    o->backend_ = Backend::Dihedral;
    o->abelian_ = false;
    o->rank_ = 2;
    return o;
}

OraclePtr GroupOracle::unitriangular(int k) {
    if (k < 1 || k > 16) throw std::invalid_argument("unitriangular: size out of range");
    auto o = std::shared_ptr<GroupOracle>(new GroupOracle());
    o->backend_ = Backend::Unitriangular;
    o->abelian_ = (k <= 2);
    o->rank_ = k;
    return o;
}

OraclePtr GroupOracle::cayley(std::vector<std::vector<int>> table) {
    const int n = static_cast<int>(table.size());
    if (n == 0 || n > 512) throw std::invalid_argument("cayley: order must be in 1..512");
    for (const auto& row : table) {
        if (static_cast<int>(row.size()) != n) throw std::invalid_argument("cayley: table not square");
        for (int v : row)
            if (v < 0 || v >= n) throw std::invalid_argument("cayley: entry out of range");
    }
    // Identity.
    int id = -1;
    for (int e = 0; e < n; ++e) {
        bool ok = true;
        for (int x = 0; x < n && ok; ++x) ok = table[e][x] == x && table[x][e] == x;
        if (ok) { id = e; break; }
    }
    if (id < 0) throw std::invalid_argument("cayley: no identity element");
    // Inverses.
    std::vector<int> inv(n, -1);
    for (int x = 0; x < n; ++x) {
        for (int y = 0; y < n; ++y)
            if (table[x][y] == id && table[y][x] == id) { inv[x] = y; break; }
        if (inv[x] < 0) throw std::invalid_argument("cayley: missing inverse");
    }
    // Associativity, full check (<= 512^3 lookups, one-time).
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                if (table[table[a][b]][c] != table[a][table[b][c]])
                    throw std::invalid_argument("cayley: table not associative");
    bool ab = true;
    for (int a = 0; a < n && ab; ++a)
        for (int b = 0; b < n && ab; ++b) ab = table[a][b] == table[b][a];

    auto o = std::shared_ptr<GroupOracle>(new GroupOracle());
    o->backend_ = Backend::Cayley;
    o->abelian_ = ab;
    o->rank_ = 1;
    o->table_ = std::move(table);
    o->inv_table_ = std::move(inv);
    o->id_index_ = id;
    return o;
}

OraclePtr GroupOracle::cayley_cyclic(int q) {
    std::vector<std::vector<int>> t(q, std::vector<int>(q));
    for (int a = 0; a < q; ++a)
        for (int b = 0; b < q; ++b) t[a][b] = (a + b) % q;
    return cayley(std::move(t));
}

OraclePtr GroupOracle::cayley_dihedral(int m) {
    // id < m: rotation by id; id >= m: reflection s*r^(id-m), with s r s = r^-1.
    const int n = 2 * m;
    auto mulid = [m](int x, int y) {
        const bool xr = x >= m, yr = y >= m;
        const int a = xr ? x - m : x, b = yr ? y - m : y;
        if (!xr && !yr) return (a + b) % m;
        if (!xr && yr) return m + (((b - a) % m + m) % m);
        if (xr && !yr) return m + ((a + b) % m);
        return ((b - a) % m + m) % m;
    };
    std::vector<std::vector<int>> t(n, std::vector<int>(n));
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) t[x][y] = mulid(x, y);
    return cayley(std::move(t));
}

void GroupOracle::check(const Elem& g) const {
    if (g.oracle != this) throw BackendMismatchError("element from a different oracle");
}

void GroupOracle::check2(const Elem& g, const Elem& h) const {
    check(g);
    check(h);
}

int GroupOracle::upper_index(int i, int j) const {
    // Row-major over strict upper entries of a k x k matrix.
    const int k = rank_;
    return i * (2 * k - i - 1) / 2 + (j - i - 1);
}

const Rat& GroupOracle::upper(const Elem& g, int i, int j) const {
    return g.rm[static_cast<std::size_t>(upper_index(i, j))];
}

Elem GroupOracle::identity() const {
    Elem e;
    e.oracle = this;
    switch (backend_) {
        case Backend::Lattice: e.iv.assign(rank_, 0); break;
        case Backend::Cyclic: e.iv.assign(rank_, 0); break;
        case Backend::Dihedral: e.iv = {1, 0}; break;
        case Backend::Unitriangular: e.rm.assign(static_cast<std::size_t>(rank_ * (rank_ - 1) / 2), Rat(0)); break;
        case Backend::Cayley: e.iv = {id_index_}; break;
    }
    return e;
}

Elem GroupOracle::mul(const Elem& g, const Elem& h) const {
    check2(g, h);
    Elem r;
    r.oracle = this;
    switch (backend_) {
        case Backend::Lattice: {
            r.iv.resize(g.iv.size());
            for (std::size_t i = 0; i < g.iv.size(); ++i) r.iv[i] = add_checked(g.iv[i], h.iv[i]);
            break;
        }
        case Backend::Cyclic: {
            r.iv.resize(g.iv.size());
            for (std::size_t i = 0; i < g.iv.size(); ++i) r.iv[i] = mod_reduce(g.iv[i] + h.iv[i], moduli_[i]);
            break;
        }
        case Backend::Dihedral: {
            // Maps x -> ax+b composed as (g.h)(x) = g(h(x)).
            const Int a1 = g.iv[0], b1 = g.iv[1], a2 = h.iv[0], b2 = h.iv[1];
            r.iv = {a1 * a2, add_checked(a1 * b2, b1)};
            break;
        }
        case Backend::Unitriangular: {
            const int k = rank_;
            r.rm.resize(g.rm.size());
            for (int i = 0; i < k; ++i)
                for (int j = i + 1; j < k; ++j) {
                    Rat s = upper(g, i, j) + upper(h, i, j);
                    for (int l = i + 1; l < j; ++l) s += upper(g, i, l) * upper(h, l, j);
                    r.rm[static_cast<std::size_t>(upper_index(i, j))] = s;
                }
            break;
        }
        case Backend::Cayley: {
            r.iv = {static_cast<Int>(table_[static_cast<std::size_t>(g.iv[0])][static_cast<std::size_t>(h.iv[0])])};
            break;
        }
    }
    return r;
}

Elem GroupOracle::inv(const Elem& g) const {
    check(g);
    Elem r;
    r.oracle = this;
    switch (backend_) {
        case Backend::Lattice: {
            r.iv.resize(g.iv.size());
            for (std::size_t i = 0; i < g.iv.size(); ++i) r.iv[i] = -g.iv[i];
            break;
        }
        case Backend::Cyclic: {
            r.iv.resize(g.iv.size());
            for (std::size_t i = 0; i < g.iv.size(); ++i) r.iv[i] = mod_reduce(-g.iv[i], moduli_[i]);
            break;
        }
        case Backend::Dihedral: {
            // (a,b)^-1 = (a, -ab): reflections are involutions.
            r.iv = {g.iv[0], -g.iv[0] * g.iv[1]};
            break;
        }
        case Backend::Unitriangular: {
            // (I+U)^-1 = I - U + U^2 - ... with U strictly upper (finite).
            const int k = rank_;
            std::vector<Rat> acc(g.rm.size(), Rat(0));   // result strict upper part
            std::vector<Rat> pw = g.rm;                  // U^p, p = 1
            int sign = -1;
            for (int p = 1; p < k; ++p) {
                for (std::size_t t = 0; t < acc.size(); ++t)
                    acc[t] += sign > 0 ? pw[t] : -pw[t];
                if (p + 1 < k) {
                    // pw <- pw * U
                    std::vector<Rat> nx(g.rm.size(), Rat(0));
                    for (int i = 0; i < k; ++i)
                        for (int j = i + 1; j < k; ++j) {
                            Rat s(0);
                            for (int l = i + 1; l < j; ++l)
                                s += pw[static_cast<std::size_t>(upper_index(i, l))] * g.rm[static_cast<std::size_t>(upper_index(l, j))];
                            nx[static_cast<std::size_t>(upper_index(i, j))] = s;
                        }
                    pw = std::move(nx);
                }
                sign = -sign;
            }
            r.rm = std::move(acc);
            break;
        }
        case Backend::Cayley: {
            r.iv = {static_cast<Int>(inv_table_[static_cast<std::size_t>(g.iv[0])])};
            break;
        }
    }
    return r;
}

Elem GroupOracle::commutator(const Elem& g, const Elem& h) const {
    return mul(mul(inv(g), inv(h)), mul(g, h));
}

Elem GroupOracle::pow(const Elem& g, Int n) const {
    check(g);
    Elem base = n < 0 ? inv(g) : g;
    std::uint64_t e = static_cast<std::uint64_t>(n < 0 ? -n : n);
    Elem acc = identity();
    while (e > 0) {
        if (e & 1) acc = mul(acc, base);
        base = mul(base, base);
        e >>= 1;
    }
    return acc;
}

bool GroupOracle::is_identity(const Elem& g) const {
    check(g);
    return g == identity();
}

Elem GroupOracle::from_coords(std::vector<Int> coords) const {
    Elem e;
    e.oracle = this;
    switch (backend_) {
        case Backend::Lattice:
            if (static_cast<int>(coords.size()) != rank_) throw std::invalid_argument("from_coords: arity mismatch");
            e.iv = std::move(coords);
            break;
        case Backend::Cyclic:
            if (static_cast<int>(coords.size()) != rank_) throw std::invalid_argument("from_coords: arity mismatch");
            e.iv.resize(coords.size());
            for (std::size_t i = 0; i < coords.size(); ++i) e.iv[i] = mod_reduce(coords[i], moduli_[i]);
            break;
        case Backend::Cayley:
            if (coords.size() != 1 || coords[0] < 0 || coords[0] >= static_cast<Int>(table_.size()))
                throw std::invalid_argument("from_coords: bad cayley index");
            e.iv = std::move(coords);
            break;
        default:
            throw std::invalid_argument("from_coords: wrong backend");
    }
    return e;
}

Elem GroupOracle::dihedral(Int sign, Int shift) const {
    if (backend_ != Backend::Dihedral) throw std::invalid_argument("dihedral: wrong backend");
    if (sign != 1 && sign != -1) throw std::invalid_argument("dihedral: sign must be +-1");
    Elem e;
    e.oracle = this;
    e.iv = {sign, shift};
    return e;
}

Elem GroupOracle::from_upper(std::vector<Rat> upper_entries) const {
    if (backend_ != Backend::Unitriangular) throw std::invalid_argument("from_upper: wrong backend");
    if (static_cast<int>(upper_entries.size()) != rank_ * (rank_ - 1) / 2)
        throw std::invalid_argument("from_upper: wrong entry count");
    Elem e;
    e.oracle = this;
    e.rm = std::move(upper_entries);
    for (Rat& r : e.rm) r.canonicalize();
    return e;
}

Elem GroupOracle::ut3(Int a, Int b, Int c) const {
    if (backend_ != Backend::Unitriangular || rank_ != 3) throw std::invalid_argument("ut3: wrong backend");
    return from_upper({make_rat(a), make_rat(b), make_rat(c)});
}

int GroupOracle::cmp(const Elem& a, const Elem& b) const {
    check2(a, b);
    if (a.iv != b.iv) return a.iv < b.iv ? -1 : 1;
    for (std::size_t i = 0; i < a.rm.size(); ++i) {
        const int c = mpq_cmp(a.rm[i].get_mpq_t(), b.rm[i].get_mpq_t());
        if (c != 0) return c < 0 ? -1 : 1;
    }
    return 0;
}

std::string GroupOracle::to_string(const Elem& g) const {
    std::ostringstream os;
    switch (backend_) {
        case Backend::Lattice:
        case Backend::Cyclic: {
            os << "(";
            for (std::size_t i = 0; i < g.iv.size(); ++i) os << (i ? "," : "") << g.iv[i];
            os << ")";
            break;
        }
        case Backend::Dihedral:
            os << "(a=" << g.iv[0] << ",b=" << g.iv[1] << ")";
            break;
        case Backend::Unitriangular: {
            os << "ut[";
            for (std::size_t i = 0; i < g.rm.size(); ++i) os << (i ? "," : "") << rat_to_string(g.rm[i]);
            os << "]";
            break;
        }
        case Backend::Cayley:
            os << "#" << g.iv[0];
            break;
    }
    return os.str();
}

json GroupOracle::elem_to_json(const Elem& g) const {
    json j;
    switch (backend_) {
        case Backend::Lattice:
            j["backend"] = "lattice";
            j["coords"] = g.iv;
            break;
        case Backend::Cyclic:
            j["backend"] = "cyclic";
            j["residues"] = g.iv;
            break;
        case Backend::Dihedral:
            j["backend"] = "dihedral";
            j["sign"] = g.iv[0];
            j["shift"] = g.iv[1];
            break;
        case Backend::Unitriangular: {
            j["backend"] = "unitriangular";
            j["k"] = rank_;
            std::vector<std::string> entries;
            entries.reserve(g.rm.size());
            for (const Rat& r : g.rm) entries.push_back(rat_to_string(r));
            j["upper"] = entries;
            break;
        }
        case Backend::Cayley:
            j["backend"] = "cayley";
            j["index"] = g.iv[0];
            break;
    }
    return j;
}

Elem GroupOracle::elem_from_json(const json& j) const {
    const std::string b = j.at("backend").get<std::string>();
    switch (backend_) {
        case Backend::Lattice:
            if (b != "lattice") break;
            return from_coords(j.at("coords").get<std::vector<Int>>());
        case Backend::Cyclic:
            if (b != "cyclic") break;
            return from_coords(j.at("residues").get<std::vector<Int>>());
        case Backend::Dihedral:
            if (b != "dihedral") break;
            return dihedral(j.at("sign").get<Int>(), j.at("shift").get<Int>());
        case Backend::Unitriangular: {
            if (b != "unitriangular" || j.at("k").get<int>() != rank_) break;
            std::vector<Rat> entries;
            for (const auto& s : j.at("upper")) entries.push_back(rat_from_string(s.get<std::string>()));
            return from_upper(std::move(entries));
        }
        case Backend::Cayley:
            if (b != "cayley") break;
            return from_coords({j.at("index").get<Int>()});
    }
    throw BackendMismatchError("element JSON tagged '" + b + "' does not match oracle backend");
}

json GroupOracle::to_json() const {
    json j;
    switch (backend_) {
        case Backend::Lattice:
            j["kind"] = "lattice";
            j["rank"] = rank_;
            break;
        case Backend::Cyclic:
            j["kind"] = "cyclic";
            j["moduli"] = moduli_;
            break;
        case Backend::Dihedral:
            j["kind"] = "dihedral_inf";
            break;
        case Backend::Unitriangular:
            j["kind"] = "unitriangular";
            j["k"] = rank_;
            break;
        case Backend::Cayley:
            j["kind"] = "cayley_table";
            j["table"] = table_;
            break;
    }
    return j;
}

OraclePtr GroupOracle::from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "lattice") return lattice(j.at("rank").get<int>());
    if (kind == "cyclic") return cyclic(j.at("moduli").get<std::vector<Int>>());
    if (kind == "dihedral_inf") return dihedral_inf();
    if (kind == "unitriangular") return unitriangular(j.at("k").get<int>());
    if (kind == "cayley_table") return cayley(j.at("table").get<std::vector<std::vector<int>>>());
    if (kind == "cayley_cyclic") return cayley_cyclic(j.at("q").get<int>());
    if (kind == "cayley_dihedral") return cayley_dihedral(j.at("rotations").get<int>());
    throw ParseError("unknown group kind '" + kind + "'");
}

std::vector<Elem> sorted_elems(const GroupOracle& o, const ElemSet& s) {
    std::vector<Elem> v(s.begin(), s.end());
    std::sort(v.begin(), v.end(), [&o](const Elem& a, const Elem& b) { return o.cmp(a, b) < 0; });
    return v;
}

}  // namespace nilgrowth::grp
