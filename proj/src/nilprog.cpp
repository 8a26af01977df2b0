#include "nilgrowth/nilprog.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>

namespace nilgrowth::nilprog {

using grp::GroupOracle;
using nlohmann::json;

namespace {

// Iterated left-normed commutator vanishing: the group generated by `gens`
// (or its image mod H, via `canon`) is nilpotent of class <= c iff all
// weight-(c+1) commutators [g_1,..,g_{c+1}] are trivial.
template <class Canon>
int verify_nilpotent(const GroupOracle& o, const std::vector<Elem>& gens, Canon canon, int class_cap) {
    const Elem one = canon(o.identity());
    ElemSet level;
    for (const Elem& g : gens) {
        const Elem c = canon(g);
        if (c != one) level.insert(c);
    }
    if (level.empty()) return 0;
    for (int depth = 1; depth <= class_cap; ++depth) {
        ElemSet next;
        for (const Elem& g : level)
            for (const Elem& v : gens) {
                const Elem c = canon(o.commutator(g, v));
                if (c != one) next.insert(c);
            }
        if (next.empty()) return depth;
        if (next.size() > 200000)
            throw NotNilpotentError("generated group shows unbounded commutator growth");
        level = std::move(next);
    }
    throw NotNilpotentError("iterated commutators do not vanish within the class cap");
}

using UVec = std::vector<std::uint32_t>;

bool dominates(const UVec& a, const UVec& b) {  // a <= b componentwise
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i]) return false;
    return true;
}

// Budgeted word BFS.  State = (element, per-generator usage vector); per
// element only the Pareto-minimal usage vectors are kept, since any word
// reachable from a dominated state is reachable from the dominating one.
template <class Canon>
ElemSet budget_enumerate(const GroupOracle& o, const std::vector<Elem>& gens, const std::vector<Int>& budgets,
                         Canon canon, const EnumCaps& caps) {
    const std::size_t r = gens.size();
    std::vector<Elem> inv_gens;
    inv_gens.reserve(r);
    for (const Elem& g : gens) inv_gens.push_back(o.inv(g));

    std::unordered_map<Elem, std::vector<UVec>, grp::ElemHash> antichain;
    std::deque<std::pair<Elem, UVec>> queue;
    std::uint64_t states = 0;

    auto try_push = [&](const Elem& e, const UVec& u) {
        auto& chain = antichain[e];
        for (const UVec& v : chain)
            if (dominates(v, u)) return;
        chain.erase(std::remove_if(chain.begin(), chain.end(), [&](const UVec& v) { return dominates(u, v); }),
                    chain.end());
        chain.push_back(u);
        queue.emplace_back(e, u);
        if (++states > caps.max_states)
            throw CapExceededError("enumerate_dilate: state cap exceeded", states, antichain.size());
    };

    try_push(canon(o.identity()), UVec(r, 0));
    while (!queue.empty()) {
        auto [e, u] = std::move(queue.front());
        queue.pop_front();
        // Stale states (dominated after being queued) still only produce
        // dominated successors; re-checking here is an optimization only.
        for (std::size_t i = 0; i < r; ++i) {
            if (static_cast<Int>(u[i]) >= budgets[i]) continue;
            UVec u2 = u;
            ++u2[i];
            try_push(canon(o.mul(e, gens[i])), u2);
            try_push(canon(o.mul(e, inv_gens[i])), u2);
        }
    }
    ElemSet out;
    out.reserve(antichain.size());
    for (auto& [e, chain] : antichain) out.insert(e);
    return out;
}

std::vector<Int> dilate_budgets(const std::vector<Rat>& lengths, const Rat& t) {
    if (t < 0) throw std::invalid_argument("dilate: negative t");
    std::vector<Int> b;
    b.reserve(lengths.size());
    for (const Rat& n : lengths) b.push_back(std::max<Int>(0, rat_floor(Rat(t * n))));
    return b;
}

}  // namespace

Nilprogression::Nilprogression(OraclePtr oracle, std::vector<Elem> generators, std::vector<Rat> lengths,
                               int class_cap)
    : oracle_(std::move(oracle)), gens_(std::move(generators)), lengths_(std::move(lengths)) {
    if (gens_.size() != lengths_.size()) throw std::invalid_argument("Nilprogression: arity mismatch");
    for (const Rat& n : lengths_)
        if (n <= 0) throw std::invalid_argument("Nilprogression: lengths must be positive");
    for (const Elem& g : gens_)
        if (g.oracle != oracle_.get()) throw BackendMismatchError("Nilprogression: generator from another oracle");
    class_ = verify_nilpotent(*oracle_, gens_, [](const Elem& e) { return e; }, class_cap);
}

json Nilprogression::to_json() const {
    json j;
    j["group"] = oracle_->to_json();
    json gens = json::array();
    for (const Elem& g : gens_) gens.push_back(oracle_->elem_to_json(g));
    j["generators"] = std::move(gens);
    std::vector<std::string> ls;
    for (const Rat& n : lengths_) ls.push_back(rat_to_string(n));
    j["lengths"] = ls;
    return j;
}

Nilprogression Nilprogression::from_json(const json& j) {
    OraclePtr o = GroupOracle::from_json(j.at("group"));
    std::vector<Elem> gens;
    for (const auto& g : j.at("generators")) gens.push_back(o->elem_from_json(g));
    std::vector<Rat> lengths;
    for (const auto& s : j.at("lengths")) lengths.push_back(rat_from_string(s.get<std::string>()));
    return Nilprogression(std::move(o), std::move(gens), std::move(lengths));
}

CosetNilprogression::CosetNilprogression(OraclePtr oracle, std::vector<Elem> subgroup,
                                         std::vector<Elem> generators, std::vector<Rat> lengths, int class_cap)
    : oracle_(std::move(oracle)), subgroup_(std::move(subgroup)), gens_(std::move(generators)),
      lengths_(std::move(lengths)) {
    if (gens_.size() != lengths_.size()) throw std::invalid_argument("CosetNilprogression: arity mismatch");
    for (const Rat& n : lengths_)
        if (n <= 0) throw std::invalid_argument("CosetNilprogression: lengths must be positive");
    if (subgroup_.empty()) subgroup_.push_back(oracle_->identity());
    // H: sorted, deduplicated, closed under mul and inv, contains identity.
    std::sort(subgroup_.begin(), subgroup_.end(),
              [this](const Elem& a, const Elem& b) { return oracle_->cmp(a, b) < 0; });
    subgroup_.erase(std::unique(subgroup_.begin(), subgroup_.end()), subgroup_.end());
    ElemSet hs(subgroup_.begin(), subgroup_.end());
    if (hs.find(oracle_->identity()) == hs.end())
        throw std::invalid_argument("CosetNilprogression: H must contain the identity");
    for (const Elem& a : subgroup_) {
        if (hs.find(oracle_->inv(a)) == hs.end())
            throw std::invalid_argument("CosetNilprogression: H not closed under inverse");
        for (const Elem& b : subgroup_)
            if (hs.find(oracle_->mul(a, b)) == hs.end())
                throw std::invalid_argument("CosetNilprogression: H not closed under multiplication");
    }
    for (const Elem& v : gens_) {
        if (v.oracle != oracle_.get()) throw BackendMismatchError("CosetNilprogression: generator from another oracle");
        for (const Elem& h : subgroup_) {
            const Elem c = oracle_->mul(oracle_->mul(v, h), oracle_->inv(v));
            if (hs.find(c) == hs.end())
                throw std::invalid_argument("CosetNilprogression: generator does not normalize H");
        }
    }
    class_ = verify_nilpotent(*oracle_, gens_, [this](const Elem& e) { return coset_rep(e); }, class_cap);
}

CosetNilprogression CosetNilprogression::wrap(const Nilprogression& p) {
    return CosetNilprogression(p.oracle(), {p.oracle()->identity()}, p.generators(), p.lengths());
}

Elem CosetNilprogression::coset_rep(const Elem& g) const {
    if (subgroup_.size() == 1) return g;
    const GroupOracle& o = *oracle_;
    Elem best = o.mul(g, subgroup_[0]);
    for (std::size_t i = 1; i < subgroup_.size(); ++i) {
        Elem c = o.mul(g, subgroup_[i]);
        if (o.cmp(c, best) < 0) best = std::move(c);
    }
    return best;
}

bool CosetNilprogression::in_subgroup(const Elem& g) const {
    return std::any_of(subgroup_.begin(), subgroup_.end(), [&](const Elem& h) { return h == g; });
}

json CosetNilprogression::to_json() const {
    json j;
    j["group"] = oracle_->to_json();
    json hs = json::array();
    for (const Elem& h : subgroup_) hs.push_back(oracle_->elem_to_json(h));
    j["subgroup"] = std::move(hs);
    json gens = json::array();
    for (const Elem& g : gens_) gens.push_back(oracle_->elem_to_json(g));
    j["generators"] = std::move(gens);
    std::vector<std::string> ls;
    for (const Rat& n : lengths_) ls.push_back(rat_to_string(n));
    j["lengths"] = ls;
    return j;
}

CosetNilprogression CosetNilprogression::from_json(const json& j) {
    OraclePtr o = GroupOracle::from_json(j.at("group"));
    std::vector<Elem> h, gens;
    if (j.contains("subgroup"))
        for (const auto& e : j.at("subgroup")) h.push_back(o->elem_from_json(e));
    for (const auto& g : j.at("generators")) gens.push_back(o->elem_from_json(g));
    std::vector<Rat> lengths;
    for (const auto& s : j.at("lengths")) lengths.push_back(rat_from_string(s.get<std::string>()));
    return CosetNilprogression(std::move(o), std::move(h), std::move(gens), std::move(lengths));
}

ElemSet enumerate_dilate(const Nilprogression& p, const Rat& t, const EnumCaps& caps) {
    return budget_enumerate(*p.oracle(), p.generators(), dilate_budgets(p.lengths(), t),
                            [](const Elem& e) { return e; }, caps);
}

ElemSet enumerate_dilate_reps(const CosetNilprogression& hp, const Rat& t, const EnumCaps& caps) {
    return budget_enumerate(*hp.oracle(), hp.generators(), dilate_budgets(hp.lengths(), t),
                            [&hp](const Elem& e) { return hp.coset_rep(e); }, caps);
}

ElemSet enumerate_dilate(const CosetNilprogression& hp, const Rat& t, const EnumCaps& caps) {
    const ElemSet reps = enumerate_dilate_reps(hp, t, caps);
    ElemSet out;
    out.reserve(reps.size() * hp.subgroup().size());
    for (const Elem& r : reps)
        for (const Elem& h : hp.subgroup()) {
            out.insert(hp.oracle()->mul(r, h));
            if (out.size() > caps.max_states)
                throw CapExceededError("enumerate_dilate: pullback cap exceeded", out.size(), out.size());
        }
    return out;
}

NormCalculator::NormCalculator(CosetNilprogression hp, Rat t_max, EnumCaps caps)
    : hp_(std::move(hp)), t_max_(std::move(t_max)), caps_(caps) {
    if (t_max_ < 0) throw std::invalid_argument("NormCalculator: negative t_max");
    // Candidate grid: membership changes only when some floor(t N_i) increments.
    std::vector<Rat> g{Rat(0)};
    for (const Rat& n : hp_.lengths()) {
        const Int jmax = rat_ceil(Rat(t_max_ * n));
        for (Int j = 1; j <= jmax; ++j) {
            Rat t = Rat(j) / n;
            t.canonicalize();
            if (t <= t_max_) g.push_back(std::move(t));
        }
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    grid_ = std::move(g);
}

const ElemSet& NormCalculator::dilate_reps(std::size_t idx) {
    auto it = cache_.find(idx);
    if (it == cache_.end()) it = cache_.emplace(idx, enumerate_dilate_reps(hp_, grid_[idx], caps_)).first;
    return it->second;
}

bool NormCalculator::member(const Elem& rep, std::size_t idx) {
    const ElemSet& s = dilate_reps(idx);
    return s.find(rep) != s.end();
}

XRat NormCalculator::norm(const Elem& g) {
    const Elem rep = hp_.coset_rep(g);
    if (grid_.empty()) return XRat::infinity();
    if (!member(rep, grid_.size() - 1)) return XRat::infinity();
    // Binary search for the least grid index with membership.
    std::size_t lo = 0, hi = grid_.size() - 1;
    if (member(rep, 0)) return XRat::of(grid_[0]);
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (member(rep, mid))
            hi = mid;
        else
            lo = mid;
    }
    return XRat::of(grid_[hi]);
}

XRat NormCalculator::norm_x(const std::vector<Elem>& X, const Elem& g) {
    if (X.empty() || X.size() > 8) throw std::invalid_argument("norm_x: |X| must be in 1..8");
    const GroupOracle& o = *hp_.oracle();
    if (std::none_of(X.begin(), X.end(), [&](const Elem& x) { return o.is_identity(x); }))
        throw std::invalid_argument("norm_x: X must contain the identity");
    const std::size_t s = X.size();
    std::vector<Elem> inv_x;
    inv_x.reserve(s);
    for (const Elem& x : X) inv_x.push_back(o.inv(x));
    std::vector<std::size_t> perm(s);
    for (std::size_t i = 0; i < s; ++i) perm[i] = i;
    XRat best = XRat::infinity();
    do {
        XRat worst = XRat::of(Rat(0));
        bool pruned = false;
        for (std::size_t i = 0; i < s; ++i) {
            const XRat v = norm(o.mul(o.mul(inv_x[perm[i]], g), X[i]));
            if (worst < v) worst = v;
            if (!(worst < best)) {
                pruned = true;
                break;
            }
        }
        if (!pruned && worst < best) best = worst;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

XRat norm_p(const Nilprogression& p, const Elem& g, const Rat& t_max, const EnumCaps& caps) {
    NormCalculator calc(CosetNilprogression::wrap(p), t_max, caps);
    return calc.norm(g);
}

XRat norm_hp(const CosetNilprogression& hp, const Elem& g, const Rat& t_max, const EnumCaps& caps) {
    NormCalculator calc(hp, t_max, caps);
    return calc.norm(g);
}

XRat norm_hpx(const CosetNilprogression& hp, const std::vector<Elem>& X, const Elem& g, const Rat& t_max,
              const EnumCaps& caps) {
    NormCalculator calc(hp, t_max, caps);
    return calc.norm_x(X, g);
}

namespace {

NormalFormReport check_normal_form_impl(const CosetNilprogression& hp, const Rat& C, const EnumCaps& caps) {
    if (C < 1) throw std::invalid_argument("check_normal_form: C must be >= 1");
    const GroupOracle& o = *hp.oracle();
    const std::vector<Elem>& u = hp.generators();
    const std::vector<Rat>& N = hp.lengths();
    const int r = hp.rank();
    NormalFormReport rep;
    rep.C = C;

    // (i) upper-triangular form.
    rep.holds_i = true;
    for (int i = 0; i < r; ++i) {
        for (int j = i + 1; j < r; ++j) {
            // Tail progression P(u_{j+1},..,u_r; C N_{j+1}/(N_i N_j), ...).
            std::vector<Elem> tail_gens(u.begin() + j + 1, u.end());
            std::vector<Rat> tail_lengths;
            for (int k = j + 1; k < r; ++k) tail_lengths.push_back(Rat(C * N[static_cast<std::size_t>(k)] / (N[static_cast<std::size_t>(i)] * N[static_cast<std::size_t>(j)])));
            std::optional<ElemSet> tail_reps;
            if (!tail_gens.empty()) {
                CosetNilprogression tail(hp.oracle(), hp.subgroup(), tail_gens, tail_lengths);
                tail_reps = enumerate_dilate_reps(tail, Rat(1), caps);
            }
            for (int s1 : {+1, -1})
                for (int s2 : {+1, -1}) {
                    const Elem c = o.commutator(o.pow(u[static_cast<std::size_t>(i)], s1), o.pow(u[static_cast<std::size_t>(j)], s2));
                    const Elem crep = hp.coset_rep(c);
                    bool ok;
                    if (tail_reps)
                        ok = tail_reps->find(crep) != tail_reps->end();
                    else
                        ok = crep == hp.coset_rep(o.identity());
                    if (!ok) {
                        rep.holds_i = false;
                        std::ostringstream os;
                        os << "[u_" << (i + 1) << "^" << s1 << ", u_" << (j + 1) << "^" << s2
                           << "] = " << o.to_string(c) << " outside tail progression";
                        rep.witnesses_i.push_back(os.str());
                    }
                }
        }
    }

    // (ii) local properness over |n_i| <= N_i / C.
    rep.holds_ii = true;
    {
        std::vector<Int> bound;
        unsigned long long tuples = 1;
        for (int i = 0; i < r; ++i) {
            bound.push_back(std::max<Int>(0, rat_floor(Rat(N[static_cast<std::size_t>(i)] / C))));
            tuples *= static_cast<unsigned long long>(2 * bound.back() + 1);
            if (tuples > caps.max_states)
                throw CapExceededError("check_normal_form: properness tuple cap exceeded", tuples, 0);
        }
        // Per-generator power tables.
        std::vector<std::vector<Elem>> pows(static_cast<std::size_t>(r));
        for (int i = 0; i < r; ++i) {
            for (Int n = -bound[static_cast<std::size_t>(i)]; n <= bound[static_cast<std::size_t>(i)]; ++n)
                pows[static_cast<std::size_t>(i)].push_back(o.pow(u[static_cast<std::size_t>(i)], n));
        }
        std::unordered_map<Elem, std::vector<Int>, grp::ElemHash> seen;
        std::vector<Int> idx(static_cast<std::size_t>(r), 0);
        bool done = false;
        while (!done) {
            Elem prod = o.identity();
            std::vector<Int> tuple(static_cast<std::size_t>(r));
            for (int i = 0; i < r; ++i) {
                tuple[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i)] - bound[static_cast<std::size_t>(i)];
                prod = o.mul(prod, pows[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
            }
            const Elem key = hp.coset_rep(prod);
            auto [it, inserted] = seen.emplace(key, tuple);
            if (!inserted) {
                rep.holds_ii = false;
                std::ostringstream os;
                os << "collision: exponents (";
                for (int i = 0; i < r; ++i) os << (i ? "," : "") << it->second[static_cast<std::size_t>(i)];
                os << ") and (";
                for (int i = 0; i < r; ++i) os << (i ? "," : "") << tuple[static_cast<std::size_t>(i)];
                os << ") both give " << o.to_string(prod);
                rep.witness_ii = os.str();
                break;
            }
            // Odometer.
            done = true;
            for (int i = r - 1; i >= 0; --i) {
                if (idx[static_cast<std::size_t>(i)] < 2 * bound[static_cast<std::size_t>(i)]) {
                    ++idx[static_cast<std::size_t>(i)];
                    for (int k = i + 1; k < r; ++k) idx[static_cast<std::size_t>(k)] = 0;
                    done = false;
                    break;
                }
            }
        }
    }

    // (iii) volume bound against prod(2 floor(N_i) + 1).  For a coset
    // nilprogression the associated nilprogression lives in N(H)/H, so the
    // count is over quotient representatives.
    {
        Rat prod(1);
        for (const Rat& n : N) prod *= Rat(2 * rat_floor(n) + 1);
        rep.p_size = enumerate_dilate_reps(hp, Rat(1), caps).size();
        rep.volume_lower = Rat(prod / C);
        rep.volume_upper = Rat(prod * C);
        const Rat size_rat(static_cast<long>(rep.p_size));
        rep.holds_iii = rep.volume_lower <= size_rat && size_rat <= rep.volume_upper;
    }
    return rep;
}

}  // namespace

NormalFormReport check_normal_form(const Nilprogression& p, const Rat& C, const EnumCaps& caps) {
    return check_normal_form_impl(CosetNilprogression::wrap(p), C, caps);
}

NormalFormReport check_normal_form(const CosetNilprogression& hp, const Rat& C, const EnumCaps& caps) {
    return check_normal_form_impl(hp, C, caps);
}

json NormalFormReport::to_json() const {
    json j;
    j["C"] = rat_to_string(C);
    j["holds_i"] = holds_i;
    j["holds_ii"] = holds_ii;
    j["holds_iii"] = holds_iii;
    j["holds"] = holds();
    j["witnesses_i"] = witnesses_i;
    j["witness_ii"] = witness_ii;
    j["p_size"] = p_size;
    j["volume_lower"] = rat_to_string(volume_lower);
    j["volume_upper"] = rat_to_string(volume_upper);
    return j;
}

}  // namespace nilgrowth::nilprog
