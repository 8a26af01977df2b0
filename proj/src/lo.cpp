#include "nilgrowth/lo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "nilgrowth/liealg.hpp"
#include "nilgrowth/linalg.hpp"

namespace nilgrowth::lo {

using grp::ElemSet;
using grp::GroupOracle;
using nlohmann::json;

namespace {

using Dist = std::unordered_map<Elem, mpz_class, grp::ElemHash>;

// One convolution step of an integer-numerator distribution against weighted
// atoms; the denominator is implicit (atom weight total per step).
Dist step(const GroupOracle& o, const Dist& dist, const std::vector<std::pair<Elem, mpz_class>>& atoms,
          const EnumCaps& caps) {
    Dist next;
    next.reserve(dist.size() * 2);
    for (const auto& [g, m] : dist)
        for (const auto& [a, w] : atoms) {
            next[o.mul(g, a)] += m * w;
            if (next.size() > caps.max_states)
                throw CapExceededError("walk: support cap exceeded", next.size(), next.size());
        }
    return next;
}

std::pair<Rat, Elem> max_mass(const GroupOracle& o, const Dist& dist, const mpz_class& denom) {
    const Elem* best = nullptr;
    const mpz_class* bm = nullptr;
    for (const auto& [g, m] : dist) {
        if (best == nullptr || m > *bm || (m == *bm && o.cmp(g, *best) < 0)) {
            best = &g;
            bm = &m;
        }
    }
    Rat rho(*bm);
    rho /= Rat(denom);
    rho.canonicalize();
    return {rho, *best};
}

}  // namespace

Concentration bernoulli_concentration(const LOInstance& inst, const EnumCaps& caps) {
    if (inst.elems.empty()) throw std::invalid_argument("bernoulli_concentration: empty instance");
    const GroupOracle& o = *inst.oracle;
    if (!o.is_abelian()) throw std::invalid_argument("bernoulli_concentration: abelian oracle required");
    Dist dist;
    dist[o.identity()] = 1;
    for (const Elem& v : inst.elems) {
        std::vector<std::pair<Elem, mpz_class>> atoms{{v, 1}, {o.inv(v), 1}};
        dist = step(o, dist, atoms, caps);
    }
    mpz_class denom;
    mpz_ui_pow_ui(denom.get_mpz_t(), 2, static_cast<unsigned long>(inst.elems.size()));
    auto [rho, witness] = max_mass(o, dist, denom);
    return Concentration{rho, witness};
}

Rat symmetrized_walk_concentration(const LOInstance& inst, int steps, const EnumCaps& caps) {
    if (inst.elems.empty()) throw std::invalid_argument("symmetrized_walk_concentration: empty instance");
    if (steps < 1) throw std::invalid_argument("symmetrized_walk_concentration: steps must be >= 1");
    const GroupOracle& o = *inst.oracle;
    // Uniform on the 2n-element multiset {A_i^{+-1}}: count multiplicities.
    std::unordered_map<Elem, mpz_class, grp::ElemHash> counts;
    for (const Elem& a : inst.elems) {
        counts[a] += 1;
        counts[o.inv(a)] += 1;
    }
    std::vector<std::pair<Elem, mpz_class>> atoms(counts.begin(), counts.end());
    std::sort(atoms.begin(), atoms.end(),
              [&o](const auto& x, const auto& y) { return o.cmp(x.first, y.first) < 0; });
    Dist dist;
    dist[o.identity()] = 1;
    for (int s = 0; s < steps; ++s) dist = step(o, dist, atoms, caps);
    mpz_class denom;
    mpz_ui_pow_ui(denom.get_mpz_t(), static_cast<unsigned long>(2 * inst.elems.size()),
                  static_cast<unsigned long>(steps));
    return max_mass(o, dist, denom).first;
}

namespace {

std::vector<Elem> closure(const GroupOracle& o, const std::vector<Elem>& gens) {
    ElemSet set;
    std::vector<Elem> work;
    set.insert(o.identity());
    work.push_back(o.identity());
    for (const Elem& g : gens) {
        if (set.insert(g).second) work.push_back(g);
        const Elem gi = o.inv(g);
        if (set.insert(gi).second) work.push_back(gi);
    }
    std::vector<Elem> all(set.begin(), set.end());
    while (!work.empty()) {
        const Elem g = work.back();
        work.pop_back();
        all.assign(set.begin(), set.end());
        for (const Elem& h : all) {
            for (const Elem& p : {o.mul(g, h), o.mul(h, g)}) {
                if (set.insert(p).second) work.push_back(p);
            }
        }
    }
    std::vector<Elem> out(set.begin(), set.end());
    std::sort(out.begin(), out.end(), [&o](const Elem& a, const Elem& b) { return o.cmp(a, b) < 0; });
    return out;
}

double covered_fraction(const std::vector<Elem>& subgroup, const std::vector<Elem>& elems) {
    ElemSet hs(subgroup.begin(), subgroup.end());
    std::size_t inside = 0;
    for (const Elem& a : elems)
        if (hs.find(a) != hs.end()) ++inside;
    return static_cast<double>(inside) / static_cast<double>(elems.size());
}

}  // namespace

json SubgroupReport::to_json(const GroupOracle& o) const {
    json elems = json::array();
    for (const Elem& h : subgroup) elems.push_back(o.elem_to_json(h));
    return {{"found", found}, {"order", order}, {"fraction", fraction}, {"elements", elems}};
}

SubgroupReport find_small_subgroup(const LOInstance& inst, unsigned long long order_cap,
                                   double fraction_target) {
    const GroupOracle& o = *inst.oracle;
    if (o.backend() != grp::Backend::Cayley)
        throw std::invalid_argument("find_small_subgroup: finite Cayley backend required");
    // Distinct values in deterministic order.
    std::vector<Elem> distinct;
    {
        ElemSet seen;
        for (const Elem& a : inst.elems)
            if (seen.insert(a).second) distinct.push_back(a);
        std::sort(distinct.begin(), distinct.end(), [&o](const Elem& x, const Elem& y) { return o.cmp(x, y) < 0; });
    }
    const std::size_t nd = distinct.size();
    std::vector<std::vector<Elem>> candidates;
    for (std::size_t i = 0; i < nd; ++i) candidates.push_back({distinct[i]});
    for (std::size_t i = 0; i < nd; ++i)
        for (std::size_t j = i + 1; j < nd; ++j) candidates.push_back({distinct[i], distinct[j]});
    for (std::size_t i = 0; i < nd; ++i)
        for (std::size_t j = i + 1; j < nd; ++j)
            for (std::size_t k = j + 1; k < nd; ++k) candidates.push_back({distinct[i], distinct[j], distinct[k]});
    candidates.push_back(distinct);

    SubgroupReport best;
    for (const auto& gens : candidates) {
        const std::vector<Elem> sub = closure(o, gens);
        const unsigned long long ord = sub.size();
        if (ord > order_cap) continue;
        const double frac = covered_fraction(sub, inst.elems);
        if (frac < fraction_target) continue;
        if (!best.found || ord < best.order) {
            best.found = true;
            best.subgroup = sub;
            best.order = ord;
            best.fraction = frac;
        }
    }
    if (best.found) {
        // Re-verify closure and coverage on return.
        ElemSet hs(best.subgroup.begin(), best.subgroup.end());
        for (const Elem& a : best.subgroup) {
            if (hs.find(o.inv(a)) == hs.end()) throw std::logic_error("find_small_subgroup: closure broken (inv)");
            for (const Elem& b : best.subgroup)
                if (hs.find(o.mul(a, b)) == hs.end())
                    throw std::logic_error("find_small_subgroup: closure broken (mul)");
        }
        if (covered_fraction(best.subgroup, inst.elems) != best.fraction)
            throw std::logic_error("find_small_subgroup: fraction mismatch");
    }
    return best;
}

json MamReport::to_json(const GroupOracle& o) const {
    return {{"n", n},
            {"eps", rat_to_string(eps)},
            {"sup_prob", rat_to_string(sup_prob)},
            {"hypothesis", hypothesis},
            {"subgroup", subgroup.to_json(o)},
            {"order_over_eps_sqrt_n", order_over_eps_sqrt_n},
            {"outlier_over_eps_sq", outlier_over_eps_sq}};
}

MamReport mam_experiment(const LOInstance& inst, const Rat& eps, unsigned long long order_cap,
                         double fraction_target, const EnumCaps& caps) {
    const int n = static_cast<int>(inst.elems.size());
    if (n < 2) throw std::invalid_argument("mam_experiment: requires n >= 2");
    if (eps <= 0 || eps > 1) throw std::invalid_argument("mam_experiment: eps must be in (0,1]");
    MamReport rep;
    rep.n = n;
    rep.eps = eps;
    rep.sup_prob = symmetrized_walk_concentration(inst, n, caps);
    // sup > 1/(eps sqrt(n))  <=>  sup^2 eps^2 n > 1, exactly in rationals.
    rep.hypothesis = Rat(rep.sup_prob * rep.sup_prob * eps * eps * n) > 1;
    if (rep.hypothesis) {
        rep.subgroup = find_small_subgroup(inst, order_cap, fraction_target);
        if (rep.subgroup.found) {
            const double es = rat_to_double(eps) * std::sqrt(static_cast<double>(n));
            rep.order_over_eps_sqrt_n = static_cast<double>(rep.subgroup.order) / es;
            rep.outlier_over_eps_sq =
                (1.0 - rep.subgroup.fraction) / (rat_to_double(eps) * rat_to_double(eps));
        }
    }
    return rep;
}

long bass_guivarch_degree(const OraclePtr& oracle, const std::vector<Elem>& generators) {
    if (oracle->backend() != grp::Backend::Unitriangular)
        throw std::invalid_argument("bass_guivarch_degree: unitriangular generators required");
    if (generators.empty()) throw std::invalid_argument("bass_guivarch_degree: no generators");
    const int k = oracle->matrix_size();
    std::vector<lie::NilMatrix> logs;
    for (const Elem& g : generators) logs.push_back(lie::mat_log(g));

    // Basis of the generated Lie algebra: close the span under brackets.
    auto add_to_basis = [](linalg::RatMat& basis, const std::vector<Rat>& v) -> bool {
        linalg::RatMat m = basis;
        m.push_back(v);
        if (linalg::rank(m) > static_cast<int>(basis.size())) {
            basis.push_back(v);
            return true;
        }
        return false;
    };
    linalg::RatMat basis;
    std::vector<lie::NilMatrix> basis_mats;
    for (const lie::NilMatrix& x : logs)
        if (!x.is_zero() && add_to_basis(basis, x.upper)) basis_mats.push_back(x);
    for (std::size_t i = 0; i < basis_mats.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const lie::NilMatrix b = lie::NilMatrix::bracket(basis_mats[i], basis_mats[j]);
            if (!b.is_zero() && add_to_basis(basis, b.upper)) basis_mats.push_back(b);
        }

    // Lower central series L_1 = L, L_{j+1} = [L, L_j]; D = sum_j j (dim_j - dim_{j+1}).
    std::vector<lie::NilMatrix> lj = basis_mats;
    int dim_prev = static_cast<int>(basis_mats.size());
    long degree = 0;
    for (int j = 1; j <= k && dim_prev > 0; ++j) {
        linalg::RatMat next_basis;
        std::vector<lie::NilMatrix> next_mats;
        for (const lie::NilMatrix& x : basis_mats)
            for (const lie::NilMatrix& y : lj) {
                const lie::NilMatrix b = lie::NilMatrix::bracket(x, y);
                if (!b.is_zero() && add_to_basis(next_basis, b.upper)) next_mats.push_back(b);
            }
        const int dim_next = static_cast<int>(next_mats.size());
        degree += static_cast<long>(j) * (dim_prev - dim_next);
        lj = std::move(next_mats);
        dim_prev = dim_next;
    }
    if (dim_prev != 0) throw std::logic_error("bass_guivarch_degree: lower central series did not terminate");
    return degree;
}

json Mam2Report::to_json() const {
    json j{{"n", n},
           {"d", d},
           {"eps", eps},
           {"linf", rat_to_string(linf)},
           {"threshold", threshold},
           {"hypothesis", hypothesis},
           {"consistent", consistent}};
    if (bass_degree) j["bass_degree"] = *bass_degree;
    return j;
}

Mam2Report mam2_experiment(const meas::FiniteMeasure& mu, int d, double eps, int n, const EnumCaps& caps) {
    if (!mu.is_symmetric()) throw std::invalid_argument("mam2_experiment: mu must be symmetric");
    Mam2Report rep;
    rep.n = n;
    rep.d = d;
    rep.eps = eps;
    rep.linf = mu.power(n, caps).linf_rat();
    rep.threshold = std::pow(static_cast<double>(n), -(d + 1 - eps) / 2.0);
    rep.hypothesis = rat_to_double(rep.linf) >= rep.threshold;
    if (mu.oracle()->backend() == grp::Backend::Unitriangular) {
        std::vector<Elem> support;
        for (const auto& [g, m] : mu.sorted_rational()) support.push_back(g);
        rep.bass_degree = bass_guivarch_degree(mu.oracle(), support);
        rep.consistent = !rep.hypothesis || *rep.bass_degree <= d;
    }
    return rep;
}

}  // namespace nilgrowth::lo
