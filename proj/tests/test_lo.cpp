#include <doctest.h>

#include <algorithm>
#include <map>

#include "nilgrowth/liealg.hpp"
#include "nilgrowth/lo.hpp"
#include "test_util.hpp"

using namespace nilgrowth;
using namespace nilgrowth::lo;
using grp::Elem;
using grp::GroupOracle;
using grp::OraclePtr;

namespace {

// Independent oracle: enumerate all 2^n sign patterns.
Rat brute_rho(const OraclePtr& z, const std::vector<Int>& v) {
    std::map<Int, long> counts;
    const std::size_t n = v.size();
    for (std::uint64_t mask = 0; mask < (1ull << n); ++mask) {
        Int sum = 0;
        for (std::size_t i = 0; i < n; ++i) sum += (mask >> i) & 1 ? v[i] : -v[i];
        ++counts[sum];
    }
    long best = 0;
    for (const auto& [x, c] : counts) best = std::max(best, c);
    return make_rat(best, 1L << n);
}

LOInstance z_instance(const OraclePtr& z, const std::vector<Int>& v) {
    LOInstance inst;
    inst.oracle = z;
    for (Int x : v) inst.elems.push_back(z->from_coords({x}));
    return inst;
}

}  // namespace

TEST_CASE("bernoulli concentration: classic instances") {
    auto z = GroupOracle::lattice(1);
    const Concentration a = bernoulli_concentration(z_instance(z, {1, 1, 1, 1}));
    CHECK(a.rho == make_rat(6, 16));
    CHECK(a.witness == z->from_coords({0}));

    const Concentration b = bernoulli_concentration(z_instance(z, {1, 2, 4, 8}));
    CHECK(b.rho == make_rat(1, 16));

    const Concentration c = bernoulli_concentration(z_instance(z, {0, 0, 0}));
    CHECK(c.rho == Rat(1));
}

TEST_CASE("bernoulli concentration matches the sign-pattern oracle and its invariances") {
    auto z = GroupOracle::lattice(1);
    SplitMix64 rng(61);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = static_cast<int>(rng.range(2, 9));
        std::vector<Int> v;
        for (int i = 0; i < n; ++i) v.push_back(rng.range(-6, 6));
        const Rat rho = bernoulli_concentration(z_instance(z, v)).rho;
        CHECK(rho == brute_rho(z, v));
        // Invariance under negating an entry and permuting.
        std::vector<Int> w = v;
        w[0] = -w[0];
        std::reverse(w.begin(), w.end());
        CHECK(bernoulli_concentration(z_instance(z, w)).rho == rho);
    }
}

TEST_CASE("bernoulli concentration requires an abelian oracle") {
    auto d = GroupOracle::dihedral_inf();
    LOInstance inst;
    inst.oracle = d;
    inst.elems = {d->dihedral(1, 1)};
    CHECK_THROWS_AS(bernoulli_concentration(inst), std::invalid_argument);
}

TEST_CASE("symmetrized walk concentration: edge cases") {
    auto z = GroupOracle::lattice(1);
    LOInstance ident = z_instance(z, {0, 0});
    CHECK(symmetrized_walk_concentration(ident, 3) == Rat(1));

    // Single generator of Z/2: two steps return deterministically.
    auto c2 = GroupOracle::cayley_cyclic(2);
    LOInstance inst;
    inst.oracle = c2;
    inst.elems = {c2->from_coords({1})};
    CHECK(symmetrized_walk_concentration(inst, 2) == Rat(1));

    // A_i = 1 in Z for i <= 4: the symmetrized uniform measure coincides with
    // Bernoulli steps.
    CHECK(symmetrized_walk_concentration(z_instance(z, {1, 1, 1, 1}), 4) == make_rat(6, 16));
}

TEST_CASE("cross-module equality: walk concentration equals the measures route exactly") {
    auto z = GroupOracle::lattice(1);
    SplitMix64 rng(67);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = static_cast<int>(rng.range(2, 5));
        LOInstance inst;
        inst.oracle = z;
        std::vector<Elem> multiset;
        for (int i = 0; i < n; ++i) {
            const Elem e = z->from_coords({rng.range(-6, 6)});
            inst.elems.push_back(e);
            multiset.push_back(e);
            multiset.push_back(z->inv(e));
        }
        const Rat walk = symmetrized_walk_concentration(inst, n);
        const Rat conv = meas::FiniteMeasure::uniform(z, multiset).power(n).linf_rat();
        CHECK(walk == conv);
    }
}

TEST_CASE("find_small_subgroup recovers planted subgroups") {
    auto d8 = GroupOracle::cayley_dihedral(8);  // order 16; rotations 0..7, reflections 8..15

    // All elements in the rotation subgroup {0,2,4,6} of order 4.
    LOInstance all_in;
    all_in.oracle = d8;
    for (int i = 0; i < 20; ++i) all_in.elems.push_back(d8->from_coords({i % 2 ? 2 : 6}));
    const SubgroupReport full = find_small_subgroup(all_in, 8, 0.9);
    CHECK(full.found);
    CHECK(full.order == 4);
    CHECK(full.fraction == 1.0);

    // 90% planted inside, 10% outside.
    LOInstance mixed;
    mixed.oracle = d8;
    for (int i = 0; i < 36; ++i) mixed.elems.push_back(d8->from_coords({2}));
    for (int i = 0; i < 4; ++i) mixed.elems.push_back(d8->from_coords({8}));
    const SubgroupReport part = find_small_subgroup(mixed, 8, 0.9);
    CHECK(part.found);
    CHECK(part.order == 4);
    CHECK(part.fraction == doctest::Approx(0.9));

    // Full-group generators admit no small subgroup under the cap.
    LOInstance spread;
    spread.oracle = d8;
    for (int i = 0; i < 32; ++i) {
        spread.elems.push_back(d8->from_coords({1}));
        spread.elems.push_back(d8->from_coords({8}));
    }
    CHECK(!find_small_subgroup(spread, 8, 0.9).found);
}

TEST_CASE("mam experiment: planted instance and control") {
    auto d8 = GroupOracle::cayley_dihedral(8);
    SplitMix64 rng(71);
    LOInstance planted;
    planted.oracle = d8;
    for (int i = 0; i < 64; ++i) planted.elems.push_back(d8->from_coords({rng.coin() ? 2 : 6}));
    const MamReport rep = mam_experiment(planted, make_rat(1, 2), 8, 0.9);
    CHECK(rep.sup_prob == make_rat(1, 2));  // parity walk on the order-4 subgroup
    CHECK(rep.hypothesis);
    CHECK(rep.subgroup.found);
    CHECK(rep.subgroup.order == 4);
    CHECK(rep.subgroup.fraction >= 0.9);

    LOInstance control;
    control.oracle = d8;
    for (int i = 0; i < 64; ++i)
        control.elems.push_back(d8->from_coords({static_cast<Int>(rng.below(16))}));
    const MamReport crep = mam_experiment(control, make_rat(1, 2), 8, 0.9);
    CHECK(!crep.hypothesis);  // walk spreads over the group, sup ~ 1/16

    LOInstance tiny;
    tiny.oracle = d8;
    tiny.elems = {d8->from_coords({2})};
    CHECK_THROWS_AS(mam_experiment(tiny, make_rat(1, 2), 8, 0.9), std::invalid_argument);
}

TEST_CASE("bass-guivarch degrees") {
    // Z^d embedded via shifts in UT(d+1): degree d.
    for (int d = 1; d <= 4; ++d) {
        auto o = GroupOracle::unitriangular(d + 1);
        std::vector<Elem> gens;
        for (int i = 0; i < d; ++i)
            gens.push_back(lie::mat_exp(o, lie::NilMatrix::elementary(d + 1, i, d)));
        CHECK(bass_guivarch_degree(o, gens) == d);
    }
    // Heisenberg: 1*2 + 2*1 = 4.
    auto h = GroupOracle::unitriangular(3);
    const std::vector<Elem> hgens{h->ut3(1, 0, 0), h->ut3(0, 0, 1)};
    CHECK(bass_guivarch_degree(h, hgens) == 4);
    // UT(4): 1*3 + 2*2 + 3*1 = 10.
    auto u4 = GroupOracle::unitriangular(4);
    std::vector<Elem> ugens;
    for (int i = 0; i < 3; ++i) ugens.push_back(lie::mat_exp(u4, lie::NilMatrix::elementary(4, i, i + 1)));
    CHECK(bass_guivarch_degree(u4, ugens) == 10);
}

TEST_CASE("bass-guivarch degree is invariant under conjugation") {
    auto h = GroupOracle::unitriangular(3);
    const Elem c = h->ut3(2, -1, 3);
    std::vector<Elem> gens{h->ut3(1, 0, 0), h->ut3(0, 0, 1)};
    std::vector<Elem> conj;
    for (const Elem& g : gens) conj.push_back(h->mul(h->mul(c, g), h->inv(c)));
    CHECK(bass_guivarch_degree(h, conj) == 4);
}

TEST_CASE("mam2 experiment") {
    auto z = GroupOracle::lattice(1);
    // Dirac: linf stays 1.
    const Mam2Report triv = mam2_experiment(meas::FiniteMeasure::dirac(z, z->identity()), 0, 0.5, 8);
    CHECK(triv.linf == Rat(1));
    CHECK(triv.hypothesis);

    // Lazy walk on Z (degree 1): boundary behavior at n = 100.
    const meas::FiniteMeasure lazy = meas::FiniteMeasure::from_rational(
        z, {{z->from_coords({-1}), make_rat(1, 4)},
            {z->from_coords({0}), make_rat(1, 2)},
            {z->from_coords({1}), make_rat(1, 4)}});
    const Mam2Report lz = mam2_experiment(lazy, 1, 0.5, 100);
    CHECK(lz.hypothesis);  // ~ 1/sqrt(pi n) vs n^{-3/4}
    CHECK(!lz.bass_degree.has_value());

    // Heisenberg generators: decay consistent with degree 4 at n = 16.
    auto h = GroupOracle::unitriangular(3);
    const std::vector<Elem> atoms{h->ut3(1, 0, 0), h->ut3(-1, 0, 0), h->ut3(0, 0, 1), h->ut3(0, 0, -1)};
    const meas::FiniteMeasure mu = meas::FiniteMeasure::uniform(h, atoms);
    const Mam2Report rep = mam2_experiment(mu, 4, 0.5, 16);
    CHECK(rep.linf == make_rat(33820044, 4294967296L));
    CHECK(rep.hypothesis);
    REQUIRE(rep.bass_degree.has_value());
    CHECK(*rep.bass_degree == 4);
    CHECK(rep.consistent);

    const meas::FiniteMeasure asym = meas::FiniteMeasure::from_rational(
        z, {{z->from_coords({1}), make_rat(2, 3)}, {z->from_coords({-1}), make_rat(1, 3)}});
    CHECK_THROWS_AS(mam2_experiment(asym, 1, 0.5, 4), std::invalid_argument);
}
