#include <doctest.h>

#include <functional>

#include "nilgrowth/nilprog.hpp"
#include "test_util.hpp"

using namespace nilgrowth;
using namespace nilgrowth::nilprog;
using grp::Elem;
using grp::ElemSet;
using grp::GroupOracle;
using grp::OraclePtr;

namespace {

// Independent oracle: evaluate every word over {v_i^{+-1}} within the given
// per-generator budgets by depth-first sequence enumeration.
ElemSet brute_force_words(const OraclePtr& o, const std::vector<Elem>& gens, const std::vector<Int>& budgets) {
    ElemSet out;
    std::vector<Elem> letters;
    std::vector<std::size_t> letter_gen;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        letters.push_back(gens[i]);
        letter_gen.push_back(i);
        letters.push_back(o->inv(gens[i]));
        letter_gen.push_back(i);
    }
    std::vector<Int> used(gens.size(), 0);
    std::function<void(const Elem&)> rec = [&](const Elem& cur) {
        out.insert(cur);
        for (std::size_t l = 0; l < letters.size(); ++l) {
            const std::size_t i = letter_gen[l];
            if (used[i] >= budgets[i]) continue;
            ++used[i];
            rec(o->mul(cur, letters[l]));
            --used[i];
        }
    };
    rec(o->identity());
    return out;
}

Nilprogression z_prog(const OraclePtr& z, Int step, const Rat& n) {
    return Nilprogression(z, {z->from_coords({step})}, {n});
}

}  // namespace

TEST_CASE("enumerate_dilate on Z: P(1;10)^{1/2} = {-5..5}") {
    auto z = GroupOracle::lattice(1);
    const Nilprogression p = z_prog(z, 1, Rat(10));
    const ElemSet s = enumerate_dilate(p, make_rat(1, 2));
    CHECK(s.size() == 11);
    for (Int v = -5; v <= 5; ++v) CHECK(s.count(z->from_coords({v})) == 1);
    CHECK(enumerate_dilate(p, Rat(0)) == ElemSet{z->identity()});
}

TEST_CASE("enumerate_dilate matches exhaustive word search on the Heisenberg pair") {
    auto o = GroupOracle::unitriangular(3);
    const std::vector<Elem> gens{o->ut3(1, 0, 0), o->ut3(0, 0, 1)};
    const Nilprogression p(o, gens, {Rat(2), Rat(2)});
    for (const Rat& t : {make_rat(1, 2), Rat(1)}) {
        const ElemSet fast = enumerate_dilate(p, t);
        const Int b = rat_floor(Rat(t * 2));
        CHECK(fast == brute_force_words(o, gens, {b, b}));
    }
    CHECK(enumerate_dilate(p, Rat(1)).size() == 87);
}

TEST_CASE("dilates are monotone in t and closed under inversion") {
    auto o = GroupOracle::unitriangular(3);
    const Nilprogression p(o, {o->ut3(1, 0, 0), o->ut3(0, 0, 1)}, {Rat(2), Rat(2)});
    const ElemSet small = enumerate_dilate(p, make_rat(3, 4));
    const ElemSet big = enumerate_dilate(p, Rat(2));
    for (const Elem& g : small) {
        CHECK(big.count(g) == 1);
        CHECK(small.count(o->inv(g)) == 1);
    }
    CHECK(small.count(o->identity()) == 1);
}

TEST_CASE("natural-t dilates agree with iterated products on abelian instances") {
    struct Case {
        OraclePtr o;
        std::vector<Elem> gens;
        std::vector<Rat> lengths;
    };
    auto z = GroupOracle::lattice(1);
    auto z2 = GroupOracle::lattice(2);
    auto cyc = GroupOracle::cyclic({12});
    auto d = GroupOracle::dihedral_inf();
    std::vector<Case> cases{
        {z, {z->from_coords({1})}, {Rat(3)}},
        {z2, {z2->from_coords({1, 0}), z2->from_coords({0, 1})}, {Rat(2), Rat(3)}},
        {cyc, {cyc->from_coords({1})}, {Rat(2)}},
        {d, {d->dihedral(1, 1)}, {Rat(4)}},
    };
    for (const Case& c : cases) {
        const Nilprogression p(c.o, c.gens, c.lengths);
        const ElemSet p1 = enumerate_dilate(p, Rat(1));
        ElemSet product = p1;
        for (int t = 2; t <= 3; ++t) {
            ElemSet next;
            for (const Elem& a : product)
                for (const Elem& b : p1) next.insert(c.o->mul(a, b));
            product = std::move(next);
            CHECK(enumerate_dilate(p, Rat(t)) == product);
        }
    }
}

TEST_CASE("natural-t dilate strictly exceeds the iterated product on a Heisenberg instance") {
    // The word-budget dilate P^2 contains [u^2, v^2] (four uses of each
    // generator), which cannot be reached by a product of two budget-(2,2)
    // words here; the definitions agree only up to constants in general.
    auto o = GroupOracle::unitriangular(3);
    const Nilprogression p(o, {o->ut3(1, 0, 0), o->ut3(0, 0, 1)}, {Rat(2), Rat(2)});
    const ElemSet p1 = enumerate_dilate(p, Rat(1));
    ElemSet product;
    for (const Elem& a : p1)
        for (const Elem& b : p1) product.insert(o->mul(a, b));
    const ElemSet p2 = enumerate_dilate(p, Rat(2));
    CHECK(p1.size() == 87);
    CHECK(product.size() == 905);
    CHECK(p2.size() == 1033);
    for (const Elem& g : product) CHECK(p2.count(g) == 1);
}

TEST_CASE("non-nilpotent generator sets are rejected") {
    auto d = GroupOracle::dihedral_inf();
    CHECK_THROWS_AS(Nilprogression(d, {d->dihedral(1, 1), d->dihedral(-1, 0)}, {Rat(2), Rat(2)}),
                    NotNilpotentError);
    // Translations alone are fine (abelian).
    const Nilprogression p(d, {d->dihedral(1, 1)}, {Rat(5)});
    CHECK(p.nilpotency_class() == 1);
}

TEST_CASE("norm_p on Z: grid values and symmetry") {
    auto z = GroupOracle::lattice(1);
    const Nilprogression p = z_prog(z, 1, Rat(10));
    CHECK(norm_p(p, z->identity(), Rat(2)) == XRat::of(Rat(0)));
    CHECK(norm_p(p, z->from_coords({5}), Rat(2)) == XRat::of(make_rat(1, 2)));
    CHECK(norm_p(p, z->from_coords({-5}), Rat(2)) == XRat::of(make_rat(1, 2)));
    CHECK(norm_p(p, z->from_coords({1}), Rat(2)) == XRat::of(make_rat(1, 10)));
    CHECK(norm_p(p, z->from_coords({25}), Rat(2)).is_inf());
}

TEST_CASE("norm_hp vanishes exactly on H") {
    auto cyc = GroupOracle::cyclic({12});
    const std::vector<Elem> h{cyc->from_coords({0}), cyc->from_coords({4}), cyc->from_coords({8})};
    const CosetNilprogression hp(cyc, h, {cyc->from_coords({1})}, {Rat(2)});
    NormCalculator calc(hp, Rat(2));
    for (const Elem& e : h) CHECK(calc.norm(e) == XRat::of(Rat(0)));
    CHECK(calc.norm(cyc->from_coords({1})) == XRat::of(make_rat(1, 2)));
    CHECK(!(calc.norm(cyc->from_coords({2})) == XRat::of(Rat(0))));
}

TEST_CASE("norm_hp with trivial H reduces to norm_p") {
    auto z = GroupOracle::lattice(1);
    const Nilprogression p = z_prog(z, 1, Rat(10));
    const CosetNilprogression hp = CosetNilprogression::wrap(p);
    for (Int v : {0, 5, -7}) {
        CHECK(norm_hp(hp, z->from_coords({v}), Rat(2)) == norm_p(p, z->from_coords({v}), Rat(2)));
    }
}

TEST_CASE("dihedral seminorm ||(a,b)||_{HP,X} = |b|/N") {
    auto d = GroupOracle::dihedral_inf();
    const CosetNilprogression hp(d, {d->identity()}, {d->dihedral(1, 1)}, {Rat(10)});
    const std::vector<Elem> x{d->identity(), d->dihedral(-1, 0)};
    NormCalculator calc(hp, Rat(3));
    CHECK(calc.norm_x(x, d->dihedral(-1, 3)) == XRat::of(make_rat(3, 10)));
    CHECK(calc.norm_x(x, d->identity()) == XRat::of(Rat(0)));
    CHECK(calc.norm_x(x, d->dihedral(1, 7)) == XRat::of(make_rat(7, 10)));
    // Reflections alone (without the swap) have infinite plain seminorm.
    CHECK(calc.norm(d->dihedral(-1, 3)).is_inf());
}

TEST_CASE("norm axioms hold exactly on random pairs") {
    SplitMix64 rng(17);
    auto z2 = GroupOracle::lattice(2);
    auto o = GroupOracle::unitriangular(3);
    struct Case {
        CosetNilprogression hp;
        std::vector<Elem> x;
    };
    std::vector<Case> cases;
    cases.push_back({CosetNilprogression(z2, {}, {z2->from_coords({1, 0}), z2->from_coords({0, 1})},
                                         {Rat(5), Rat(7)}),
                     {z2->identity(), z2->from_coords({1, 2})}});
    cases.push_back({CosetNilprogression(o, {}, {o->ut3(1, 0, 0), o->ut3(0, 0, 1)}, {Rat(2), Rat(2)}),
                     {o->identity(), o->ut3(0, 1, 0)}});
    for (auto& c : cases) {
        NormCalculator calc(c.hp, Rat(4));
        const auto ball = grp::sorted_elems(*c.hp.oracle(), enumerate_dilate(c.hp, Rat(2)));
        for (int i = 0; i < 100; ++i) {
            const Elem& g = rng.pick(ball);
            const Elem& h = rng.pick(ball);
            const XRat ng = calc.norm(g), nh = calc.norm(h);
            CHECK(calc.norm(c.hp.oracle()->inv(g)) == ng);
            CHECK(calc.norm(c.hp.oracle()->mul(g, h)) <= ng + nh);
            const XRat xg = calc.norm_x(c.x, g), xh = calc.norm_x(c.x, h);
            CHECK(calc.norm_x(c.x, c.hp.oracle()->inv(g)) == xg);
            CHECK(calc.norm_x(c.x, c.hp.oracle()->mul(g, h)) <= xg + xh);
        }
    }
}

TEST_CASE("normal form: abelian box in C=1 normal form") {
    auto z2 = GroupOracle::lattice(2);
    const Nilprogression p(z2, {z2->from_coords({1, 0}), z2->from_coords({0, 1})}, {Rat(5), Rat(7)});
    const NormalFormReport r = check_normal_form(p, Rat(1));
    CHECK(r.holds_i);
    CHECK(r.holds_ii);
    CHECK(r.holds_iii);
    CHECK(r.p_size == 11ull * 15ull);
}

TEST_CASE("normal form: properness failure produces an exponent-collision witness") {
    auto z = GroupOracle::lattice(1);
    const Nilprogression p(z, {z->from_coords({1}), z->from_coords({2})}, {Rat(4), Rat(4)});
    const NormalFormReport r = check_normal_form(p, Rat(1));
    CHECK(!r.holds_ii);
    CHECK(!r.witness_ii.empty());
    CHECK(!r.holds());
}

TEST_CASE("normal form: Heisenberg P(u,v,w; N,N,N^3) at N=3, C=16") {
    auto o = GroupOracle::unitriangular(3);
    const Nilprogression p(o, {o->ut3(1, 0, 0), o->ut3(0, 0, 1), o->ut3(0, 1, 0)},
                           {Rat(3), Rat(3), Rat(27)});
    const NormalFormReport r = check_normal_form(p, Rat(16));
    CHECK(r.holds_i);
    CHECK(r.holds_ii);
    CHECK(r.holds_iii);
}

TEST_CASE("cap-exceeded enumeration fails deterministically") {
    auto z2 = GroupOracle::lattice(2);
    const Nilprogression p(z2, {z2->from_coords({1, 0}), z2->from_coords({0, 1})}, {Rat(50), Rat(50)});
    EnumCaps caps;
    caps.max_states = 1000;
    unsigned long long first = 0, second = 0;
    try {
        enumerate_dilate(p, Rat(1), caps);
        FAIL("expected CapExceededError");
    } catch (const CapExceededError& e) {
        first = e.partial_count;
    }
    try {
        enumerate_dilate(p, Rat(1), caps);
        FAIL("expected CapExceededError");
    } catch (const CapExceededError& e) {
        second = e.partial_count;
    }
    CHECK(first == second);
    CHECK(first > 0);
}

TEST_CASE("coset pullback contains H times the quotient enumeration") {
    auto cyc = GroupOracle::cyclic({12});
    const std::vector<Elem> h{cyc->from_coords({0}), cyc->from_coords({4}), cyc->from_coords({8})};
    const CosetNilprogression hp(cyc, h, {cyc->from_coords({1})}, {Rat(1)});
    const ElemSet full = enumerate_dilate(hp, Rat(1));
    // Quotient Z/12 -> Z/4 ball of radius 1 pulls back to 9 elements.
    CHECK(full.size() == 9);
    for (Int v : {0, 1, 11, 4, 5, 3, 8, 9, 7}) CHECK(full.count(cyc->from_coords({v})) == 1);
}

TEST_CASE("progression JSON round-trips") {
    auto o = GroupOracle::unitriangular(3);
    const Nilprogression p(o, {o->ut3(1, 0, 0), o->ut3(0, 0, 1)}, {Rat(2), make_rat(3, 2)});
    const Nilprogression q = Nilprogression::from_json(p.to_json());
    CHECK(q.lengths() == p.lengths());
    CHECK(q.generators() == p.generators());
}

TEST_CASE("normal form check on a coset progression with nontrivial H") {
    auto cyc = GroupOracle::cyclic({12});
    const std::vector<Elem> h{cyc->from_coords({0}), cyc->from_coords({4}), cyc->from_coords({8})};
    // Quotient Z/12 / H = Z/4 with generator 1 and length 1: a C=2 box.
    const CosetNilprogression hp(cyc, h, {cyc->from_coords({1})}, {Rat(1)});
    const NormalFormReport r = check_normal_form(hp, Rat(2));
    CHECK(r.holds_i);
    CHECK(r.holds_ii);
    CHECK(r.holds_iii);
    CHECK(r.p_size == 3);  // quotient representatives: {-1, 0, 1} in Z/4
}

TEST_CASE("rank-zero progressions are the identity singleton") {
    auto z = GroupOracle::lattice(1);
    const Nilprogression p(z, {}, {});
    CHECK(p.rank() == 0);
    CHECK(p.nilpotency_class() == 0);
    CHECK(enumerate_dilate(p, Rat(5)) == ElemSet{z->identity()});
    CHECK(norm_p(p, z->from_coords({1}), Rat(3)).is_inf());
}

TEST_CASE("construction preconditions are enforced") {
    auto z = GroupOracle::lattice(1);
    CHECK_THROWS_AS(Nilprogression(z, {z->from_coords({1})}, {Rat(0)}), std::invalid_argument);
    CHECK_THROWS_AS(Nilprogression(z, {z->from_coords({1})}, {Rat(-2)}), std::invalid_argument);
    auto d = GroupOracle::dihedral_inf();
    // H = {1, reflection} is a subgroup, but the translation generator does
    // not normalize it.
    CHECK_THROWS_AS(CosetNilprogression(d, {d->identity(), d->dihedral(-1, 0)},
                                        {d->dihedral(1, 1)}, {Rat(3)}),
                    std::invalid_argument);
    // X must contain the identity for the virtual seminorm.
    const CosetNilprogression hp(d, {d->identity()}, {d->dihedral(1, 1)}, {Rat(5)});
    NormCalculator calc(hp, Rat(1));
    CHECK_THROWS_AS(calc.norm_x({d->dihedral(-1, 0)}, d->identity()), std::invalid_argument);
    CHECK_THROWS_AS(calc.norm_x({}, d->identity()), std::invalid_argument);
}

TEST_CASE("enumerate_dilate matches exhaustive word search on UT(4)") {
    auto o = GroupOracle::unitriangular(4);
    std::vector<Elem> gens;
    for (int i = 0; i < 3; ++i) {
        std::vector<Rat> u(6, Rat(0));
        u[static_cast<std::size_t>(o->upper_index(i, i + 1))] = 1;
        gens.push_back(o->from_upper(u));
    }
    const Nilprogression p(o, gens, {Rat(1), Rat(1), Rat(1)});
    for (const Rat& t : {Rat(1), Rat(2)}) {
        const Int b = rat_floor(t);
        CHECK(enumerate_dilate(p, t) == brute_force_words(o, gens, {b, b, b}));
    }
}

TEST_CASE("normal form failure witnesses for (i) and (iii)") {
    auto o = GroupOracle::unitriangular(3);
    // Central generator listed first: [u_2, u_3] lands outside the (empty)
    // tail progression, so upper-triangular form fails.
    const Nilprogression wrong_order(o, {o->ut3(0, 1, 0), o->ut3(1, 0, 0), o->ut3(0, 0, 1)},
                                     {Rat(27), Rat(3), Rat(3)});
    const NormalFormReport r1 = check_normal_form(wrong_order, Rat(16));
    CHECK(!r1.holds_i);
    CHECK(!r1.witnesses_i.empty());

    // Duplicate generators undercount against prod(2 floor(N_i) + 1).
    auto z = GroupOracle::lattice(1);
    const Nilprogression dup(z, {z->from_coords({1}), z->from_coords({1})}, {Rat(4), Rat(4)});
    const NormalFormReport r2 = check_normal_form(dup, Rat(1));
    CHECK(!r2.holds_iii);
    CHECK(r2.p_size == 17);
    CHECK(r2.volume_lower == Rat(81));
}
