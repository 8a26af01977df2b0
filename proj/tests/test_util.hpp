#pragma once

#include "nilgrowth/group.hpp"
#include "nilgrowth/rng.hpp"

namespace testutil {

using nilgrowth::Int;
using nilgrowth::Rat;
using nilgrowth::SplitMix64;
using nilgrowth::grp::Elem;
using nilgrowth::grp::GroupOracle;
using nilgrowth::grp::OraclePtr;

// Random element with small payload, per backend.
inline Elem random_elem(const OraclePtr& o, SplitMix64& rng, Int bound = 6) {
    using nilgrowth::grp::Backend;
    switch (o->backend()) {
        case Backend::Lattice: {
            std::vector<Int> c(static_cast<std::size_t>(o->rank()));
            for (auto& x : c) x = rng.range(-bound, bound);
            return o->from_coords(c);
        }
        case Backend::Cyclic: {
            std::vector<Int> c(static_cast<std::size_t>(o->rank()));
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.range(0, o->moduli()[i] - 1);
            return o->from_coords(c);
        }
        case Backend::Dihedral:
            return o->dihedral(rng.coin() ? 1 : -1, rng.range(-bound, bound));
        case Backend::Unitriangular: {
            const int k = o->matrix_size();
            std::vector<Rat> u(static_cast<std::size_t>(k * (k - 1) / 2));
            for (auto& x : u) x = nilgrowth::make_rat(rng.range(-bound, bound), rng.range(1, 3));
            return o->from_upper(u);
        }
        case Backend::Cayley:
            return o->from_coords({static_cast<Int>(rng.below(static_cast<std::uint64_t>(o->order())))});
    }
    throw std::logic_error("unreachable");
}

inline std::vector<OraclePtr> all_backends() {
    return {GroupOracle::lattice(2), GroupOracle::cyclic({12, 30}), GroupOracle::dihedral_inf(),
            GroupOracle::unitriangular(3), GroupOracle::cayley_dihedral(8)};
}

}  // namespace testutil
