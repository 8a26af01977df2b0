#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nilgrowth {

// All group arithmetic, lengths and masses are exact rationals.  mpq_class
// canonicalizes on arithmetic, so equal values always have identical
// representations; construction from a num/den pair goes through make_rat.
using Rat = mpq_class;
using Int = long;  // 64-bit on this platform

inline Rat make_rat(long num, long den = 1) {
    if (den == 0) throw std::invalid_argument("make_rat: zero denominator");
    Rat r(num, den);
    r.canonicalize();
    return r;
}

// Parses "p", "p/q" or a plain integer string.
inline Rat rat_from_string(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("rat_from_string: empty string");
    Rat r;
    if (r.set_str(s, 10) != 0)
        throw std::invalid_argument("rat_from_string: bad rational '" + s + "'");
    r.canonicalize();
    return r;
}

inline std::string rat_to_string(const Rat& r) { return r.get_str(); }

// floor(r) as a machine integer; desk-scale values only.
inline Int rat_floor(const Rat& r) {
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
    if (!q.fits_slong_p()) throw std::overflow_error("rat_floor: value out of range");
    return q.get_si();
}

inline Int rat_ceil(const Rat& r) {
    mpz_class q;
    mpz_cdiv_q(q.get_mpz_t(), r.get_num_mpz_t(), r.get_den_mpz_t());
    if (!q.fits_slong_p()) throw std::overflow_error("rat_ceil: value out of range");
    return q.get_si();
}

inline double rat_to_double(const Rat& r) { return r.get_d(); }

// Extended nonnegative rational: value or +infinity.  Norms take values here.
struct XRat {
    bool inf = false;
    Rat v = 0;

    static XRat infinity() { return XRat{true, Rat(0)}; }
    static XRat of(const Rat& r) { return XRat{false, r}; }

    bool is_inf() const { return inf; }

    XRat operator+(const XRat& o) const {
        if (inf || o.inf) return infinity();
        return of(v + o.v);
    }
    bool operator==(const XRat& o) const {
        if (inf != o.inf) return false;
        return inf || v == o.v;
    }
    bool operator<(const XRat& o) const {
        if (inf) return false;
        if (o.inf) return true;
        return v < o.v;
    }
    bool operator<=(const XRat& o) const { return *this < o || *this == o; }

    std::string str() const { return inf ? "inf" : rat_to_string(v); }
};

inline std::uint64_t hash_mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t x) {
    return hash_mix(h ^ (x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t hash_mpz(const mpz_class& z) {
    const mpz_srcptr p = z.get_mpz_t();
    std::uint64_t h = static_cast<std::uint64_t>(mpz_sgn(p)) + 0x517cc1b727220a95ULL;
    const mp_limb_t* limbs = mpz_limbs_read(p);
    const std::size_t n = mpz_size(p);
    for (std::size_t i = 0; i < n; ++i) h = hash_combine(h, static_cast<std::uint64_t>(limbs[i]));
    return h;
}

inline std::uint64_t hash_rat(const Rat& r) {
    return hash_combine(hash_mpz(r.get_num()), hash_mpz(r.get_den()));
}

}  // namespace nilgrowth
