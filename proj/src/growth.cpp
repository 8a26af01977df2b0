#include "nilgrowth/growth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <sstream>

namespace nilgrowth::growth {

using grp::Backend;
using grp::GroupOracle;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Packed enumeration kernel.  Elements whose payload fits in a few machine
// integers (lattice/cyclic/dihedral/cayley, and unitriangular matrices of
// size <= 4 with integer entries) are packed into fixed arrays and expanded
// through an open-addressing set.  Exactness is preserved: entry overflow
// aborts the fast path.

constexpr int kMaxPacked = 6;
using Packed = std::array<Int, kMaxPacked>;

struct PackedHash {
    std::uint64_t operator()(const Packed& p) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (Int x : p) h = hash_combine(h, static_cast<std::uint64_t>(x));
        return h;
    }
};

constexpr Int kOverflowLimit = Int(1) << 40;

class PackedOps {
  public:
    explicit PackedOps(const GroupOracle& o) : o_(o) {
        switch (o.backend()) {
            case Backend::Lattice:
            case Backend::Cyclic:
                n_ = o.rank();
                break;
            case Backend::Dihedral:
                n_ = 2;
                break;
            case Backend::Cayley:
                n_ = 1;
                break;
            case Backend::Unitriangular:
                n_ = o.matrix_size() * (o.matrix_size() - 1) / 2;
                break;
        }
        usable_ = n_ <= kMaxPacked;
    }

    bool usable() const { return usable_; }

    bool pack(const Elem& e, Packed& out) const {
        if (!usable_) return false;
        out.fill(0);
        if (o_.backend() == Backend::Unitriangular) {
            for (int t = 0; t < n_; ++t) {
                const Rat& r = e.rm[static_cast<std::size_t>(t)];
                if (r.get_den() != 1) return false;
                if (!r.get_num().fits_slong_p()) return false;
                const Int v = r.get_num().get_si();
                if (v >= kOverflowLimit || v <= -kOverflowLimit) return false;
                out[static_cast<std::size_t>(t)] = v;
            }
        } else {
            for (int t = 0; t < n_; ++t) out[static_cast<std::size_t>(t)] = e.iv[static_cast<std::size_t>(t)];
        }
        return true;
    }

    // mul; returns false on (unitriangular) overflow risk.
    bool mul(const Packed& a, const Packed& b, Packed& r) const {
        switch (o_.backend()) {
            case Backend::Lattice:
                for (int t = 0; t < n_; ++t) r[static_cast<std::size_t>(t)] = a[static_cast<std::size_t>(t)] + b[static_cast<std::size_t>(t)];
                break;
            case Backend::Cyclic:
                for (int t = 0; t < n_; ++t) {
                    Int v = (a[static_cast<std::size_t>(t)] + b[static_cast<std::size_t>(t)]) % o_.moduli()[static_cast<std::size_t>(t)];
                    r[static_cast<std::size_t>(t)] = v < 0 ? v + o_.moduli()[static_cast<std::size_t>(t)] : v;
                }
                break;
            case Backend::Dihedral:
                r[0] = a[0] * b[0];
                r[1] = a[0] * b[1] + a[1];
                break;
            case Backend::Cayley:
                r[0] = o_.mul(mk_cayley(a), mk_cayley(b)).iv[0];
                break;
            case Backend::Unitriangular: {
                const int k = o_.matrix_size();
                auto idx = [k](int i, int j) { return i * (2 * k - i - 1) / 2 + (j - i - 1); };
                for (int i = 0; i < k; ++i)
                    for (int j = i + 1; j < k; ++j) {
                        Int s = a[static_cast<std::size_t>(idx(i, j))] + b[static_cast<std::size_t>(idx(i, j))];
                        for (int l = i + 1; l < j; ++l) s += a[static_cast<std::size_t>(idx(i, l))] * b[static_cast<std::size_t>(idx(l, j))];
                        if (s >= kOverflowLimit || s <= -kOverflowLimit) return false;
                        r[static_cast<std::size_t>(idx(i, j))] = s;
                    }
                break;
            }
        }
        if (n_ < kMaxPacked)
            for (int t = n_; t < kMaxPacked; ++t) r[static_cast<std::size_t>(t)] = 0;
        return true;
    }

  private:
    Elem mk_cayley(const Packed& p) const {
        Elem e;
        e.oracle = &o_;
        e.iv = {p[0]};
        return e;
    }
    const GroupOracle& o_;
    int n_ = 0;
    bool usable_ = false;
};

// Insert-only open-addressing set over Packed keys.
class FlatSet {
  public:
    FlatSet() { rehash(1 << 12); }

    bool insert(const Packed& key) {
        if (2 * (size_ + 1) > slots_.size()) rehash(slots_.size() * 2);
        std::size_t i = PackedHash{}(key) & mask_;
        while (used_[i]) {
            if (slots_[i] == key) return false;
            i = (i + 1) & mask_;
        }
        slots_[i] = key;
        used_[i] = true;
        ++size_;
        return true;
    }

    std::size_t size() const { return size_; }

  private:
    void rehash(std::size_t cap) {
        std::vector<Packed> old_slots = std::move(slots_);
        std::vector<bool> old_used = std::move(used_);
        slots_.assign(cap, Packed{});
        used_.assign(cap, false);
        mask_ = cap - 1;
        std::size_t old_size = size_;
        size_ = 0;
        for (std::size_t i = 0; i < old_slots.size(); ++i)
            if (old_used[i]) insert(old_slots[i]);
        (void)old_size;
    }

    std::vector<Packed> slots_;
    std::vector<bool> used_;
    std::size_t mask_ = 0;
    std::size_t size_ = 0;
};

std::vector<Elem> symmetrized(const GroupOracle& o, const std::vector<Elem>& a, bool symmetrize) {
    ElemSet s(a.begin(), a.end());
    if (symmetrize) {
        s.insert(o.identity());
        for (const Elem& g : a) s.insert(o.inv(g));
    }
    std::vector<Elem> out(s.begin(), s.end());
    std::sort(out.begin(), out.end(), [&o](const Elem& x, const Elem& y) { return o.cmp(x, y) < 0; });
    return out;
}

// Fast-path frontier expansion (identity in base); returns nullopt when the
// payloads cannot be packed, in which case the generic path runs.
std::optional<GrowthSeries> packed_series(const GroupOracle& o, const std::vector<Elem>& base, int n_max,
                                          const EnumCaps& caps) {
    PackedOps ops(o);
    if (!ops.usable()) return std::nullopt;
    std::vector<Packed> pbase(base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        if (!ops.pack(base[i], pbase[i])) return std::nullopt;

    GrowthSeries series;
    FlatSet set;
    std::vector<Packed> frontier;
    for (const Packed& p : pbase)
        if (set.insert(p)) frontier.push_back(p);
    series.entries.emplace_back(1, set.size());
    for (int n = 2; n <= n_max; ++n) {
        std::vector<Packed> next;
        Packed prod;
        for (const Packed& f : frontier)
            for (const Packed& b : pbase) {
                if (!ops.mul(f, b, prod)) return std::nullopt;  // overflow: fall back
                if (set.insert(prod)) {
                    next.push_back(prod);
                    if (set.size() > caps.max_states) {
                        series.truncated = true;
                        return series;
                    }
                }
            }
        frontier = std::move(next);
        series.entries.emplace_back(n, set.size());
    }
    return series;
}

}  // namespace

std::optional<unsigned long long> GrowthSeries::card_at(Int n) const {
    for (const auto& [m, c] : entries)
        if (m == n) return c;
    return std::nullopt;
}

GrowthSeries product_set_series(const OraclePtr& oracle, const std::vector<Elem>& a, bool symmetrize,
                                int n_max, const EnumCaps& caps) {
    if (a.empty()) throw std::invalid_argument("product_set_series: empty base set");
    if (n_max < 1) throw std::invalid_argument("product_set_series: n_max must be >= 1");
    const GroupOracle& o = *oracle;
    const std::vector<Elem> base = symmetrized(o, a, symmetrize);
    const bool has_identity =
        std::any_of(base.begin(), base.end(), [&o](const Elem& g) { return o.is_identity(g); });

    if (has_identity) {
        if (auto fast = packed_series(o, base, n_max, caps)) return *fast;
        // Generic frontier expansion: A^{n+1} = A^n u frontier*A.
        GrowthSeries series;
        ElemSet set(base.begin(), base.end());
        std::vector<Elem> frontier(set.begin(), set.end());
        series.entries.emplace_back(1, set.size());
        for (int n = 2; n <= n_max; ++n) {
            std::vector<Elem> next;
            for (const Elem& f : frontier)
                for (const Elem& b : base) {
                    Elem prod = o.mul(f, b);
                    if (set.insert(prod).second) {
                        next.push_back(std::move(prod));
                        if (set.size() > caps.max_states) {
                            series.truncated = true;
                            return series;
                        }
                    }
                }
            frontier = std::move(next);
            series.entries.emplace_back(n, set.size());
        }
        return series;
    }

    // No identity: plain iterated products (sets need not be nested).
    GrowthSeries series;
    ElemSet cur(base.begin(), base.end());
    series.entries.emplace_back(1, cur.size());
    for (int n = 2; n <= n_max; ++n) {
        ElemSet next;
        for (const Elem& g : cur)
            for (const Elem& b : base) {
                next.insert(o.mul(g, b));
                if (next.size() > caps.max_states) {
                    series.truncated = true;
                    return series;
                }
            }
        cur = std::move(next);
        series.entries.emplace_back(n, cur.size());
    }
    return series;
}

ElemSet product_power_set(const OraclePtr& oracle, const std::vector<Elem>& a, int k, const EnumCaps& caps) {
    if (k < 1) throw std::invalid_argument("product_power_set: k must be >= 1");
    const GroupOracle& o = *oracle;
    const bool has_identity = std::any_of(a.begin(), a.end(), [&o](const Elem& g) { return o.is_identity(g); });
    ElemSet cur(a.begin(), a.end());
    if (has_identity) {
        std::vector<Elem> frontier(cur.begin(), cur.end());
        for (int n = 2; n <= k; ++n) {
            std::vector<Elem> next;
            for (const Elem& f : frontier)
                for (const Elem& b : a) {
                    Elem prod = o.mul(f, b);
                    if (cur.insert(prod).second) {
                        next.push_back(std::move(prod));
                        if (cur.size() > caps.max_states)
                            throw CapExceededError("product_power_set: cap exceeded", cur.size(), cur.size());
                    }
                }
            frontier = std::move(next);
        }
        return cur;
    }
    for (int n = 2; n <= k; ++n) {
        ElemSet next;
        for (const Elem& g : cur)
            for (const Elem& b : a) {
                next.insert(o.mul(g, b));
                if (next.size() > caps.max_states)
                    throw CapExceededError("product_power_set: cap exceeded", next.size(), next.size());
            }
        cur = std::move(next);
    }
    return cur;
}

PolyCheck polynomial_growth_check(const GrowthSeries& s, Int n, int d) {
    const auto an = s.card_at(n);
    const auto a1 = s.card_at(1);
    if (!an || !a1) throw std::invalid_argument("polynomial_growth_check: index missing from series");
    mpz_class bound;
    mpz_ui_pow_ui(bound.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(d));
    bound *= static_cast<unsigned long>(*a1);
    PolyCheck r;
    r.ok = mpz_cmp_ui(bound.get_mpz_t(), static_cast<unsigned long>(*an)) >= 0;
    r.margin = mpz_get_d(bound.get_mpz_t()) / static_cast<double>(*an);
    return r;
}

double stability_constant(const GrowthSeries& s) {
    if (s.entries.size() < 3) throw std::invalid_argument("stability_constant: need at least 3 entries");
    double best = 1.0;
    for (const auto& [m, cm] : s.entries) {
        for (Int k = 2;; ++k) {
            const auto ckm = s.card_at(k * m);
            if (!ckm) break;
            best = std::max(best, std::pow(static_cast<double>(*ckm) / static_cast<double>(cm), 1.0 / static_cast<double>(k)));
        }
    }
    return best;
}

double GrowthPolynomial::log10_eval(double m) const {
    // log10 of sum c_i m^d_i via max + log1p aggregation; exact enough at desk scale.
    double best = -1e300;
    for (const auto& [c, d] : terms) best = std::max(best, std::log10(rat_to_double(c)) + d * std::log10(m));
    double acc = 0.0;
    for (const auto& [c, d] : terms)
        acc += std::pow(10.0, std::log10(rat_to_double(c)) + d * std::log10(m) - best);
    return best + std::log10(acc);
}

json GrowthPolynomial::to_json() const {
    json terms_j = json::array();
    for (const auto& [c, d] : terms) terms_j.push_back({{"coefficient", rat_to_string(c)}, {"degree", d}});
    return {{"terms", terms_j}};
}

GrowthPolynomial predict_volume_polynomial(const lie::WordTable& table, const lie::AlphaMatrix& alpha,
                                           const std::vector<Rat>& lengths) {
    const int k = table.size();
    const int r = table.rank();
    if (k < r) throw std::invalid_argument("predict_volume_polynomial: k < r");
    if (static_cast<int>(alpha.rows.size()) != k) throw std::invalid_argument("predict_volume_polynomial: alpha size mismatch");
    {
        // Desk-scale guard on the subset enumeration.
        double combos = 1;
        for (int i = 0; i < r; ++i) combos *= static_cast<double>(k - i) / (i + 1);
        if (combos > 2e6) throw std::invalid_argument("predict_volume_polynomial: too many word subsets");
    }
    // Weights recomputed against the supplied lengths (the table may have been
    // built with different ones).
    std::vector<Rat> w(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) w[static_cast<std::size_t>(i)] = lie::weight(table.words[static_cast<std::size_t>(i)], lengths);

    std::map<int, Rat> by_degree;
    std::vector<int> sel(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) sel[static_cast<std::size_t>(i)] = i;
    while (true) {
        linalg::RatMat sub;
        for (int i : sel) sub.push_back(alpha.rows[static_cast<std::size_t>(i)]);
        const Rat d = linalg::det(sub);
        if (d != 0) {
            Rat coeff = d < 0 ? Rat(-d) : d;
            int degree = 0;
            for (int i : sel) {
                coeff *= w[static_cast<std::size_t>(i)];
                degree += table.lengths[static_cast<std::size_t>(i)];
            }
            by_degree[degree] += coeff;
        }
        // Next r-combination of {0..k-1}.
        int i = r - 1;
        while (i >= 0 && sel[static_cast<std::size_t>(i)] == k - r + i) --i;
        if (i < 0) break;
        ++sel[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < r; ++j) sel[static_cast<std::size_t>(j)] = sel[static_cast<std::size_t>(j - 1)] + 1;
    }
    GrowthPolynomial v;
    for (auto& [deg, c] : by_degree)
        if (c != 0) v.terms.emplace_back(c, deg);
    if (v.terms.empty()) throw std::invalid_argument("predict_volume_polynomial: vanishing polynomial");
    return v;
}

double PiecewiseLinearProfile::value(double x) const {
    double f = 0.0;
    for (std::size_t i = 0; i < slopes.size(); ++i) {
        const double lo = breakpoints[i];
        const double hi = i + 1 < breakpoints.size() ? breakpoints[i + 1] : x;
        if (x <= lo) break;
        const double seg_end = std::min(x, hi);
        f += slopes[i] * (seg_end - lo);
        if (x <= hi) break;
    }
    return f;
}

json PiecewiseLinearProfile::to_json() const {
    return {{"breakpoints", breakpoints}, {"slopes", slopes}};
}

PiecewiseLinearProfile tropicalize(const GrowthPolynomial& v) {
    if (v.terms.empty()) throw std::invalid_argument("tropicalize: empty polynomial");
    // Lines y = log10 c + d x, upper envelope on x >= 0.
    struct Line {
        double intercept;
        int slope;
    };
    std::vector<Line> lines;
    for (const auto& [c, d] : v.terms) lines.push_back({std::log10(rat_to_double(c)), d});
    // terms have distinct ascending degrees already
    std::vector<Line> hull;
    std::vector<double> start;  // x at which hull[i] becomes active
    for (const Line& l : lines) {
        double x0 = -1e300;
        while (!hull.empty()) {
            const Line& p = hull.back();
            // intersection with previous line
            const double xi = (p.intercept - l.intercept) / static_cast<double>(l.slope - p.slope);
            if (xi <= start.back()) {
                hull.pop_back();
                start.pop_back();
                continue;
            }
            x0 = xi;
            break;
        }
        if (hull.empty()) x0 = -1e300;
        hull.push_back(l);
        start.push_back(x0);
    }
    // Clip to x >= 0.
    std::size_t first = 0;
    while (first + 1 < hull.size() && start[first + 1] <= 0.0) ++first;
    PiecewiseLinearProfile f;
    f.breakpoints.push_back(0.0);
    f.slopes.push_back(hull[first].slope);
    for (std::size_t i = first + 1; i < hull.size(); ++i) {
        f.breakpoints.push_back(start[i]);
        f.slopes.push_back(hull[i].slope);
    }
    return f;
}

FitResult fit_profile(const GrowthSeries& s, Int base_index, int max_pieces, int max_slope) {
    if (max_pieces < 1 || max_slope < 0) throw std::invalid_argument("fit_profile: bad constraints");
    const auto base = s.card_at(base_index);
    if (!base) throw std::invalid_argument("fit_profile: base index missing from series");
    std::vector<double> xs, ys;
    for (const auto& [n, c] : s.entries) {
        if (n % base_index != 0) continue;
        const Int m = n / base_index;
        xs.push_back(std::log10(static_cast<double>(m)));
        ys.push_back(std::log10(static_cast<double>(c)) - std::log10(static_cast<double>(*base)));
    }
    const int ns = static_cast<int>(xs.size());
    if (ns < 2) throw std::invalid_argument("fit_profile: need at least two samples");
    if (ns > 200 || (ns > 80 && max_pieces > 3))
        throw std::invalid_argument("fit_profile: constraints too large for the exhaustive fit");
    if (std::abs(xs[0]) > 1e-12) throw std::invalid_argument("fit_profile: m = 1 sample required");

    double best_dev = 1e300;
    std::vector<int> best_slopes;
    std::vector<int> best_breaks;

    std::vector<int> slopes(static_cast<std::size_t>(max_pieces));
    std::vector<int> breaks(static_cast<std::size_t>(max_pieces));

    // Evaluates the candidate; returns its sup deviation or +inf when pruned
    // against the current best.
    auto eval = [&](int q) -> double {
        double dev = 0.0, f = 0.0, prevx = xs[0];
        int seg = 0;
        for (int i = 1; i < ns; ++i) {
            while (seg < q - 1 && xs[static_cast<std::size_t>(breaks[static_cast<std::size_t>(seg)])] <= xs[static_cast<std::size_t>(i)]) {
                f += slopes[static_cast<std::size_t>(seg)] * (xs[static_cast<std::size_t>(breaks[static_cast<std::size_t>(seg)])] - prevx);
                prevx = xs[static_cast<std::size_t>(breaks[static_cast<std::size_t>(seg)])];
                ++seg;
            }
            f += slopes[static_cast<std::size_t>(seg)] * (xs[static_cast<std::size_t>(i)] - prevx);
            prevx = xs[static_cast<std::size_t>(i)];
            dev = std::max(dev, std::abs(f - ys[static_cast<std::size_t>(i)]));
            if (dev >= best_dev - 1e-12) return 1e300;
        }
        return dev;
    };

    // Breakpoint combinations (indices into xs, interior) in lex order.
    auto search_breaks = [&](int q, auto&& self, int pos, int from) -> void {
        if (pos == q - 1) {
            const double dev = eval(q);
            if (dev < best_dev - 1e-12) {
                best_dev = dev;
                best_slopes.assign(slopes.begin(), slopes.begin() + q);
                best_breaks.assign(breaks.begin(), breaks.begin() + (q - 1));
            }
            return;
        }
        for (int b = from; b <= ns - 2; ++b) {
            breaks[static_cast<std::size_t>(pos)] = b;
            self(q, self, pos + 1, b + 1);
        }
    };

    auto search_slopes = [&](int q, auto&& self, int pos) -> void {
        if (pos == q) {
            search_breaks(q, search_breaks, 0, 1);
            return;
        }
        for (int sl = 0; sl <= max_slope; ++sl) {
            if (pos > 0 && sl == slopes[static_cast<std::size_t>(pos - 1)]) continue;
            slopes[static_cast<std::size_t>(pos)] = sl;
            self(q, self, pos + 1);
        }
    };

    for (int q = 1; q <= max_pieces; ++q) {
        if (q - 1 > ns - 2) break;
        search_slopes(q, search_slopes, 0);
    }

    FitResult r;
    r.sup_deviation = best_dev;
    r.profile.breakpoints.push_back(0.0);
    for (std::size_t i = 0; i + 1 < best_slopes.size(); ++i)
        r.profile.breakpoints.push_back(xs[static_cast<std::size_t>(best_breaks[i])]);
    r.profile.slopes = best_slopes;
    return r;
}

GrowthSeries closed_form_cyclic_box_series(const std::vector<Int>& moduli, const std::vector<Int>& bounds,
                                           int m_max) {
    if (moduli.size() != bounds.size()) throw std::invalid_argument("closed_form_cyclic_box_series: arity mismatch");
    GrowthSeries s;
    for (int m = 1; m <= m_max; ++m) {
        unsigned long long card = 1;
        for (std::size_t i = 0; i < moduli.size(); ++i)
            card *= static_cast<unsigned long long>(std::min<Int>(2 * bounds[i] * m + 1, moduli[i]));
        s.entries.emplace_back(m, card);
    }
    return s;
}

bool SandwichReport::all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.lower_ok && r.upper_ok; });
}

json SandwichReport::to_json() const {
    json rows_j = json::array();
    for (const Row& r : rows)
        rows_j.push_back({{"m", r.m},
                          {"lower_ok", r.lower_ok},
                          {"upper_ok", r.upper_ok},
                          {"witness_lower", r.witness_lower},
                          {"witness_upper", r.witness_upper}});
    return {{"rows", rows_j}, {"all_ok", all_ok()}};
}

SandwichReport check_control_sandwich(const OraclePtr& oracle, const std::vector<Elem>& a,
                                      const nilprog::CosetNilprogression& hp, const std::vector<Elem>& x,
                                      Int n, Int C, const std::vector<Int>& m_values, const EnumCaps& caps) {
    const GroupOracle& o = *oracle;
    const std::vector<Elem> s_base = symmetrized(o, a, true);
    SandwichReport report;
    for (Int m : m_values) {
        SandwichReport::Row row;
        row.m = m;
        const ElemSet hp_m = enumerate_dilate(hp, Rat(static_cast<long>(m)), caps);
        const ElemSet s_pow = product_power_set(oracle, s_base, static_cast<int>(C * m * n), caps);
        const ElemSet hp_big = enumerate_dilate(hp, Rat(static_cast<long>(C * C * m)), caps);
        ElemSet x_hp;
        for (const Elem& xe : x)
            for (const Elem& he : hp_big) x_hp.insert(o.mul(xe, he));

        row.lower_ok = true;
        for (const Elem& g : hp_m)
            if (s_pow.find(g) == s_pow.end()) {
                row.lower_ok = false;
                row.witness_lower = o.to_string(g);
                break;
            }
        row.upper_ok = true;
        for (const Elem& g : s_pow)
            if (x_hp.find(g) == x_hp.end()) {
                row.upper_ok = false;
                row.witness_upper = o.to_string(g);
                break;
            }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace nilgrowth::growth
