#include "nilgrowth/scenario.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "nilgrowth/growth.hpp"
#include "nilgrowth/io.hpp"
#include "nilgrowth/lo.hpp"
#include "nilgrowth/measures.hpp"
#include "nilgrowth/nilprog.hpp"
#include "nilgrowth/rng.hpp"

namespace nilgrowth::scenario {

using grp::Elem;
using grp::GroupOracle;
using grp::OraclePtr;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict config access: unknown keys are rejected.

class Strict {
  public:
    Strict(const json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
        if (!j_.is_object()) throw ParseError(ctx_ + ": expected an object");
    }

    const json& at(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ParseError(ctx_ + ": missing key '" + key + "'");
        return j_.at(key);
    }

    template <class T>
    T get(const std::string& key) {
        try {
            return at(key).get<T>();
        } catch (const json::exception& e) {
            throw ParseError(ctx_ + ": bad value for '" + key + "': " + e.what());
        }
    }

    template <class T>
    T get_or(const std::string& key, T def) {
        used_.insert(key);
        if (!j_.contains(key)) return def;
        return get<T>(key);
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }

    void finish() {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (used_.find(it.key()) == used_.end())
                throw ParseError(ctx_ + ": unknown key '" + it.key() + "'");
    }

  private:
    const json& j_;
    std::string ctx_;
    std::set<std::string> used_;
};

Rat rat_field(Strict& s, const std::string& key) {
    const json& v = s.at(key);
    if (v.is_number_integer()) return Rat(v.get<long>());
    if (v.is_string()) return rat_from_string(v.get<std::string>());
    throw ParseError("field '" + key + "' must be an integer or a rational string");
}

void strict_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw ParseError(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (allowed.find(it.key()) == allowed.end()) throw ParseError(ctx + ": unknown key '" + it.key() + "'");
}

OraclePtr parse_group(const json& j) {
    static const std::map<std::string, std::set<std::string>> allowed = {
        {"lattice", {"kind", "rank"}},
        {"cyclic", {"kind", "moduli"}},
        {"dihedral_inf", {"kind"}},
        {"unitriangular", {"kind", "k"}},
        {"cayley_table", {"kind", "table"}},
        {"cayley_cyclic", {"kind", "q"}},
        {"cayley_dihedral", {"kind", "rotations"}},
    };
    if (!j.is_object() || !j.contains("kind")) throw ParseError("group: missing kind");
    const std::string kind = j.at("kind").get<std::string>();
    auto it = allowed.find(kind);
    if (it == allowed.end()) throw ParseError("group: unknown kind '" + kind + "'");
    strict_keys(j, it->second, "group");
    return GroupOracle::from_json(j);
}

Elem parse_elem(const OraclePtr& o, const json& j) {
    static const std::map<std::string, std::set<std::string>> allowed = {
        {"lattice", {"backend", "coords"}},
        {"cyclic", {"backend", "residues"}},
        {"dihedral", {"backend", "sign", "shift"}},
        {"unitriangular", {"backend", "k", "upper"}},
        {"cayley", {"backend", "index"}},
    };
    if (!j.is_object() || !j.contains("backend")) throw ParseError("element: missing backend");
    auto it = allowed.find(j.at("backend").get<std::string>());
    if (it == allowed.end()) throw ParseError("element: unknown backend");
    strict_keys(j, it->second, "element");
    return o->elem_from_json(j);
}

std::vector<Elem> parse_elems(const OraclePtr& o, const json& arr) {
    std::vector<Elem> out;
    for (const auto& e : arr) out.push_back(parse_elem(o, e));
    return out;
}

// Explicit finite sets: boxes per backend or element lists.
std::vector<Elem> parse_set(const OraclePtr& o, const json& j) {
    Strict s(j, "set");
    const std::string kind = s.get<std::string>("kind");
    std::vector<Elem> out;
    if (kind == "lattice_box" || kind == "cyclic_box") {
        const auto bounds = s.get<std::vector<Int>>("bounds");
        s.finish();
        if (static_cast<int>(bounds.size()) != o->rank()) throw ParseError("set: bounds arity mismatch");
        std::vector<Int> idx(bounds.size(), 0);
        bool done = false;
        while (!done) {
            std::vector<Int> coords(bounds.size());
            for (std::size_t i = 0; i < bounds.size(); ++i) coords[i] = idx[i] - bounds[i];
            out.push_back(o->from_coords(coords));
            done = true;
            std::size_t i = bounds.size();
            while (i > 0) {
                --i;
                if (idx[i] < 2 * bounds[i]) {
                    ++idx[i];
                    for (std::size_t k = i + 1; k < bounds.size(); ++k) idx[k] = 0;
                    done = false;
                    break;
                }
            }
        }
        return out;
    }
    if (kind == "ut_box") {
        // Integer box over the strict upper entries: |entry_t| <= bounds[t].
        const auto bounds = s.get<std::vector<Int>>("bounds");
        s.finish();
        const int k = o->matrix_size();
        if (static_cast<int>(bounds.size()) != k * (k - 1) / 2) throw ParseError("set: ut bounds arity mismatch");
        std::vector<Int> idx(bounds.size(), 0);
        bool done = false;
        while (!done) {
            std::vector<Rat> upper(bounds.size());
            for (std::size_t i = 0; i < bounds.size(); ++i) upper[i] = Rat(static_cast<long>(idx[i] - bounds[i]));
            out.push_back(o->from_upper(std::move(upper)));
            done = true;
            std::size_t i = bounds.size();
            while (i > 0) {
                --i;
                if (idx[i] < 2 * bounds[i]) {
                    ++idx[i];
                    for (std::size_t k2 = i + 1; k2 < bounds.size(); ++k2) idx[k2] = 0;
                    done = false;
                    break;
                }
            }
        }
        return out;
    }
    if (kind == "dihedral_ball") {
        const Int b = s.get<Int>("shift_bound");
        s.finish();
        for (Int sh = -b; sh <= b; ++sh) {
            out.push_back(o->dihedral(1, sh));
            out.push_back(o->dihedral(-1, sh));
        }
        return out;
    }
    if (kind == "elements") {
        const json items = s.at("items");
        s.finish();
        return parse_elems(o, items);
    }
    throw ParseError("set: unknown kind '" + kind + "'");
}

nilprog::CosetNilprogression parse_progression(const OraclePtr& o, const json& j) {
    Strict s(j, "progression");
    std::vector<Elem> gens = parse_elems(o, s.at("generators"));
    std::vector<Rat> lengths;
    for (const auto& l : s.at("lengths"))
        lengths.push_back(l.is_string() ? rat_from_string(l.get<std::string>()) : Rat(l.get<long>()));
    std::vector<Elem> h;
    if (s.has("subgroup")) h = parse_elems(o, s.at("subgroup"));
    s.finish();
    return nilprog::CosetNilprogression(o, std::move(h), std::move(gens), std::move(lengths));
}

meas::FiniteMeasure parse_measure(const OraclePtr& o, const json& j) {
    Strict s(j, "measure");
    const std::string kind = s.get<std::string>("kind");
    if (kind == "uniform_on_set") {
        const json set = s.at("set");
        s.finish();
        return meas::FiniteMeasure::uniform(o, parse_set(o, set));
    }
    if (kind == "explicit") {
        json inner;
        inner["mode"] = s.get_or<std::string>("mode", "rational");
        inner["entries"] = s.at("entries");
        s.finish();
        return meas::FiniteMeasure::from_json(o, inner);
    }
    throw ParseError("measure: unknown kind '" + kind + "'");
}

Rat poly_eval_rat(const growth::GrowthPolynomial& v, Int m) {
    Rat total(0);
    for (const auto& [c, d] : v.terms) {
        Rat term = c;
        for (int i = 0; i < d; ++i) term *= m;
        total += term;
    }
    return total;
}

struct Ctx {
    std::filesystem::path out_dir;
    EnumCaps caps;
    std::optional<std::uint64_t> seed_override;
    std::optional<long> trials_override;
};

std::uint64_t require_seed(Strict& s, const Ctx& ctx) {
    if (ctx.seed_override) {
        s.has("seed");  // consume if present
        return *ctx.seed_override;
    }
    if (!s.has("seed")) throw ParseError("seed is mandatory for randomized scenarios");
    return s.get<std::uint64_t>("seed");
}

void write_json(const Ctx& ctx, const std::string& name, const json& j) {
    io::atomic_write(ctx.out_dir / (name + ".json"), j.dump(2) + "\n");
}

void write_csv(const Ctx& ctx, const std::string& name, const io::Csv& csv) {
    io::atomic_write(ctx.out_dir / (name + ".csv"), csv.str());
}

// ---------------------------------------------------------------------------
// Handlers.  Each returns the exit code.

int run_grow(Strict& s, const std::string& name, const Ctx& ctx) {
    const OraclePtr o = parse_group(s.at("group"));
    const std::vector<Elem> set = parse_set(o, s.at("set"));
    const bool symmetrize = s.get_or<bool>("symmetrize", true);
    const int n_max = s.get<int>("n_max");
    std::optional<std::pair<Int, int>> check;
    if (s.has("check")) {
        Strict c(s.at("check"), "check");
        check = {c.get<Int>("n"), c.get<int>("d")};
        c.finish();
    }
    const bool want_stability = s.get_or<bool>("stability", false);
    s.finish();

    const growth::GrowthSeries series = growth::product_set_series(o, set, symmetrize, n_max, ctx.caps);
    io::Csv csv({"n", "cardinality"});
    for (const auto& [n, c] : series.entries) csv.row({std::to_string(n), std::to_string(c)});
    write_csv(ctx, name, csv);

    json j;
    j["truncated"] = series.truncated;
    if (check && !series.truncated) {
        const growth::PolyCheck pc = growth::polynomial_growth_check(series, check->first, check->second);
        j["polynomial_growth_check"] = {{"n", check->first}, {"d", check->second}, {"ok", pc.ok}, {"margin", pc.margin}};
    }
    if (want_stability && series.entries.size() >= 3)
        j["stability_constant"] = growth::stability_constant(series);
    write_json(ctx, name, j);
    return series.truncated ? kExitCap : kExitOk;
}

int run_profile(Strict& s, const std::string& name, const Ctx& ctx) {
    std::optional<growth::GrowthSeries> series;
    if (s.has("series")) {
        Strict ss(s.at("series"), "series");
        const std::string source = ss.get<std::string>("source");
        if (source == "enumerate") {
            const OraclePtr o = parse_group(ss.at("group"));
            const std::vector<Elem> set = parse_set(o, ss.at("set"));
            const bool symmetrize = ss.get_or<bool>("symmetrize", true);
            const int n_max = ss.get<int>("n_max");
            ss.finish();
            series = growth::product_set_series(o, set, symmetrize, n_max, ctx.caps);
        } else if (source == "closed_form_cyclic_box") {
            const auto moduli = ss.get<std::vector<Int>>("moduli");
            const auto bounds = ss.get<std::vector<Int>>("bounds");
            const int m_max = ss.get<int>("m_max");
            ss.finish();
            series = growth::closed_form_cyclic_box_series(moduli, bounds, m_max);
        } else {
            throw ParseError("series: unknown source '" + source + "'");
        }
    }

    std::optional<growth::GrowthPolynomial> poly;
    std::optional<growth::PiecewiseLinearProfile> predicted;
    std::optional<lie::WordTable> word_table;
    if (s.has("predict")) {
        Strict sp(s.at("predict"), "predict");
        const int k = sp.get<int>("k");
        std::vector<lie::NilMatrix> gens;
        for (const auto& gj : sp.at("generators")) {
            lie::NilMatrix m = lie::NilMatrix::zero(k);
            std::size_t t = 0;
            for (const auto& entry : gj) {
                if (t >= m.upper.size()) throw ParseError("predict: generator entry overflow");
                m.upper[t++] = entry.is_string() ? rat_from_string(entry.get<std::string>()) : Rat(entry.get<long>());
            }
            if (t != m.upper.size()) throw ParseError("predict: generator entry count");
            gens.push_back(std::move(m));
        }
        std::vector<Rat> lengths;
        for (const auto& l : sp.at("lengths"))
            lengths.push_back(l.is_string() ? rat_from_string(l.get<std::string>()) : Rat(l.get<long>()));
        sp.finish();
        word_table = lie::enumerate_words(gens, lengths);
        const lie::AlphaMatrix alpha = lie::alpha_coeffs(*word_table);
        poly = growth::predict_volume_polynomial(*word_table, alpha, lengths);
        predicted = growth::tropicalize(*poly);
    }

    std::optional<growth::FitResult> fit;
    Int base_index = 1;
    if (s.has("fit")) {
        if (!series) throw ParseError("fit requires a series");
        Strict sf(s.at("fit"), "fit");
        base_index = sf.get_or<Int>("base_index", 1);
        const int max_pieces = sf.get<int>("max_pieces");
        const int max_slope = sf.get<int>("max_slope");
        sf.finish();
        // A truncated series still emits its partial artifacts, but fitting
        // against it would be meaningless.
        if (!series->truncated) fit = growth::fit_profile(*series, base_index, max_pieces, max_slope);
    }
    const bool band_check = s.get_or<bool>("band_check", false) && series && !series->truncated;
    s.finish();

    json j;
    if (predicted) {
        j["predicted"] = predicted->to_json();
        j["volume_polynomial"] = poly->to_json();
        j["word_table"] = word_table->to_json();
    }
    if (fit) {
        j["fitted"] = fit->profile.to_json();
        j["sup_deviation"] = fit->sup_deviation;
    }
    if (series) {
        j["truncated"] = series->truncated;
        const auto base = series->card_at(base_index);
        io::Csv csv({"m", "cardinality", "log_cardinality", "f_fitted", "f_predicted", "deviation"});
        for (const auto& [n, c] : series->entries) {
            if (n % base_index != 0) continue;
            const Int m = n / base_index;
            const double x = std::log10(static_cast<double>(m));
            const double y = std::log10(static_cast<double>(c));
            const double rel = base ? y - std::log10(static_cast<double>(*base)) : 0.0;
            const double ff = fit ? fit->profile.value(x) : 0.0;
            csv.row({std::to_string(m), std::to_string(c), io::fmt_double(y),
                     fit ? io::fmt_double(ff) : "", predicted ? io::fmt_double(predicted->value(x)) : "",
                     fit ? io::fmt_double(rel - ff) : ""});
        }
        write_csv(ctx, name, csv);
        if (band_check && poly) {
            // Ratio |A^m| / V(m) must stay within a factor-4 band of its m=1 value.
            const Rat v1 = poly_eval_rat(*poly, 1);
            const auto c1 = series->card_at(1);
            bool ok = true;
            json ratios = json::array();
            for (const auto& [n, c] : series->entries) {
                const Rat vm = poly_eval_rat(*poly, n);
                // (c/vm) / (c1/v1) in [1/4, 4], exactly.
                const Rat lhs = Rat(Rat(static_cast<long>(c)) * v1);
                const Rat rhs = Rat(Rat(static_cast<long>(*c1)) * vm);
                if (lhs * 4 < rhs || rhs * 4 < lhs) ok = false;
                ratios.push_back(rat_to_double(Rat(lhs / rhs)));
            }
            j["band_ratios_vs_m1"] = ratios;
            j["band_within_factor4"] = ok;
        }
    }
    write_json(ctx, name, j);
    return series && series->truncated ? kExitCap : kExitOk;
}

int run_norm(Strict& s, const std::string& name, const Ctx& ctx) {
    const OraclePtr o = parse_group(s.at("group"));
    const nilprog::CosetNilprogression hp = parse_progression(o, s.at("progression"));
    std::vector<Elem> x;
    if (s.has("X")) x = parse_elems(o, s.at("X"));
    const Rat t_max = rat_field(s, "t_max");
    nilprog::NormCalculator calc(hp, t_max, ctx.caps);

    json j;
    std::vector<Elem> queries;
    if (s.has("queries")) queries = parse_elems(o, s.at("queries"));
    if (s.has("queries_dihedral_range")) {
        const Int b = s.get<Int>("queries_dihedral_range");
        for (Int sh = -b; sh <= b; ++sh) {
            queries.push_back(o->dihedral(1, sh));
            queries.push_back(o->dihedral(-1, sh));
        }
    }
    if (!queries.empty()) {
        io::Csv csv({"element", "norm_hp", "norm_hpx"});
        for (const Elem& g : queries) {
            const XRat nhp = calc.norm(g);
            const XRat nx = x.empty() ? nhp : calc.norm_x(x, g);
            csv.row({o->to_string(g), nhp.str(), nx.str()});
        }
        write_csv(ctx, name, csv);
    }
    if (s.has("axioms")) {
        Strict sa(s.at("axioms"), "axioms");
        const int pairs = sa.get<int>("pairs");
        const Rat draw_t = rat_field(sa, "draw_t");
        const std::uint64_t seed = require_seed(s, ctx);
        sa.finish();
        const grp::ElemSet ball = nilprog::enumerate_dilate(hp, draw_t, ctx.caps);
        const std::vector<Elem> pool = grp::sorted_elems(*o, ball);
        SplitMix64 rng(seed);
        bool all_ok = true;
        for (int it = 0; it < pairs && all_ok; ++it) {
            const Elem& g = rng.pick(pool);
            const Elem& h = rng.pick(pool);
            const XRat ng = calc.norm(g), nh = calc.norm(h);
            const XRat ninv = calc.norm(o->inv(g));
            const XRat ngh = calc.norm(o->mul(g, h));
            all_ok = all_ok && ninv == ng && ngh <= ng + nh;
            if (!x.empty()) {
                const XRat xg = calc.norm_x(x, g), xh = calc.norm_x(x, h);
                all_ok = all_ok && calc.norm_x(x, o->inv(g)) == xg && calc.norm_x(x, o->mul(g, h)) <= xg + xh;
            }
        }
        all_ok = all_ok && calc.norm(o->identity()) == XRat::of(Rat(0));
        j["axioms_ok"] = all_ok;
        j["pairs"] = pairs;
    }
    s.finish();
    write_json(ctx, name, j);
    return kExitOk;
}

int run_measure_grow(Strict& s, const std::string& name, const Ctx& ctx) {
    const OraclePtr o = parse_group(s.at("group"));
    json j;
    if (s.has("measure")) {
        const meas::FiniteMeasure mu = parse_measure(o, s.at("measure"));
        const int n_max = s.get<int>("n_max");
        const meas::MeasureSeries series = meas::convolution_growth_series(mu, n_max, ctx.caps);
        io::Csv csv({"n", "l2_inv_sq", "linf"});
        for (const auto& row : series.rows)
            csv.row({std::to_string(row.n), rat_to_string(row.l2_inv_sq), rat_to_string(row.linf)});
        write_csv(ctx, name, csv);
        j["truncated"] = series.truncated;
        if (series.truncated) {
            write_json(ctx, name, j);
            return kExitCap;
        }
    }
    if (s.has("young_check")) {
        Strict sy(s.at("young_check"), "young_check");
        const int count = sy.get<int>("count");
        const int n_max = sy.get<int>("n_max");
        const Int bound = sy.get_or<Int>("value_bound", 5);
        sy.finish();
        const std::uint64_t seed = require_seed(s, ctx);
        SplitMix64 rng(seed);
        bool all_monotone = true;
        for (int t = 0; t < count; ++t) {
            // Random symmetric rational measure on Z with bounded support.
            std::vector<std::pair<Elem, Rat>> masses;
            Rat total(0);
            const int atoms = static_cast<int>(rng.range(1, 3));
            std::vector<std::pair<Int, Rat>> raw;
            for (int a = 0; a < atoms; ++a) {
                const Int v = rng.range(1, bound);
                const Rat w = Rat(rng.range(1, 9));
                raw.emplace_back(v, w);
                raw.emplace_back(-v, w);
                total += 2 * w;
            }
            if (rng.coin()) {
                const Rat w = Rat(rng.range(1, 9));
                raw.emplace_back(0, w);
                total += w;
            }
            std::map<Int, Rat> merged;
            for (auto& [v, w] : raw) merged[v] += w;
            for (auto& [v, w] : merged) masses.emplace_back(o->from_coords({v}), Rat(w / total));
            const meas::FiniteMeasure mu = meas::FiniteMeasure::from_rational(o, std::move(masses));
            // convolution_growth_series asserts monotonicity internally.
            const meas::MeasureSeries ser = meas::convolution_growth_series(mu, n_max, ctx.caps);
            for (std::size_t i = 1; i < ser.rows.size(); ++i)
                if (ser.rows[i].l2_inv_sq < ser.rows[i - 1].l2_inv_sq) all_monotone = false;
        }
        j["young_monotone"] = all_monotone;
        j["count"] = count;
    }
    if (s.has("direct_check")) {
        Strict sd(s.at("direct_check"), "direct_check");
        const nilprog::CosetNilprogression hp = parse_progression(o, sd.at("progression"));
        const std::vector<Elem> x = parse_elems(o, sd.at("X"));
        const int n = sd.get<int>("n");
        const meas::FiniteMeasure mu = parse_measure(o, sd.at("measure"));
        sd.finish();
        const meas::DirectCheckReport rep = meas::direct_theorem_check(mu, hp, x, n, ctx.caps);
        j["direct_check"] = rep.to_json();
    }
    s.finish();
    write_json(ctx, name, j);
    return kExitOk;
}

int run_donk(Strict& s, const std::string& name, const Ctx& ctx) {
    json j;
    if (s.get_or<bool>("include_worked", false)) {
        const OraclePtr z = GroupOracle::lattice(1);
        const meas::FiniteMeasure mu1 = meas::FiniteMeasure::from_rational(
            z, {{z->from_coords({1}), make_rat(1, 2)}, {z->from_coords({-1}), make_rat(1, 2)}});
        j["worked"] = meas::donk_bounds({mu1}, ctx.caps).to_json();
    }
    long trials = ctx.trials_override.value_or(s.get_or<long>("trials", 0));
    bool all_ok = true;
    if (trials > 0) {
        const std::uint64_t seed = require_seed(s, ctx);
        const int n_max = s.get_or<int>("n_max", 6);
        const int support_max = s.get_or<int>("support_max", 5);
        const Int value_bound = s.get_or<Int>("value_bound", 8);
        SplitMix64 rng(seed);
        json rows = json::array();
        for (long t = 0; t < trials; ++t) {
            const bool cyc = rng.coin();
            const Int q = rng.range(5, 17);
            const OraclePtr o = cyc ? GroupOracle::cyclic({q}) : GroupOracle::lattice(1);
            const int n = static_cast<int>(rng.range(1, n_max));
            std::vector<meas::FiniteMeasure> mus;
            for (int i = 0; i < n; ++i) {
                // Symmetric measure with at most support_max atoms.
                std::map<Int, Rat> merged;
                Rat total(0);
                const int pairs = static_cast<int>(rng.range(1, std::max(1, (support_max - 1) / 2)));
                for (int p = 0; p < pairs; ++p) {
                    const Int v = rng.range(1, value_bound);
                    const Rat w = Rat(rng.range(1, 9));
                    merged[v] += w;
                    merged[-v] += w;
                    total += 2 * w;
                }
                if (rng.coin()) {
                    const Rat w = Rat(rng.range(1, 9));
                    merged[0] += w;
                    total += w;
                }
                std::vector<std::pair<Elem, Rat>> masses;
                for (auto& [v, w] : merged) masses.emplace_back(o->from_coords({v}), Rat(w / total));
                // In Z/q, +-v may collide; from_rational merges masses, and the
                // result stays symmetric because -x keeps the same merged mass.
                mus.push_back(meas::FiniteMeasure::from_rational(o, std::move(masses)));
            }
            const meas::DonkResult r = meas::donk_bounds(mus, ctx.caps);
            all_ok = all_ok && r.chain_ok;
            rows.push_back({{"trial", t}, {"group", cyc ? "Z/q" : "Z"}, {"n", n}, {"chain_ok", r.chain_ok},
                            {"lhs", rat_to_string(r.lhs)}, {"mid", rat_to_string(r.mid)}, {"rhs", r.rhs}});
        }
        j["rows"] = std::move(rows);
        j["trials"] = trials;
    }
    s.finish();
    j["all_ok"] = all_ok;
    write_json(ctx, name, j);
    return kExitOk;
}

int run_gauge(Strict& s, const std::string& name, const Ctx& ctx) {
    json j;
    if (s.get_or<bool>("include_hand", false)) {
        const meas::StochasticGauge g =
            meas::solve_drift_gauge({{0.5, 0.5}, {0.5, 0.5}}, {{0.0, 0.2}, {-0.2, 0.0}});
        j["hand"] = g.to_json();
    }
    const long trials = ctx.trials_override.value_or(s.get_or<long>("trials", 0));
    if (trials > 0) {
        const int d_max = s.get_or<int>("d_max", 6);
        const std::uint64_t seed = require_seed(s, ctx);
        SplitMix64 rng(seed);
        double worst_residual = 0.0;
        for (long t = 0; t < trials; ++t) {
            const int d = static_cast<int>(rng.range(2, d_max));
            // Random symmetric stochastic p: symmetrized positive matrix with
            // rows normalized by a doubly-stochastic scaling loop.
            std::vector<std::vector<double>> w(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d)));
            for (int i = 0; i < d; ++i)
                for (int l = i; l < d; ++l) {
                    const double v = 1.0 + static_cast<double>(rng.below(1000));
                    w[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] = v;
                    w[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = v;
                }
            for (int sweep = 0; sweep < 200; ++sweep) {
                for (int i = 0; i < d; ++i) {
                    double row = 0;
                    for (int l = 0; l < d; ++l) row += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
                    for (int l = 0; l < d; ++l) {
                        w[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] /= row;
                    }
                }
                for (int i = 0; i < d; ++i)
                    for (int l = 0; l < d; ++l) {
                        const double m = 0.5 * (w[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] + w[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)]);
                        w[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] = m;
                        w[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = m;
                    }
            }
            // Final exact row normalization + symmetrization residue fix: use
            // (w + w^T)/2 then renormalize once more and fold the defect into
            // the diagonal, keeping exact row sums.
            for (int i = 0; i < d; ++i) {
                double row = 0;
                for (int l = 0; l < d; ++l) row += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
                w[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] += 1.0 - row;
            }
            std::vector<std::vector<double>> a(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), 0.0));
            for (int i = 0; i < d; ++i)
                for (int l = i + 1; l < d; ++l) {
                    const double v = (static_cast<double>(rng.below(2001)) - 1000.0) / 1000.0;
                    a[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] = v;
                    a[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = -v;
                }
            const meas::StochasticGauge g = meas::solve_drift_gauge(w, a);
            worst_residual = std::max(worst_residual, g.residual);
        }
        j["trials"] = trials;
        j["worst_residual"] = worst_residual;
        j["residual_ok"] = worst_residual <= 1e-9;
    }
    s.finish();
    write_json(ctx, name, j);
    return kExitOk;
}

int run_lo(Strict& s, const std::string& name, const Ctx& ctx) {
    json j;
    const OraclePtr z = GroupOracle::lattice(1);
    if (s.has("z_instances")) {
        json rows = json::array();
        for (const auto& inst_j : s.at("z_instances")) {
            lo::LOInstance inst;
            inst.oracle = z;
            for (const auto& v : inst_j) inst.elems.push_back(z->from_coords({v.get<Int>()}));
            const lo::Concentration c = lo::bernoulli_concentration(inst, ctx.caps);
            rows.push_back({{"values", inst_j}, {"rho", rat_to_string(c.rho)}, {"witness", z->to_string(c.witness)}});
        }
        j["bernoulli"] = std::move(rows);
    }
    if (s.has("cross_check")) {
        Strict sc(s.at("cross_check"), "cross_check");
        const int count = sc.get<int>("count");
        const int n = sc.get_or<int>("n", 4);
        const Int bound = sc.get_or<Int>("value_bound", 6);
        sc.finish();
        const std::uint64_t seed = require_seed(s, ctx);
        SplitMix64 rng(seed);
        bool all_equal = true;
        for (int t = 0; t < count; ++t) {
            lo::LOInstance inst;
            inst.oracle = z;
            std::vector<Elem> multiset;
            for (int i = 0; i < n; ++i) {
                const Elem e = z->from_coords({rng.range(-bound, bound)});
                inst.elems.push_back(e);
                multiset.push_back(e);
                multiset.push_back(z->inv(e));
            }
            const Rat walk = lo::symmetrized_walk_concentration(inst, n, ctx.caps);
            const meas::FiniteMeasure mu = meas::FiniteMeasure::uniform(z, multiset);
            const Rat conv = mu.power(n, ctx.caps).linf_rat();
            if (walk != conv) all_equal = false;
        }
        j["cross_check_ok"] = all_equal;
        j["count"] = count;
    }
    s.finish();
    write_json(ctx, name, j);
    return kExitOk;
}

int run_mam(Strict& s, const std::string& name, const Ctx& ctx) {
    const OraclePtr o = parse_group(s.at("group"));
    Strict se(s.at("elements"), "elements");
    const std::string mode = se.get<std::string>("mode");
    const int n = se.get<int>("n");
    lo::LOInstance inst;
    inst.oracle = o;
    if (mode == "planted") {
        const auto pool = se.get<std::vector<Int>>("pool");
        const auto outlier_pool = se.get_or<std::vector<Int>>("outlier_pool", {});
        const int outliers = se.get_or<int>("outlier_count", 0);
        se.finish();
        if (pool.empty()) throw ParseError("elements: empty pool");
        if (outliers < 0 || outliers > n) throw ParseError("elements: outlier_count out of range");
        if (outliers > 0 && outlier_pool.empty()) throw ParseError("elements: outlier_pool required");
        const std::uint64_t seed = require_seed(s, ctx);
        SplitMix64 rng(seed);
        for (int i = 0; i < n - outliers; ++i)
            inst.elems.push_back(o->from_coords({pool[rng.below(pool.size())]}));
        for (int i = 0; i < outliers; ++i)
            inst.elems.push_back(o->from_coords({outlier_pool[rng.below(outlier_pool.size())]}));
    } else if (mode == "seeded_uniform") {
        se.finish();
        const std::uint64_t seed = require_seed(s, ctx);
        SplitMix64 rng(seed);
        for (int i = 0; i < n; ++i)
            inst.elems.push_back(o->from_coords({static_cast<Int>(rng.below(static_cast<std::uint64_t>(o->order())))}));
    } else {
        throw ParseError("elements: unknown mode '" + mode + "'");
    }
    const Rat eps = rat_field(s, "eps");
    const auto order_cap = s.get<unsigned long long>("order_cap");
    const double fraction_target = s.get<double>("fraction_target");
    s.finish();
    const lo::MamReport rep = lo::mam_experiment(inst, eps, order_cap, fraction_target, ctx.caps);
    write_json(ctx, name, rep.to_json(*o));
    return kExitOk;
}

int run_mam2(Strict& s, const std::string& name, const Ctx& ctx) {
    const OraclePtr o = parse_group(s.at("group"));
    const meas::FiniteMeasure mu = parse_measure(o, s.at("measure"));
    const int d = s.get<int>("d");
    const double eps = s.get<double>("eps");
    const int n = s.get<int>("n");
    s.finish();
    const lo::Mam2Report rep = lo::mam2_experiment(mu, d, eps, n, ctx.caps);
    write_json(ctx, name, rep.to_json());
    // Decay series artifact for plotting.
    io::Csv csv({"n", "linf"});
    meas::FiniteMeasure cur = mu;
    for (int i = 1; i <= n; ++i) {
        if (i > 1) cur = cur.convolve(mu, ctx.caps);
        csv.row({std::to_string(i), io::fmt_double(cur.linf())});
    }
    write_csv(ctx, name, csv);
    return kExitOk;
}

int run_bass(Strict& s, const std::string& name, const Ctx& ctx) {
    json cases = json::array();
    for (const auto& c : s.at("cases")) {
        Strict sc(c, "case");
        const std::string label = sc.get<std::string>("label");
        const int k = sc.get<int>("k");
        const OraclePtr o = GroupOracle::unitriangular(k);
        const std::vector<Elem> gens = parse_elems(o, sc.at("generators"));
        sc.finish();
        cases.push_back({{"label", label}, {"degree", lo::bass_guivarch_degree(o, gens)}});
    }
    json j;
    j["cases"] = std::move(cases);
    if (s.has("lattice_ball_slope")) {
        Strict sl(s.at("lattice_ball_slope"), "lattice_ball_slope");
        const Int m_lo = sl.get<Int>("m_lo");
        const Int m_hi = sl.get<Int>("m_hi");
        sl.finish();
        const OraclePtr z2 = GroupOracle::lattice(2);
        const std::vector<Elem> gens{z2->from_coords({1, 0}), z2->from_coords({0, 1})};
        const growth::GrowthSeries ser =
            growth::product_set_series(z2, gens, true, static_cast<int>(m_hi), ctx.caps);
        const double slope = (std::log10(static_cast<double>(*ser.card_at(m_hi))) -
                              std::log10(static_cast<double>(*ser.card_at(m_lo)))) /
                             (std::log10(static_cast<double>(m_hi)) - std::log10(static_cast<double>(m_lo)));
        j["empirical_z2_slope"] = slope;
    }
    s.finish();
    write_json(ctx, name, j);
    return kExitOk;
}

int run_sandwich(Strict& s, const std::string& name, const Ctx& ctx) {
    const Int N = s.get<Int>("N");
    const Int n = s.get<Int>("n");
    const Int C = s.get<Int>("C");
    const auto m_values = s.get<std::vector<Int>>("m_values");
    const Int shift_bound = s.get_or<Int>("shift_bound", N / n);
    const bool corrupt = s.get_or<bool>("corrupt_x", false);
    s.finish();

    const OraclePtr o = GroupOracle::dihedral_inf();
    std::vector<Elem> a;
    for (Int b = -shift_bound; b <= shift_bound; ++b) {
        a.push_back(o->dihedral(1, b));
        a.push_back(o->dihedral(-1, b));
    }
    const nilprog::CosetNilprogression hp(o, {o->identity()}, {o->dihedral(1, 1)}, {Rat(static_cast<long>(N))});
    std::vector<Elem> x{o->identity()};
    if (!corrupt) x.push_back(o->dihedral(-1, 0));
    const growth::SandwichReport rep = growth::check_control_sandwich(o, a, hp, x, n, C, m_values, ctx.caps);
    write_json(ctx, name, rep.to_json());
    return kExitOk;
}

int dispatch(const json& scenario_json, const Ctx& ctx, std::ostream& log) {
    Strict s(scenario_json, "scenario");
    const std::string name = s.get<std::string>("name");
    const std::string kind = s.get<std::string>("kind");
    s.get_or<std::uint64_t>("cap", 0);  // consumed below via ctx
    log << "scenario " << name << " (" << kind << ")\n";
    if (kind == "grow") return run_grow(s, name, ctx);
    if (kind == "profile") return run_profile(s, name, ctx);
    if (kind == "norm") return run_norm(s, name, ctx);
    if (kind == "measure-grow") return run_measure_grow(s, name, ctx);
    if (kind == "donk") return run_donk(s, name, ctx);
    if (kind == "gauge") return run_gauge(s, name, ctx);
    if (kind == "lo") return run_lo(s, name, ctx);
    if (kind == "mam") return run_mam(s, name, ctx);
    if (kind == "mam2") return run_mam2(s, name, ctx);
    if (kind == "bass") return run_bass(s, name, ctx);
    if (kind == "sandwich") return run_sandwich(s, name, ctx);
    throw ParseError("unknown scenario kind '" + kind + "'");
}

}  // namespace

int run_scenario(const json& j, const RunOptions& opt, std::ostream& log) {
    Ctx ctx;
    ctx.out_dir = opt.out_dir;
    ctx.seed_override = opt.seed;
    ctx.trials_override = opt.trials;
    if (opt.cap)
        ctx.caps.max_states = *opt.cap;
    else if (j.is_object() && j.contains("cap"))
        ctx.caps.max_states = j.at("cap").get<std::uint64_t>();
    std::string name = "scenario";
    try {
        if (j.is_object() && j.contains("name") && j.at("name").is_string()) name = j.at("name").get<std::string>();
        std::filesystem::create_directories(ctx.out_dir);
        return dispatch(j, ctx, log);
    } catch (const ParseError& e) {
        log << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const json::exception& e) {
        log << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const std::invalid_argument& e) {
        // Config-semantic mistakes (bad lengths, arity or backend mismatches).
        log << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const CapExceededError& e) {
        log << "cap exceeded: " << e.what() << " (states=" << e.states_visited << ")\n";
        json err{{"truncated", true}, {"error", e.what()}, {"states", e.states_visited}};
        try {
            io::atomic_write(ctx.out_dir / (name + ".json"), err.dump(2) + "\n");
        } catch (...) {
        }
        return kExitCap;
    } catch (const std::exception& e) {
        log << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

int run_config_file(const std::filesystem::path& config, const RunOptions& opt, std::ostream& log) {
    json j;
    {
        std::ifstream f(config);
        if (!f) {
            log << "parse error: cannot open config " << config << "\n";
            return kExitParse;
        }
        try {
            f >> j;
        } catch (const json::exception& e) {
            log << "parse error: " << e.what() << "\n";
            return kExitParse;
        }
    }
    if (j.is_object() && j.contains("scenarios")) {
        if (!j.at("scenarios").is_array()) {
            log << "parse error: 'scenarios' must be an array\n";
            return kExitParse;
        }
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "scenarios") {
                log << "parse error: unknown top-level key '" << it.key() << "'\n";
                return kExitParse;
            }
        const auto& arr = j.at("scenarios");
        std::vector<int> codes(arr.size(), 0);
        std::vector<std::string> logs(arr.size());
        const int jobs = std::max(1, opt.jobs);
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        auto worker = [&]() {
            while (true) {
                std::size_t idx;
                {
                    std::lock_guard<std::mutex> lk(mu);
                    if (next >= arr.size()) return;
                    idx = next++;
                }
                std::ostringstream os;
                codes[idx] = run_scenario(arr[idx], opt, os);
                logs[idx] = os.str();
            }
        };
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        int worst = 0;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            log << logs[i];
            worst = std::max(worst, codes[i]);
        }
        return worst;
    }
    return run_scenario(j, opt, log);
}

int emit_plot_series(const std::filesystem::path& artifact, const std::filesystem::path& out,
                     std::ostream& log) {
    std::ifstream f(artifact);
    if (!f) {
        log << "missing artifact " << artifact << "\n";
        return kExitParse;
    }
    std::string header;
    if (!std::getline(f, header)) {
        log << "empty artifact\n";
        return kExitParse;
    }
    std::vector<std::string> cols;
    {
        std::stringstream hs(header);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    if (cols.empty()) {
        log << "bad artifact header\n";
        return kExitParse;
    }
    io::Csv tidy({"series", "x", "y"});
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        cells.resize(cols.size());
        for (std::size_t i = 1; i < cols.size(); ++i) {
            if (cells[i].empty()) continue;
            tidy.row({cols[i], cells[0], cells[i]});
        }
    }
    io::atomic_write(out, tidy.str());
    return kExitOk;
}

}  // namespace nilgrowth::scenario
