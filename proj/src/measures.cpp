#include "nilgrowth/measures.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nilgrowth::meas {

using grp::GroupOracle;
using nlohmann::json;

FiniteMeasure FiniteMeasure::dirac(OraclePtr oracle, const Elem& g) {
    FiniteMeasure m;
    m.oracle_ = std::move(oracle);
    m.mode_ = MassMode::Rational;
    m.rmass_.emplace(g, Rat(1));
    m.validate();
    return m;
}

FiniteMeasure FiniteMeasure::uniform(OraclePtr oracle, const std::vector<Elem>& support) {
    if (support.empty()) throw std::invalid_argument("uniform: empty support");
    FiniteMeasure m;
    m.oracle_ = std::move(oracle);
    m.mode_ = MassMode::Rational;
    const Rat unit = make_rat(1, static_cast<long>(support.size()));
    for (const Elem& g : support) m.rmass_[g] += unit;
    m.validate();
    return m;
}

FiniteMeasure FiniteMeasure::from_rational(OraclePtr oracle, std::vector<std::pair<Elem, Rat>> masses) {
    FiniteMeasure m;
    m.oracle_ = std::move(oracle);
    m.mode_ = MassMode::Rational;
    for (auto& [g, r] : masses) {
        if (r <= 0) throw std::invalid_argument("from_rational: masses must be positive");
        m.rmass_[g] += r;
    }
    m.validate();
    return m;
}

FiniteMeasure FiniteMeasure::from_double(OraclePtr oracle, std::vector<std::pair<Elem, double>> masses) {
    FiniteMeasure m;
    m.oracle_ = std::move(oracle);
    m.mode_ = MassMode::Double;
    for (auto& [g, d] : masses) {
        if (d <= 0) throw std::invalid_argument("from_double: masses must be positive");
        m.dmass_[g] += d;
    }
    m.validate();
    return m;
}

void FiniteMeasure::validate() const {
    if (mode_ == MassMode::Rational) {
        Rat total(0);
        for (const auto& [g, r] : rmass_) {
            if (g.oracle != oracle_.get()) throw BackendMismatchError("measure element from another oracle");
            total += r;
        }
        if (total != 1) throw std::invalid_argument("measure total mass must be exactly 1");
    } else {
        double total = 0;
        for (const auto& [g, d] : dmass_) {
            if (g.oracle != oracle_.get()) throw BackendMismatchError("measure element from another oracle");
            total += d;
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("measure total mass must be 1 within 1e-12");
    }
}

std::size_t FiniteMeasure::support_size() const {
    return mode_ == MassMode::Rational ? rmass_.size() : dmass_.size();
}

Rat FiniteMeasure::mass_rat(const Elem& g) const {
    if (mode_ != MassMode::Rational) throw std::invalid_argument("mass_rat: double-mode measure");
    auto it = rmass_.find(g);
    return it == rmass_.end() ? Rat(0) : it->second;
}

double FiniteMeasure::mass_double(const Elem& g) const {
    if (mode_ == MassMode::Rational) return rat_to_double(mass_rat(g));
    auto it = dmass_.find(g);
    return it == dmass_.end() ? 0.0 : it->second;
}

FiniteMeasure FiniteMeasure::convolve(const FiniteMeasure& nu, const EnumCaps& caps) const {
    if (oracle_.get() != nu.oracle_.get()) throw BackendMismatchError("convolve: oracle mismatch");
    if (mode_ != nu.mode_) throw std::invalid_argument("convolve: mass mode mismatch");
    const GroupOracle& o = *oracle_;
    FiniteMeasure out;
    out.oracle_ = oracle_;
    out.mode_ = mode_;
    // mu*nu(x) = sum_y mu(y) nu(y^-1 x); accumulated as pushforward of the
    // product measure.
    if (mode_ == MassMode::Rational) {
        for (const auto& [y, my] : rmass_)
            for (const auto& [z, mz] : nu.rmass_) {
                out.rmass_[o.mul(y, z)] += my * mz;
                if (out.rmass_.size() > caps.max_states)
                    throw CapExceededError("convolve: support cap exceeded", out.rmass_.size(), out.rmass_.size());
            }
    } else {
        for (const auto& [y, my] : dmass_)
            for (const auto& [z, mz] : nu.dmass_) {
                out.dmass_[o.mul(y, z)] += my * mz;
                if (out.dmass_.size() > caps.max_states)
                    throw CapExceededError("convolve: support cap exceeded", out.dmass_.size(), out.dmass_.size());
            }
    }
    return out;
}

FiniteMeasure FiniteMeasure::power(int n, const EnumCaps& caps) const {
    if (n < 1) throw std::invalid_argument("power: n must be >= 1");
    FiniteMeasure acc = *this;
    for (int i = 1; i < n; ++i) acc = acc.convolve(*this, caps);
    return acc;
}

FiniteMeasure FiniteMeasure::mix(const Rat& a, const FiniteMeasure& other, const Rat& b) const {
    if (mode_ != MassMode::Rational || other.mode_ != MassMode::Rational)
        throw std::invalid_argument("mix: rational mode required");
    if (oracle_.get() != other.oracle_.get()) throw BackendMismatchError("mix: oracle mismatch");
    FiniteMeasure out;
    out.oracle_ = oracle_;
    out.mode_ = MassMode::Rational;
    for (const auto& [g, r] : rmass_) out.rmass_[g] += a * r;
    for (const auto& [g, r] : other.rmass_) out.rmass_[g] += b * r;
    out.validate();
    return out;
}

FiniteMeasure FiniteMeasure::mix_double(double a, const FiniteMeasure& mu, double b, const FiniteMeasure& nu) {
    if (mu.oracle_.get() != nu.oracle_.get()) throw BackendMismatchError("mix_double: oracle mismatch");
    FiniteMeasure out;
    out.oracle_ = mu.oracle_;
    out.mode_ = MassMode::Double;
    for (const auto& [g, r] : mu.rmass_) out.dmass_[g] += a * rat_to_double(r);
    for (const auto& [g, d] : mu.dmass_) out.dmass_[g] += a * d;
    for (const auto& [g, r] : nu.rmass_) out.dmass_[g] += b * rat_to_double(r);
    for (const auto& [g, d] : nu.dmass_) out.dmass_[g] += b * d;
    return out;
}

bool FiniteMeasure::is_symmetric() const {
    const GroupOracle& o = *oracle_;
    if (mode_ == MassMode::Rational) {
        for (const auto& [g, r] : rmass_)
            if (mass_rat(o.inv(g)) != r) return false;
        return true;
    }
    for (const auto& [g, d] : dmass_) {
        auto it = dmass_.find(o.inv(g));
        if (it == dmass_.end() || std::abs(it->second - d) > 1e-12) return false;
    }
    return true;
}

Rat FiniteMeasure::l2_inv_sq_rat() const {
    if (mode_ != MassMode::Rational) throw std::invalid_argument("l2_inv_sq_rat: double-mode measure");
    Rat s(0);
    for (const auto& [g, r] : rmass_) s += r * r;
    return Rat(1 / s);
}

double FiniteMeasure::l2_inv_sq() const {
    if (mode_ == MassMode::Rational) return rat_to_double(l2_inv_sq_rat());
    double s = 0;
    for (const auto& [g, d] : dmass_) s += d * d;
    return 1.0 / s;
}

Rat FiniteMeasure::linf_rat() const {
    if (mode_ != MassMode::Rational) throw std::invalid_argument("linf_rat: double-mode measure");
    Rat best(0);
    for (const auto& [g, r] : rmass_) best = std::max(best, r);
    return best;
}

double FiniteMeasure::linf() const {
    if (mode_ == MassMode::Rational) return rat_to_double(linf_rat());
    double best = 0;
    for (const auto& [g, d] : dmass_) best = std::max(best, d);
    return best;
}

Elem FiniteMeasure::argmax() const {
    if (mode_ != MassMode::Rational) throw std::invalid_argument("argmax: double-mode measure");
    const GroupOracle& o = *oracle_;
    const Elem* best = nullptr;
    Rat bm(0);
    for (const auto& [g, r] : rmass_) {
        if (best == nullptr || r > bm || (r == bm && o.cmp(g, *best) < 0)) {
            best = &g;
            bm = r;
        }
    }
    if (!best) throw std::logic_error("argmax: empty measure");
    return *best;
}

std::vector<std::pair<Elem, Rat>> FiniteMeasure::sorted_rational() const {
    if (mode_ != MassMode::Rational) throw std::invalid_argument("sorted_rational: double-mode measure");
    std::vector<std::pair<Elem, Rat>> v(rmass_.begin(), rmass_.end());
    const GroupOracle& o = *oracle_;
    std::sort(v.begin(), v.end(), [&o](const auto& a, const auto& b) { return o.cmp(a.first, b.first) < 0; });
    return v;
}

json FiniteMeasure::to_json() const {
    json entries = json::array();
    if (mode_ == MassMode::Rational) {
        for (const auto& [g, r] : sorted_rational())
            entries.push_back({{"element", oracle_->elem_to_json(g)}, {"mass", rat_to_string(r)}});
        return {{"mode", "rational"}, {"entries", entries}};
    }
    std::vector<std::pair<Elem, double>> v(dmass_.begin(), dmass_.end());
    const GroupOracle& o = *oracle_;
    std::sort(v.begin(), v.end(), [&o](const auto& a, const auto& b) { return o.cmp(a.first, b.first) < 0; });
    for (const auto& [g, d] : v) entries.push_back({{"element", oracle_->elem_to_json(g)}, {"mass", d}});
    return {{"mode", "double"}, {"entries", entries}};
}

FiniteMeasure FiniteMeasure::from_json(const OraclePtr& oracle, const json& j) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "rational") {
        std::vector<std::pair<Elem, Rat>> masses;
        for (const auto& e : j.at("entries"))
            masses.emplace_back(oracle->elem_from_json(e.at("element")),
                                rat_from_string(e.at("mass").get<std::string>()));
        return from_rational(oracle, std::move(masses));
    }
    if (mode == "double") {
        std::vector<std::pair<Elem, double>> masses;
        for (const auto& e : j.at("entries"))
            masses.emplace_back(oracle->elem_from_json(e.at("element")), e.at("mass").get<double>());
        return from_double(oracle, std::move(masses));
    }
    throw ParseError("measure mode must be 'rational' or 'double'");
}

MeasureSeries convolution_growth_series(const FiniteMeasure& mu, int n_max, const EnumCaps& caps,
                                        const Rat& truncate_below) {
    if (mu.mode() != MassMode::Rational)
        throw std::invalid_argument("convolution_growth_series: rational mode required");
    MeasureSeries out;
    FiniteMeasure cur = mu;
    Rat dropped(0);
    for (int n = 1; n <= n_max; ++n) {
        if (n > 1) {
            try {
                cur = cur.convolve(mu, caps);
            } catch (const CapExceededError&) {
                out.truncated = true;
                break;
            }
            if (truncate_below > 0) {
                // Optional mass truncation with a tracked l1 error bound.
                std::vector<std::pair<Elem, Rat>> kept;
                Rat kept_total(0);
                for (const auto& [g, r] : cur.sorted_rational()) {
                    if (r < truncate_below)
                        dropped += r;
                    else {
                        kept.emplace_back(g, r);
                        kept_total += r;
                    }
                }
                if (kept.empty()) throw std::invalid_argument("truncation threshold removed all mass");
                for (auto& [g, r] : kept) r /= kept_total;  // renormalize
                cur = FiniteMeasure::from_rational(mu.oracle(), std::move(kept));
            }
        }
        MeasureSeriesRow row;
        row.n = n;
        row.l2_inv_sq = cur.l2_inv_sq_rat();
        row.linf = cur.linf_rat();
        if (!out.rows.empty() && truncate_below == 0 && row.l2_inv_sq < out.rows.back().l2_inv_sq)
            throw std::logic_error("convolution_growth_series: l2 monotonicity violated");
        out.rows.push_back(std::move(row));
    }
    out.l1_truncation_error = rat_to_double(dropped);
    return out;
}

json DonkResult::to_json() const {
    return {{"lhs", rat_to_string(lhs)},
            {"mid", rat_to_string(mid)},
            {"rhs", rhs},
            {"chain_ok", chain_ok}};
}

DonkResult donk_bounds(const std::vector<FiniteMeasure>& mus, const EnumCaps& caps) {
    if (mus.empty()) throw std::invalid_argument("donk_bounds: no measures");
    const OraclePtr oracle = mus[0].oracle();
    if (!oracle->is_abelian()) throw std::invalid_argument("donk_bounds: abelian oracle required");
    const int n = static_cast<int>(mus.size());
    for (const FiniteMeasure& m : mus) {
        if (m.oracle().get() != oracle.get()) throw BackendMismatchError("donk_bounds: oracle mismatch");
        if (m.mode() != MassMode::Rational) throw std::invalid_argument("donk_bounds: rational mode required");
        if (!m.is_symmetric()) throw std::invalid_argument("donk_bounds: measures must be symmetric");
    }
    DonkResult r;
    // lhs = sup_x mu_1 * ... * mu_n
    FiniteMeasure prod = mus[0];
    for (int j = 1; j < n; ++j) prod = prod.convolve(mus[static_cast<std::size_t>(j)], caps);
    r.lhs = prod.linf_rat();

    // mu = 1/2 delta + (1/2n) sum_j mu_j * mu_j
    const Elem id = oracle->identity();
    FiniteMeasure mu = FiniteMeasure::dirac(oracle, id);
    {
        std::vector<std::pair<Elem, Rat>> masses;
        masses.emplace_back(id, make_rat(1, 2));
        const Rat w = make_rat(1, 2 * n);
        for (int j = 0; j < n; ++j) {
            const FiniteMeasure sq = mus[static_cast<std::size_t>(j)].convolve(mus[static_cast<std::size_t>(j)], caps);
            for (const auto& [g, m] : sq.sorted_rational()) masses.emplace_back(g, Rat(w * m));
        }
        mu = FiniteMeasure::from_rational(oracle, std::move(masses));
    }
    r.mid = mu.power(n, caps).mass_rat(id);

    // rhs in doubles: tilde mu_j = e^{-1/2} delta + (1 - e^{-1/2}) mu_j * mu_j
    const double e_half = std::exp(-0.5);
    FiniteMeasure acc = FiniteMeasure::from_double(oracle, {{id, 1.0}});
    for (int j = 0; j < n; ++j) {
        const FiniteMeasure sq = mus[static_cast<std::size_t>(j)].convolve(mus[static_cast<std::size_t>(j)], caps);
        const FiniteMeasure tilde =
            FiniteMeasure::mix_double(e_half, FiniteMeasure::dirac(oracle, id), 1.0 - e_half, sq);
        acc = acc.convolve(tilde, caps);
    }
    r.rhs = acc.mass_double(id);
    r.chain_ok = r.lhs <= r.mid && rat_to_double(r.mid) <= r.rhs + 1e-12;
    return r;
}

json StochasticGauge::to_json() const {
    return {{"d", d}, {"t", t}, {"residual", residual}, {"condition", condition}, {"defective", defective}};
}

StochasticGauge solve_drift_gauge(const std::vector<std::vector<double>>& p,
                                  const std::vector<std::vector<double>>& a) {
    const int d = static_cast<int>(p.size());
    if (d < 1 || d > 64) throw std::invalid_argument("solve_drift_gauge: d must be in 1..64");
    Eigen::MatrixXd P(d, d), A(d, d);
    for (int i = 0; i < d; ++i) {
        if (static_cast<int>(p[static_cast<std::size_t>(i)].size()) != d || static_cast<int>(a[static_cast<std::size_t>(i)].size()) != d)
            throw std::invalid_argument("solve_drift_gauge: ragged matrix");
        for (int j = 0; j < d; ++j) {
            P(i, j) = p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            A(i, j) = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    for (int i = 0; i < d; ++i) {
        double row = 0;
        for (int j = 0; j < d; ++j) {
            if (P(i, j) < -1e-12) throw std::invalid_argument("solve_drift_gauge: negative p entry");
            if (std::abs(P(i, j) - P(j, i)) > 1e-9) throw std::invalid_argument("solve_drift_gauge: p not symmetric");
            if (std::abs(A(i, j) + A(j, i)) > 1e-9) throw std::invalid_argument("solve_drift_gauge: a not antisymmetric");
            row += P(i, j);
        }
        if (std::abs(row - 1.0) > 1e-9) throw std::invalid_argument("solve_drift_gauge: p rows must sum to 1");
    }
    Eigen::VectorXd b(d);
    for (int i = 0; i < d; ++i) {
        double s = 0;
        for (int j = 0; j < d; ++j) s += A(i, j) * P(i, j);
        b(i) = s;
    }
    // (I - P) t = b on the complement of the constant vector; adding J/d makes
    // the system nonsingular without moving the solution (b sums to zero).
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) - P;
    M.array() += 1.0 / d;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    StochasticGauge g;
    g.d = d;
    // Reciprocal condition estimate from the pivot ratio; a near-reducible
    // chain makes the shifted system near-singular.
    double min_pivot = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d; ++i) min_pivot = std::min(min_pivot, std::abs(lu.matrixLU()(i, i)));
    g.condition = lu.maxPivot() > 0 ? min_pivot / lu.maxPivot() : 0.0;
    g.defective = !(g.condition > 1e-12);
    Eigen::VectorXd t = lu.solve(b);
    t.array() -= t.mean();  // gauge freedom: normalize to mean zero
    Eigen::VectorXd resid = (Eigen::MatrixXd::Identity(d, d) - P) * t - b;
    g.residual = resid.cwiseAbs().maxCoeff();
    g.t.assign(t.data(), t.data() + d);
    return g;
}

json DirectCheckReport::to_json() const {
    return {{"integral_finite", integral_finite},
            {"integral", rat_to_string(integral)},
            {"measured_m", rat_to_string(measured_m)},
            {"l2_inv_sq", rat_to_string(l2_inv_sq)},
            {"hp_size", hp_size},
            {"ratio", ratio}};
}

DirectCheckReport direct_theorem_check(const FiniteMeasure& mu, const nilprog::CosetNilprogression& hp,
                                       const std::vector<Elem>& x, int n, const EnumCaps& caps) {
    if (mu.mode() != MassMode::Rational) throw std::invalid_argument("direct_theorem_check: rational mode required");
    DirectCheckReport rep;
    rep.integral = 0;
    // Adaptive horizon: double t_max until every support point has finite norm.
    Rat t_max(1);
    for (int attempt = 0;; ++attempt) {
        nilprog::NormCalculator calc(hp, t_max, caps);
        bool all_finite = true;
        Rat total(0);
        for (const auto& [g, m] : mu.sorted_rational()) {
            const XRat norm = calc.norm_x(x, g);
            if (norm.is_inf()) {
                all_finite = false;
                break;
            }
            total += m * norm.v * norm.v;
        }
        if (all_finite) {
            rep.integral = total;
            rep.integral_finite = true;
            break;
        }
        if (attempt >= 6) {
            rep.integral_finite = false;
            break;
        }
        t_max *= 2;
    }
    rep.measured_m = Rat(rep.integral * n);
    rep.l2_inv_sq = mu.power(n, caps).l2_inv_sq_rat();
    rep.hp_size = nilprog::enumerate_dilate(hp, Rat(1), caps).size();
    rep.ratio = rat_to_double(rep.l2_inv_sq) / static_cast<double>(rep.hp_size);
    return rep;
}

}  // namespace nilgrowth::meas
