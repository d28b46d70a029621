#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <future>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <boost/numeric/odeint.hpp>

#include "nlzeno/params.hpp"
#include "nlzeno/zeno.hpp"

namespace nlzeno {

class BasisTooLarge : public Error {
public:
    BasisTooLarge(std::size_t dim, std::size_t ceiling)
        : Error("truncated basis has " + std::to_string(dim) + " states, ceiling is " + std::to_string(ceiling)) {}
};

class TailMassTooLarge : public Error {
public:
    explicit TailMassTooLarge(double tail)
        : Error("coherent-state mass outside the basis is " + std::to_string(tail)), tail_(tail) {}
    double tail() const noexcept { return tail_; }

private:
    double tail_;
};

class StepSizeUnderflow : public Error {
public:
    using Error::Error;
};

class NormDriftExceeded : public Error {
public:
    explicit NormDriftExceeded(double drift)
        : Error("state norm drifted by " + std::to_string(drift)), drift_(drift) {}
    double drift() const noexcept { return drift_; }

private:
    double drift_;
};

/// Mode order everywhere: a1, b1, a2, b2.
enum Mode { mode_a1 = 0, mode_b1 = 1, mode_a2 = 2, mode_b2 = 3 };
using Occupation = std::array<int, 4>;

inline int weighted_number(const Occupation& n) { return n[0] + n[1] + 2 * n[2] + 2 * n[3]; }

struct TruncationSpec {
    enum class Scheme { PerMode, WeightedTotal };
    Scheme scheme = Scheme::WeightedTotal;
    int cutoff = 14; // n_max per mode, or M_max

    static TruncationSpec per_mode(int n_max) { return {Scheme::PerMode, n_max}; }
    static TruncationSpec weighted_total(int m_max) { return {Scheme::WeightedTotal, m_max}; }

    // Largest occupation each mode can reach.
    Occupation bounds() const
    {
        if (scheme == Scheme::PerMode)
            return {cutoff, cutoff, cutoff, cutoff};
        return {cutoff, cutoff, cutoff / 2, cutoff / 2};
    }
    bool contains(const Occupation& n) const
    {
        for (int x : n)
            if (x < 0)
                return false;
        if (scheme == Scheme::PerMode)
            return n[0] <= cutoff && n[1] <= cutoff && n[2] <= cutoff && n[3] <= cutoff;
        return weighted_number(n) <= cutoff;
    }
};

/// Lexicographic enumeration of the truncated four-mode basis.
class FockBasis {
public:
    explicit FockBasis(TruncationSpec spec, std::size_t max_dim = 200000) : spec_(spec)
    {
        if (spec.cutoff < 0)
            throw ValidationError("truncation cutoff must be >= 0");
        const Occupation b = spec.bounds();
        for (int i = 0; i < 4; ++i)
            stride_[i] = 1;
        for (int i = 2; i >= 0; --i)
            stride_[i] = stride_[i + 1] * static_cast<std::size_t>(b[i + 1] + 1);
        table_.assign(stride_[0] * static_cast<std::size_t>(b[0] + 1), -1);

        Occupation n{};
        for (n[0] = 0; n[0] <= b[0]; ++n[0])
            for (n[1] = 0; n[1] <= b[1]; ++n[1])
                for (n[2] = 0; n[2] <= b[2]; ++n[2])
                    for (n[3] = 0; n[3] <= b[3]; ++n[3]) {
                        if (!spec.contains(n))
                            continue;
                        if (states_.size() >= max_dim)
                            throw BasisTooLarge(count(spec), max_dim);
                        table_[slot(n)] = static_cast<int>(states_.size());
                        states_.push_back(n);
                    }
    }

    std::size_t size() const { return states_.size(); }
    const TruncationSpec& spec() const { return spec_; }
    const Occupation& operator[](std::size_t i) const { return states_[i]; }

    /// -1 when n lies outside the truncation.
    int index_of(const Occupation& n) const
    {
        if (!spec_.contains(n))
            return -1;
        return table_[slot(n)];
    }

    static std::size_t count(TruncationSpec spec)
    {
        const Occupation b = spec.bounds();
        std::size_t c = 0;
        Occupation n{};
        for (n[0] = 0; n[0] <= b[0]; ++n[0])
            for (n[1] = 0; n[1] <= b[1]; ++n[1])
                for (n[2] = 0; n[2] <= b[2]; ++n[2])
                    for (n[3] = 0; n[3] <= b[3]; ++n[3])
                        c += spec.contains(n) ? 1 : 0;
        return c;
    }

private:
    std::size_t slot(const Occupation& n) const
    {
        std::size_t s = 0;
        for (int i = 0; i < 4; ++i)
            s += stride_[i] * static_cast<std::size_t>(n[i]);
        return s;
    }

    TruncationSpec spec_;
    std::vector<Occupation> states_;
    std::array<std::size_t, 4> stride_{};
    std::vector<int> table_;
};

using State = std::vector<cplx>;

struct FockStateVector {
    std::shared_ptr<const FockBasis> basis;
    State amplitudes;
    double tail_mass = 0.0; // mass of the untruncated state outside the basis
    Flags flags;

    double norm() const
    {
        double s = 0.0;
        for (const cplx& c : amplitudes)
            s += std::norm(c);
        return std::sqrt(s);
    }

    double mean_number(Mode m) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < amplitudes.size(); ++i)
            s += (*basis)[i][m] * std::norm(amplitudes[i]);
        return s;
    }

    double mean_weighted_number() const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < amplitudes.size(); ++i)
            s += weighted_number((*basis)[i]) * std::norm(amplitudes[i]);
        return s;
    }

    /// Debug dump: `n_a1 n_b1 n_a2 n_b2 re im` per basis state.
    std::string dump() const
    {
        std::string out;
        char line[128];
        for (std::size_t i = 0; i < amplitudes.size(); ++i) {
            const Occupation& n = (*basis)[i];
            std::snprintf(line, sizeof line, "%d %d %d %d %.17g %.17g\n", n[0], n[1], n[2], n[3],
                          amplitudes[i].real(), amplitudes[i].imag());
            out += line;
        }
        return out;
    }
};

struct CoherentOptions {
    double tail_warning = 1e-8;
    double tail_limit = 1e-3;
};

/// Product of single-mode coherent states projected on the basis and renormalized.
inline FockStateVector coherent_state(const CoherentAmplitudes& amps, std::shared_ptr<const FockBasis> basis,
                                      const CoherentOptions& opts = {})
{
    const cplx a[4] = {amps.alpha, amps.beta, amps.gamma, amps.delta};
    const Occupation b = basis->spec().bounds();
    std::array<std::vector<cplx>, 4> profile;
    for (int m = 0; m < 4; ++m) {
        auto& c = profile[m];
        c.resize(static_cast<std::size_t>(b[m]) + 1);
        c[0] = std::exp(-0.5 * std::norm(a[m]));
        for (int n = 1; n <= b[m]; ++n)
            c[n] = c[n - 1] * a[m] / std::sqrt(static_cast<double>(n));
    }

    FockStateVector s;
    s.basis = basis;
    s.amplitudes.resize(basis->size());
    double kept = 0.0;
    for (std::size_t i = 0; i < basis->size(); ++i) {
        const Occupation& n = (*basis)[i];
        s.amplitudes[i] = profile[0][n[0]] * profile[1][n[1]] * profile[2][n[2]] * profile[3][n[3]];
        kept += std::norm(s.amplitudes[i]);
    }
    s.tail_mass = std::max(0.0, 1.0 - kept);
    if (s.tail_mass > opts.tail_limit)
        throw TailMassTooLarge(s.tail_mass);
    if (s.tail_mass > opts.tail_warning)
        s.flags |= Flag::truncation_tail;
    const double inv = 1.0 / std::sqrt(kept);
    for (cplx& c : s.amplitudes)
        c *= inv;
    return s;
}

using RealSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// The three raising terms of the generator with unit coupling:
/// T_k = a1 b1†, T_a = a1² a2†, T_b = b1² b2†. Each is real on the Fock basis.
struct GeneratorTerms {
    RealSparse t_k, t_a, t_b;
    RealSparse t_k_dag, t_a_dag, t_b_dag;
};

namespace detail {

// Matrix of  (annihilate `lower` twice-or-once) then create `raise`, dropping
// any image that leaves the truncation.
inline RealSparse ladder_term(const FockBasis& basis, Mode lower, int power, Mode raise)
{
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        Occupation n = basis[j];
        if (n[lower] < power)
            continue;
        double amp = 1.0;
        for (int p = 0; p < power; ++p) {
            amp *= std::sqrt(static_cast<double>(n[lower]));
            --n[lower];
        }
        amp *= std::sqrt(static_cast<double>(n[raise] + 1));
        ++n[raise];
        const int i = basis.index_of(n);
        if (i >= 0)
            trip.emplace_back(i, static_cast<int>(j), amp);
    }
    RealSparse m(static_cast<int>(basis.size()), static_cast<int>(basis.size()));
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

inline void accumulate(const RealSparse& m, cplx coef, const State& x, State& y)
{
    if (coef == cplx{})
        return;
    for (int r = 0; r < m.outerSize(); ++r) {
        cplx acc{};
        for (RealSparse::InnerIterator it(m, r); it; ++it)
            acc += it.value() * x[static_cast<std::size_t>(it.col())];
        y[static_cast<std::size_t>(r)] += coef * acc;
    }
}

} // namespace detail

inline GeneratorTerms generator_terms(const FockBasis& basis)
{
    GeneratorTerms t;
    t.t_k = detail::ladder_term(basis, mode_a1, 1, mode_b1);
    t.t_a = detail::ladder_term(basis, mode_a1, 2, mode_a2);
    t.t_b = detail::ladder_term(basis, mode_b1, 2, mode_b2);
    t.t_k_dag = t.t_k.transpose();
    t.t_a_dag = t.t_a.transpose();
    t.t_b_dag = t.t_b.transpose();
    return t;
}

/// z-dependent couplings multiplying T_k, T_a, T_b.
struct TermCoefficients {
    cplx k, a, b;
};

inline TermCoefficients term_coefficients(const CouplerParams& p, double z, Probe probe = Probe::Coupled)
{
    const cplx I{0.0, 1.0};
    return {probe == Probe::Coupled ? p.k : cplx{},
            p.gamma_a * std::exp(I * p.dk_a * z),
            p.gamma_b * std::exp(I * p.dk_b * z)};
}

/// G(z) = T + T† as an explicit sparse matrix. Singular parameter sets are allowed.
inline Eigen::SparseMatrix<cplx> build_generator(const CouplerParams& p, double z, const FockBasis& basis,
                                                 Probe probe = Probe::Coupled)
{
    const GeneratorTerms t = generator_terms(basis);
    const TermCoefficients c = term_coefficients(p, z, probe);
    Eigen::SparseMatrix<cplx> T = t.t_k.cast<cplx>() * c.k + t.t_a.cast<cplx>() * c.a + t.t_b.cast<cplx>() * c.b;
    Eigen::SparseMatrix<cplx> G = T + Eigen::SparseMatrix<cplx>(T.adjoint());
    G.prune(cplx{});
    return G;
}

/// dψ/dz = +i G(z) ψ.
class SpatialEvolution {
public:
    SpatialEvolution(std::shared_ptr<const GeneratorTerms> terms, CouplerParams p, Probe probe)
        : terms_(std::move(terms)), p_(p), probe_(probe) {}

    void operator()(const State& x, State& dxdz, double z) const
    {
        const TermCoefficients c = term_coefficients(p_, z, probe_);
        dxdz.assign(x.size(), cplx{});
        detail::accumulate(terms_->t_k, c.k, x, dxdz);
        detail::accumulate(terms_->t_k_dag, std::conj(c.k), x, dxdz);
        detail::accumulate(terms_->t_a, c.a, x, dxdz);
        detail::accumulate(terms_->t_a_dag, std::conj(c.a), x, dxdz);
        detail::accumulate(terms_->t_b, c.b, x, dxdz);
        detail::accumulate(terms_->t_b_dag, std::conj(c.b), x, dxdz);
        const cplx I{0.0, 1.0};
        for (cplx& v : dxdz)
            v *= I;
    }

private:
    std::shared_ptr<const GeneratorTerms> terms_;
    CouplerParams p_;
    Probe probe_;
};

enum class Stepper { Dopri5, Fehlberg78 };

struct StepControl {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double initial_step = 1e-3;
    Stepper stepper = Stepper::Dopri5;
    std::size_t max_steps = 1000000; // between consecutive grid points
    double norm_drift_limit = 1e-8;
};

struct Propagation {
    std::vector<FockStateVector> states; // one per grid point
    double max_norm_drift = 0.0;
    double max_weighted_drift = 0.0; // |<M>(z) - <M>(0)|
};

/// Integrates from z = 0 through every grid point (kz, ascending, lengths z = kz/|k|).
/// With the probe decoupled k is zeroed in the generator but z keeps the coupled scale.
inline Propagation propagate(const CouplerParams& p, const FockStateVector& state0, const std::vector<double>& kz_grid,
                             const StepControl& ctl = {}, Probe probe = Probe::Coupled)
{
    namespace ode = boost::numeric::odeint;
    for (std::size_t i = 0; i < kz_grid.size(); ++i) {
        if (!(kz_grid[i] >= 0.0) || (i > 0 && !(kz_grid[i] >= kz_grid[i - 1])))
            throw ValidationError("kz grid must be ascending and >= 0");
    }
    Propagation out;
    if (kz_grid.empty())
        return out;

    const double K = std::abs(p.k);
    std::vector<double> times{0.0};
    for (double kz : kz_grid)
        if (kz / K > times.back())
            times.push_back(kz / K);

    auto terms = std::make_shared<const GeneratorTerms>(generator_terms(*state0.basis));
    SpatialEvolution rhs(terms, p, probe);

    std::vector<State> at_times;
    auto observer = [&at_times](const State& x, double) { at_times.push_back(x); };
    State x = state0.amplitudes;
    const double dt = std::min(ctl.initial_step, times.size() > 1 ? times[1] : ctl.initial_step);
    try {
        if (times.size() == 1) {
            at_times.push_back(x);
        } else if (ctl.stepper == Stepper::Dopri5) {
            auto st = ode::make_dense_output(ctl.abs_tol, ctl.rel_tol, ode::runge_kutta_dopri5<State>());
            ode::integrate_times(st, std::ref(rhs), x, times.begin(), times.end(), dt, observer,
                                 ode::max_step_checker(static_cast<int>(ctl.max_steps)));
        } else {
            auto st = ode::make_controlled(ctl.abs_tol, ctl.rel_tol, ode::runge_kutta_fehlberg78<State>());
            ode::integrate_times(st, std::ref(rhs), x, times.begin(), times.end(), dt, observer,
                                 ode::max_step_checker(static_cast<int>(ctl.max_steps)));
        }
    } catch (const ode::step_adjustment_error& e) {
        throw StepSizeUnderflow(std::string("integrator could not find an acceptable step: ") + e.what());
    } catch (const ode::no_progress_error& e) {
        throw StepSizeUnderflow(std::string("integrator step budget exhausted: ") + e.what());
    }

    const double m0 = state0.mean_weighted_number();
    std::size_t t = 0;
    for (double kz : kz_grid) {
        while (t + 1 < times.size() && times[t] < kz / K)
            ++t;
        FockStateVector s{state0.basis, at_times[t], state0.tail_mass, state0.flags};
        out.max_norm_drift = std::max(out.max_norm_drift, std::abs(s.norm() - 1.0));
        out.max_weighted_drift = std::max(out.max_weighted_drift, std::abs(s.mean_weighted_number() - m0));
        out.states.push_back(std::move(s));
    }
    if (out.max_norm_drift > ctl.norm_drift_limit)
        throw NormDriftExceeded(out.max_norm_drift);
    return out;
}

/// d<N_b2>/dz at z = 0 from the propagator's own right-hand side.
inline double oracle_slope_b2(const CouplerParams& p, const FockStateVector& state0, Probe probe = Probe::Coupled)
{
    auto terms = std::make_shared<const GeneratorTerms>(generator_terms(*state0.basis));
    SpatialEvolution rhs(terms, p, probe);
    State d;
    rhs(state0.amplitudes, d, 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        s += (*state0.basis)[i][mode_b2] * (std::conj(state0.amplitudes[i]) * d[i]).real();
    return 2.0 * s;
}

struct OracleSettings {
    TruncationSpec truncation = TruncationSpec::weighted_total(14);
    StepControl step;
    std::size_t max_dim = 200000;
    CoherentOptions coherent;
};

struct OracleCurve {
    std::vector<double> kz;
    std::vector<double> mean_n;
    double max_norm_drift = 0.0;
    double max_weighted_drift = 0.0;
    double tail_mass = 0.0;
    std::size_t dim = 0;
    Flags flags;
};

inline OracleCurve oracle_mean_n_b2(const CouplerParams& p, const CoherentAmplitudes& amps,
                                    const std::vector<double>& kz_grid, const OracleSettings& s = {},
                                    Probe probe = Probe::Coupled)
{
    auto basis = std::make_shared<const FockBasis>(s.truncation, s.max_dim);
    const FockStateVector psi0 = coherent_state(amps, basis, s.coherent);
    const Propagation run = propagate(p, psi0, kz_grid, s.step, probe);
    OracleCurve c;
    c.kz = kz_grid;
    for (const auto& st : run.states)
        c.mean_n.push_back(st.mean_number(mode_b2));
    c.max_norm_drift = run.max_norm_drift;
    c.max_weighted_drift = run.max_weighted_drift;
    c.tail_mass = psi0.tail_mass;
    c.dim = basis->size();
    c.flags = psi0.flags;
    return c;
}

struct OracleZeno {
    std::vector<double> kz;
    std::vector<double> delta_n;
    OracleCurve probe_on, probe_off;
    Flags flags;
};

/// Probe-on and probe-off runs execute concurrently; ΔN is their pointwise difference.
inline OracleZeno oracle_zeno(const CouplerParams& p, const CoherentAmplitudes& amps, const std::vector<double>& kz_grid,
                              const OracleSettings& s = {})
{
    auto off = std::async(std::launch::async, [&] { return oracle_mean_n_b2(p, amps, kz_grid, s, Probe::Decoupled); });
    OracleZeno z;
    z.probe_on = oracle_mean_n_b2(p, amps, kz_grid, s, Probe::Coupled);
    z.probe_off = off.get();
    z.kz = kz_grid;
    for (std::size_t i = 0; i < kz_grid.size(); ++i)
        z.delta_n.push_back(z.probe_on.mean_n[i] - z.probe_off.mean_n[i]);
    z.flags = z.probe_on.flags | z.probe_off.flags;
    return z;
}

} // namespace nlzeno
