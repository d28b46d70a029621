#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "nlzeno/coefficients.hpp"
#include "nlzeno/params.hpp"

namespace nlzeno {

enum class Regime { Zeno, AntiZeno, Neutral, Undefined };
enum class Variant { Nonlinear, Linear, Spontaneous };
enum class Probe { Coupled, Decoupled };

inline const char* to_string(Regime r)
{
    switch (r) {
    case Regime::Zeno: return "zeno";
    case Regime::AntiZeno: return "anti_zeno";
    case Regime::Neutral: return "neutral";
    case Regime::Undefined: return "undefined";
    }
    return "undefined";
}

inline const char* to_string(Variant v)
{
    switch (v) {
    case Variant::Nonlinear: return "nonlinear";
    case Variant::Linear: return "linear";
    case Variant::Spontaneous: return "spontaneous";
    }
    return "unknown";
}

class DeltaNotZero : public ValidationError {
public:
    DeltaNotZero() : ValidationError("spontaneous Zeno parameter requires delta = 0") {}
};

/// Closed form and probe-on minus probe-off disagree.
class ConsistencyFailure : public Error {
public:
    ConsistencyFailure(double closed, double difference, double residual)
        : Error("closed form " + std::to_string(closed) + " vs difference form "
                + std::to_string(difference) + " (relative residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

struct EngineOptions {
    double neutral_scale = 1e-15;     // classify band = neutral_scale * max(1, <N>)
    double consistency_tol = 1e-9;    // relative
    double consistency_floor = 1e-5;  // of max(<N>_on, <N>_off), see consistency_residual
    bool check_consistency = true;
};

struct ZenoResult {
    double value = 0.0;
    double mean_n_probe_on = 0.0;
    double mean_n_probe_off = 0.0;
    Regime regime = Regime::Undefined;
    Variant variant = Variant::Nonlinear;
    double imag_residual = 0.0;        // |Im| of the summed closed form before taking the real part
    double consistency_residual = 0.0; // closed form vs on - off, relative
    Flags flags;
};

/// Zeno if below -tol, AntiZeno above +tol, Neutral between, Undefined for NaN.
inline Regime classify(double delta_n, double tol = 1e-15)
{
    if (std::isnan(delta_n))
        return Regime::Undefined;
    if (delta_n < -tol)
        return Regime::Zeno;
    if (delta_n > tol)
        return Regime::AntiZeno;
    return Regime::Neutral;
}

namespace detail {

// Accumulates x and its conjugate partner from separately conjugated factors,
// so a transcription slip shows up as an imaginary remainder.
struct ConjugatePairSum {
    double real_terms = 0.0;
    cplx x{};
    cplx xc{};

    void add(cplx term, cplx conj_term)
    {
        x += term;
        xc += conj_term;
    }
    cplx total() const { return real_terms + x + xc; }
};

inline double difference_residual(double closed, double on, double off, const EngineOptions& o)
{
    const double scale = std::max(std::abs(closed), o.consistency_floor * std::max(std::abs(on), std::abs(off)));
    const double diff = std::abs(closed - (on - off));
    if (scale == 0.0)
        return diff;
    return diff / scale;
}

inline void finish(ZenoResult& r, const EngineOptions& o)
{
    r.consistency_residual = difference_residual(r.value, r.mean_n_probe_on, r.mean_n_probe_off, o);
    if (o.check_consistency && !(r.consistency_residual <= o.consistency_tol))
        throw ConsistencyFailure(r.value, r.mean_n_probe_on - r.mean_n_probe_off, r.consistency_residual);
    r.regime = classify(r.value, o.neutral_scale * std::max(1.0, std::abs(r.mean_n_probe_on)));
}

} // namespace detail

/// <N_b2(z)> in the coherent state |alpha>|beta>|gamma>|delta>. With the probe
/// decoupled, k is set to 0 at the same length z = kz/|k|.
inline double mean_photon_b2(const CouplerParams& p, const CoherentAmplitudes& a, EvalPoint at,
                             Probe probe = Probe::Coupled)
{
    using std::conj;
    using std::norm;
    const cplx al = a.alpha, be = a.beta, ga = a.gamma, de = a.delta;
    const double A2 = norm(al), B2 = norm(be), D2 = norm(de);

    if (probe == Probe::Decoupled) {
        const ProbeOffCoeffs q = coeff_p(p, at);
        const cplx x = q.p2 * be * be * conj(de) + q.p5 * B2 * D2 + q.p6 * D2;
        return D2 + norm(q.p2) * B2 * B2 + 2.0 * x.real();
    }

    const CoeffSet c = coeff_l(p, at);
    auto l = [&c](int i) { return c.l(i); };
    const double direct = D2 + norm(l(2)) * B2 * B2 + norm(l(3)) * A2 * B2 + norm(l(4)) * A2 * A2;
    const cplx x = l(2) * be * be * conj(de)
                   + l(3) * al * be * conj(de)
                   + l(4) * al * al * conj(de)
                   + conj(l(2)) * l(3) * B2 * al * conj(be)
                   + conj(l(2)) * l(4) * al * al * conj(be) * conj(be)
                   + conj(l(3)) * l(4) * A2 * al * conj(be)
                   + l(5) * B2 * D2
                   + l(6) * D2
                   + l(7) * D2 * al * conj(be)
                   + l(8) * D2 * conj(al) * be
                   + l(9) * A2 * D2
                   + l(10) * conj(al) * be * ga * conj(de)
                   + l(11) * A2 * ga * conj(de)
                   + l(12) * ga * conj(de)
                   + l(13) * B2 * ga * conj(de)
                   + l(14) * al * conj(be) * ga * conj(de);
    return direct + 2.0 * x.real();
}

/// Nonlinear probe (both waveguides chi2). Γa = 0 gives the linear result.
inline ZenoResult zeno_nonlinear(const CouplerParams& p, const CoherentAmplitudes& a, EvalPoint at,
                                 const EngineOptions& opts = {})
{
    using std::conj;
    using std::norm;
    const CoeffSet c = coeff_l(p, at);
    const ProbeOffCoeffs q = coeff_p(p, at);
    auto l = [&c](int i) { return c.l(i); };
    auto lc = [&c](int i) { return conj(c.l(i)); };

    const cplx al = a.alpha, be = a.beta, ga = a.gamma, de = a.delta;
    const cplx alc = conj(al), bec = conj(be), gac = conj(ga), dec = conj(de);
    const double A2 = norm(al), B2 = norm(be), D2 = norm(de);

    detail::ConjugatePairSum s;
    s.real_terms = (norm(l(2)) - norm(q.p2)) * B2 * B2 + norm(l(3)) * A2 * B2 + norm(l(4)) * A2 * A2;
    s.add((l(2) - q.p2) * be * be * dec, (lc(2) - conj(q.p2)) * bec * bec * de);
    s.add(l(3) * al * be * dec, lc(3) * alc * bec * de);
    s.add(l(4) * al * al * dec, lc(4) * alc * alc * de);
    s.add(lc(2) * l(3) * B2 * al * bec, l(2) * lc(3) * B2 * alc * be);
    s.add(lc(2) * l(4) * al * al * bec * bec, l(2) * lc(4) * alc * alc * be * be);
    s.add(lc(3) * l(4) * A2 * al * bec, l(3) * lc(4) * A2 * alc * be);
    s.add((l(5) - q.p5) * B2 * D2, (lc(5) - conj(q.p5)) * B2 * D2);
    s.add((l(6) - q.p6) * D2, (lc(6) - conj(q.p6)) * D2);
    s.add(l(7) * D2 * al * bec, lc(7) * D2 * alc * be);
    s.add(l(8) * D2 * alc * be, lc(8) * D2 * al * bec);
    s.add(l(9) * A2 * D2, lc(9) * A2 * D2);
    s.add(l(10) * alc * be * ga * dec, lc(10) * al * bec * gac * de);
    s.add(l(11) * A2 * ga * dec, lc(11) * A2 * gac * de);
    s.add(l(12) * ga * dec, lc(12) * gac * de);
    s.add(l(13) * B2 * ga * dec, lc(13) * B2 * gac * de);
    s.add(l(14) * al * bec * ga * dec, lc(14) * alc * be * gac * de);

    ZenoResult r;
    r.variant = Variant::Nonlinear;
    r.value = s.total().real();
    r.imag_residual = std::abs(s.total().imag());
    r.flags = c.flags;
    r.mean_n_probe_on = mean_photon_b2(p, a, at, Probe::Coupled);
    r.mean_n_probe_off = mean_photon_b2(p, a, at, Probe::Decoupled);
    detail::finish(r, opts);
    return r;
}

/// Linear probe (chi1 probe waveguide). Γa and γ are ignored.
inline ZenoResult zeno_linear(const CouplerParams& params, const CoherentAmplitudes& a, EvalPoint at,
                              const EngineOptions& opts = {})
{
    using std::conj;
    using std::norm;
    CouplerParams p = params;
    p.gamma_a = 0.0;
    const CoeffSet c = coeff_l(p, at);
    const ProbeOffCoeffs q = coeff_p(p, at);
    auto l = [&c](int i) { return c.l(i); };
    auto lc = [&c](int i) { return conj(c.l(i)); };

    const cplx al = a.alpha, be = a.beta, de = a.delta;
    const cplx alc = conj(al), bec = conj(be), dec = conj(de);
    const double A2 = norm(al), B2 = norm(be), D2 = norm(de);

    detail::ConjugatePairSum s;
    s.real_terms = (norm(l(2)) - norm(q.p2)) * B2 * B2 + norm(l(3)) * A2 * B2 + norm(l(4)) * A2 * A2;
    s.add((l(2) - q.p2) * be * be * dec, (lc(2) - conj(q.p2)) * bec * bec * de);
    s.add(l(3) * al * be * dec, lc(3) * alc * bec * de);
    s.add(l(4) * al * al * dec, lc(4) * alc * alc * de);
    s.add(lc(2) * l(3) * B2 * al * bec, l(2) * lc(3) * B2 * alc * be);
    s.add(lc(2) * l(4) * al * al * bec * bec, l(2) * lc(4) * alc * alc * be * be);
    s.add(lc(3) * l(4) * A2 * al * bec, l(3) * lc(4) * A2 * alc * be);
    s.add((l(5) - q.p5) * B2 * D2, (lc(5) - conj(q.p5)) * B2 * D2);
    s.add((l(6) - q.p6) * D2, (lc(6) - conj(q.p6)) * D2);
    s.add(l(7) * D2 * al * bec, lc(7) * D2 * alc * be);
    s.add(l(8) * D2 * alc * be, lc(8) * D2 * al * bec);
    s.add(l(9) * A2 * D2, lc(9) * A2 * D2);

    ZenoResult r;
    r.variant = Variant::Linear;
    r.value = s.total().real();
    r.imag_residual = std::abs(s.total().imag());
    r.flags = c.flags;
    r.mean_n_probe_on = mean_photon_b2(p, a, at, Probe::Coupled);
    r.mean_n_probe_off = mean_photon_b2(p, a, at, Probe::Decoupled);
    detail::finish(r, opts);
    return r;
}

/// delta = 0. Only the b1-b2 conversion terms survive, so Γa, Δka and γ drop out.
inline ZenoResult zeno_spontaneous(const CouplerParams& p, const CoherentAmplitudes& a, EvalPoint at,
                                   const EngineOptions& opts = {})
{
    using std::conj;
    using std::norm;
    if (!a.spontaneous())
        throw DeltaNotZero();
    CouplerParams pb = p; // l2..l4 never involve the probe nonlinearity
    pb.gamma_a = 0.0;
    const CoeffSet c = coeff_l(pb, at);
    const ProbeOffCoeffs q = coeff_p(pb, at);
    auto l = [&c](int i) { return c.l(i); };
    auto lc = [&c](int i) { return conj(c.l(i)); };

    const cplx al = a.alpha, be = a.beta;
    const cplx alc = conj(al), bec = conj(be);
    const double A2 = norm(al), B2 = norm(be);

    detail::ConjugatePairSum s;
    s.real_terms = (norm(l(2)) - norm(q.p2)) * B2 * B2 + norm(l(3)) * A2 * B2 + norm(l(4)) * A2 * A2;
    s.add(lc(2) * l(3) * B2 * al * bec, l(2) * lc(3) * B2 * alc * be);
    s.add(lc(2) * l(4) * al * al * bec * bec, l(2) * lc(4) * alc * alc * be * be);
    s.add(lc(3) * l(4) * A2 * al * bec, l(3) * lc(4) * A2 * alc * be);

    ZenoResult r;
    r.variant = Variant::Spontaneous;
    r.value = s.total().real();
    r.imag_residual = std::abs(s.total().imag());
    r.flags = c.flags;
    r.mean_n_probe_on = mean_photon_b2(pb, a, at, Probe::Coupled);
    r.mean_n_probe_off = mean_photon_b2(pb, a, at, Probe::Decoupled);
    detail::finish(r, opts);
    return r;
}

} // namespace nlzeno
