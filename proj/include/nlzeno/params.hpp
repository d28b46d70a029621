#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nlzeno {

using cplx = std::complex<double>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for any parameter set the closed-form solution cannot accept.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The denominators guarded by the validator.
enum class Manifold { dk_b, dk_a, dk_ab, resonance_a, resonance_b, resonance_ab };

inline const char* to_string(Manifold m)
{
    switch (m) {
    case Manifold::dk_b: return "dk_b";
    case Manifold::dk_a: return "dk_a";
    case Manifold::dk_ab: return "dk_ab";
    case Manifold::resonance_a: return "resonance_a";
    case Manifold::resonance_b: return "resonance_b";
    case Manifold::resonance_ab: return "resonance_ab";
    }
    return "unknown";
}

class SingularDenominator : public ValidationError {
public:
    SingularDenominator(Manifold which, double distance)
        : ValidationError(std::string("singular denominator: ") + to_string(which)
                          + " (relative distance " + std::to_string(distance) + ")"),
          which_(which), distance_(distance) {}

    Manifold which() const noexcept { return which_; }
    double distance() const noexcept { return distance_; }

private:
    Manifold which_;
    double distance_;
};

class PerturbativeCeilingExceeded : public ValidationError {
public:
    PerturbativeCeilingExceeded(const char* name, double ratio, double ceiling)
        : ValidationError(std::string("|") + name + "|/|k| = " + std::to_string(ratio)
                          + " exceeds the perturbative ceiling " + std::to_string(ceiling)),
          ratio_(ratio) {}

    double ratio() const noexcept { return ratio_; }

private:
    double ratio_;
};

/// Warning bits carried by results. Rendered as `name|name` in output files.
enum class Flag : std::uint32_t {
    weak_perturbative = 1u << 0, // |Γ|/|k| above the warning threshold
    near_singular = 1u << 1,     // a guarded denominator inside the warning band
    truncation_tail = 1u << 2,   // coherent-state mass outside the Fock basis above 1e-8
    invalid = 1u << 3,           // point rejected by validation
};

class Flags {
public:
    constexpr Flags() = default;
    constexpr Flags(Flag f) : bits_(static_cast<std::uint32_t>(f)) {}

    constexpr bool has(Flag f) const { return (bits_ & static_cast<std::uint32_t>(f)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint32_t bits() const { return bits_; }

    constexpr Flags& operator|=(Flags o)
    {
        bits_ |= o.bits_;
        return *this;
    }
    friend constexpr Flags operator|(Flags a, Flags b) { return a |= b; }
    friend constexpr bool operator==(Flags, Flags) = default;

    std::string to_string() const
    {
        static constexpr std::pair<Flag, const char*> names[] = {
            {Flag::weak_perturbative, "weak_perturbative"},
            {Flag::near_singular, "near_singular"},
            {Flag::truncation_tail, "truncation_tail"},
            {Flag::invalid, "invalid"},
        };
        std::string out;
        for (auto [f, name] : names) {
            if (!has(f))
                continue;
            if (!out.empty())
                out += '|';
            out += name;
        }
        return out;
    }

private:
    std::uint32_t bits_ = 0;
};

/// Physical constants of the coupler. ħ = 1; every quantity is expressed in
/// the same inverse-length unit. After validation |k| = 1.
struct CouplerParams {
    cplx k{1.0, 0.0};       // linear (evanescent) coupling
    cplx gamma_a{0.0, 0.0}; // probe SHG coupling
    cplx gamma_b{0.0, 0.0}; // system SHG coupling
    double dk_a = 0.0;      // probe phase mismatch
    double dk_b = 0.0;      // system phase mismatch

    double dk_ab() const { return dk_a - dk_b; }
    bool linear_probe() const { return gamma_a == cplx{}; }

    friend bool operator==(const CouplerParams&, const CouplerParams&) = default;
};

/// Initial coherent amplitudes of a1, b1, a2, b2.
struct CoherentAmplitudes {
    cplx alpha;
    cplx beta;
    cplx gamma;
    cplx delta;

    bool spontaneous() const { return delta == cplx{}; }

    friend bool operator==(const CoherentAmplitudes&, const CoherentAmplitudes&) = default;
};

/// Rescaled interaction length kz = |k| z.
class EvalPoint {
public:
    explicit EvalPoint(double kz) : kz_(kz)
    {
        if (!(kz >= 0.0) || !std::isfinite(kz))
            throw ValidationError("interaction length kz must be finite and >= 0");
    }

    double kz() const { return kz_; }
    double length(const CouplerParams& p) const { return kz_ / std::abs(p.k); }

private:
    double kz_;
};

struct ValidationOptions {
    double tol_sing = 1e-9;              // relative to |k|
    double perturbative_ceiling = 0.2;
    double perturbative_warning = 0.05;
    double near_singular_band = 1e-4;
    bool allow_negative_mismatch = false;
};

struct Validated {
    CouplerParams params;
    Flags flags;
};

namespace detail {

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Relative distances of every guarded quantity to its singular value, in units
// where |k| = 1. Entries that do not apply (Γa = 0) are +inf.
struct SingularDistances {
    double dk_b, dk_a, dk_ab, resonance_a, resonance_b, resonance_ab;
};

inline SingularDistances singular_distances(const CouplerParams& p)
{
    const double K = std::abs(p.k);
    const double inf = INFINITY;
    auto resonance = [K](double dk) { return std::abs(4.0 * K * K - dk * dk) / (4.0 * K * K); };
    SingularDistances d{};
    d.dk_b = std::abs(p.dk_b) / K;
    d.resonance_b = resonance(p.dk_b);
    const bool probe_nonlinear = !p.linear_probe();
    d.dk_a = probe_nonlinear ? std::abs(p.dk_a) / K : inf;
    d.dk_ab = probe_nonlinear ? std::abs(p.dk_ab()) / K : inf;
    d.resonance_a = probe_nonlinear ? resonance(p.dk_a) : inf;
    d.resonance_ab = probe_nonlinear ? resonance(p.dk_ab()) : inf;
    return d;
}

} // namespace detail

/// True when any guarded denominator lies within `band` (relative) of zero.
inline bool near_singular(const CouplerParams& p, double band = 1e-4)
{
    const auto d = detail::singular_distances(p);
    for (double x : {d.dk_b, d.dk_a, d.dk_ab, d.resonance_a, d.resonance_b, d.resonance_ab})
        if (x < band)
            return true;
    return false;
}

/// Checks the singular manifolds and the perturbative ceiling, then rescales
/// every quantity so that |k| = 1 (the phase of k is kept).
inline Validated validate_params(const CouplerParams& raw, const ValidationOptions& opts = {})
{
    if (!detail::finite(raw.k) || !detail::finite(raw.gamma_a) || !detail::finite(raw.gamma_b)
        || !std::isfinite(raw.dk_a) || !std::isfinite(raw.dk_b))
        throw ValidationError("coupler parameters must be finite");
    if (!(opts.tol_sing > 0.0))
        throw ValidationError("singularity tolerance must be positive");

    const double K = std::abs(raw.k);
    if (K == 0.0)
        throw ValidationError("linear coupling k must be nonzero");
    if (!opts.allow_negative_mismatch && (raw.dk_a < 0.0 || raw.dk_b < 0.0))
        throw ValidationError("phase mismatches must be >= 0");

    // |k| already within a few ulp of 1 counts as normalized; keeps the map idempotent.
    const double scale = std::abs(K - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon() ? 1.0 : K;
    CouplerParams p;
    p.k = raw.k / scale;
    p.gamma_a = raw.gamma_a / scale;
    p.gamma_b = raw.gamma_b / scale;
    p.dk_a = raw.dk_a / scale;
    p.dk_b = raw.dk_b / scale;

    const auto d = detail::singular_distances(p);
    const std::pair<double, Manifold> checks[] = {
        {d.dk_b, Manifold::dk_b},
        {d.dk_a, Manifold::dk_a},
        {d.dk_ab, Manifold::dk_ab},
        {d.resonance_a, Manifold::resonance_a},
        {d.resonance_b, Manifold::resonance_b},
        {d.resonance_ab, Manifold::resonance_ab},
    };
    for (auto [dist, which] : checks)
        if (dist <= opts.tol_sing)
            throw SingularDenominator(which, dist);

    Flags flags;
    const std::pair<const char*, double> ratios[] = {
        {"gamma_a", std::abs(p.gamma_a)},
        {"gamma_b", std::abs(p.gamma_b)},
    };
    for (auto [name, r] : ratios) {
        if (r > opts.perturbative_ceiling)
            throw PerturbativeCeilingExceeded(name, r, opts.perturbative_ceiling);
        if (r > opts.perturbative_warning)
            flags |= Flag::weak_perturbative;
    }
    if (near_singular(p, opts.near_singular_band))
        flags |= Flag::near_singular;
    return {p, flags};
}

struct AmplitudeOptions {
    double ceiling = 100.0;
};

inline void validate_amplitudes(const CoherentAmplitudes& a, const AmplitudeOptions& opts = {})
{
    for (cplx v : {a.alpha, a.beta, a.gamma, a.delta}) {
        if (!detail::finite(v))
            throw ValidationError("coherent amplitudes must be finite");
        if (std::abs(v) > opts.ceiling)
            throw ValidationError("coherent amplitude magnitude " + std::to_string(std::abs(v))
                                  + " exceeds ceiling " + std::to_string(opts.ceiling));
    }
}

} // namespace nlzeno
