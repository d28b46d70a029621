#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <string>

#include "nlzeno/params.hpp"

namespace nlzeno {

enum class Mismatch { a = 0, b = 1, ab = 2 };

/// z-dependent phase factors and resonance constants shared by l2..l14.
struct HelperQuantities {
    std::array<cplx, 3> g_plus;  // 1 + exp(-i dk z), indexed by Mismatch
    std::array<cplx, 3> g_minus; // 1 - exp(-i dk z)
    double dk_ab = 0.0;
    cplx c_a, c_b, c_ab;

    cplx plus(Mismatch m) const { return g_plus[static_cast<int>(m)]; }
    cplx minus(Mismatch m) const { return g_minus[static_cast<int>(m)]; }
};

/// Coefficients of the b2(z) expansion, 1-based: l(1) .. l(14).
struct CoeffSet {
    std::array<cplx, 14> values{};
    Flags flags;

    cplx l(int i) const { return values.at(static_cast<std::size_t>(i - 1)); }
    cplx& l(int i) { return values.at(static_cast<std::size_t>(i - 1)); }
};

/// k = 0 limits of l2, l5, l6.
struct ProbeOffCoeffs {
    cplx p2, p5, p6;
};

namespace detail {

// 1 - exp(-i x), evaluated without the cancellation of 1 - cos x.
inline cplx one_minus_expi(double x)
{
    const double h = std::sin(0.5 * x);
    return {2.0 * h * h, std::sin(x)};
}

} // namespace detail

inline HelperQuantities helpers(const CouplerParams& p, EvalPoint at)
{
    const double z = at.length(p);
    const double K = std::abs(p.k);
    const double K2 = 4.0 * K * K;
    HelperQuantities h;
    h.dk_ab = p.dk_ab();
    const double dks[3] = {p.dk_a, p.dk_b, h.dk_ab};
    for (int i = 0; i < 3; ++i) {
        h.g_minus[i] = detail::one_minus_expi(dks[i] * z);
        h.g_plus[i] = 2.0 - h.g_minus[i];
    }
    h.c_b = p.gamma_b / (K2 - p.dk_b * p.dk_b);
    if (!p.linear_probe()) {
        h.c_a = p.gamma_a / (K2 - p.dk_a * p.dk_a);
        h.c_ab = std::conj(p.gamma_a) * p.gamma_b
                 / (p.dk_a * p.dk_b * h.dk_ab * (K2 - p.dk_a * p.dk_a) * (K2 - p.dk_b * p.dk_b)
                    * (K2 - h.dk_ab * h.dk_ab));
    }
    return h;
}

/// Closed-form l1..l14 at interaction length `at`.
///
/// Term by term, one line per bracket, no regrouping. G symbols inside
/// brackets are starred (G* = 1 -/+ exp(+i dk z)) unless noted. Six sub-terms
/// of l10..l14 have a plausible alternative form; the rejected one is noted
/// next to each. Checked against an independent second-order solution
/// of the Heisenberg equations (tests/support/perturbative_reference.hpp).
inline CoeffSet coeff_l(const CouplerParams& p, EvalPoint at)
{
    using std::conj;
    constexpr cplx I{0.0, 1.0};

    const HelperQuantities h = helpers(p, at);
    const double z = at.length(p);
    const double K = std::abs(p.k);
    const cplx k = p.k;
    const cplx kc = conj(p.k);
    const double s2 = std::sin(2.0 * K * z);
    const double c2 = std::cos(2.0 * K * z);
    const double sk = std::sin(K * z);
    const double sk2 = sk * sk;

    const double db = p.dk_b;
    const cplx gb = p.gamma_b;
    const cplx Cb = h.c_b;
    const cplx Gbm = conj(h.minus(Mismatch::b));
    const cplx Gbp = conj(h.plus(Mismatch::b));

    CoeffSet c;
    c.l(1) = 1.0;

    // Common bracket of l2 and l4: [2|k|(G_b+* - 1) sin2|k|z - i dk_b (1 - (G_b+* - 1) cos2|k|z)]
    const cplx shg_bracket = 2.0 * K * (Gbp - 1.0) * s2 - I * db * (1.0 - (Gbp - 1.0) * c2);

    c.l(2) = -gb * Gbm / (2.0 * db) + I * Cb / 2.0 * shg_bracket;

    c.l(3) = -Cb * K * (I * db * (Gbp - 1.0) * s2 + 2.0 * K * (1.0 - (Gbp - 1.0) * c2)) / kc;

    c.l(4) = gb * K * K * Gbm / (2.0 * kc * kc * db)
             + I * Cb * K * K / (2.0 * kc * kc) * shg_bracket;

    const double Cb2 = std::norm(Cb);
    const double K3 = K * K * K, K4 = K3 * K, K5 = K4 * K, K6 = K5 * K;
    const double db2 = db * db, db3 = db2 * db, db4 = db3 * db, db5 = db4 * db;

    c.l(5) = Cb2 / (K * db2)
             * (-16.0 * K5 * (Gbm + I * db * z)
                - 8.0 * I * K4 * db * Gbm * s2
                + 6.0 * I * K * K * db3 * Gbm * s2
                - I * db5 * s2
                + 4.0 * K3 * db2 * (c2 - 1.0 + 3.0 * Gbm + 3.0 * I * db * z)
                + db4 * K * ((1.0 - 2.0 * Gbm) * c2 - 1.0 - 2.0 * Gbm - 2.0 * I * db * z));

    c.l(6) = Cb2 / db2
             * (-16.0 * K4 * (Gbm + I * db * z)
                - 4.0 * I * K * db3 * (Gbp - 1.0) * s2
                + 4.0 * K * K * db2 * (c2 * (Gbp - 1.0) + 2.0 * Gbm - 1.0 + 3.0 * I * db * z)
                + db4 * (c2 * (Gbp - 1.0) - 1.0 - Gbm - 2.0 * I * db * z));

    c.l(7) = Cb2 / (kc * db)
             * (2.0 * db4 * sk2
                + 4.0 * I * K3 * db * s2
                - I * K * db3 * (2.0 * Gbm - 1.0) * s2
                + 8.0 * K4 * (-Gbm * c2 + Gbm - I * db * z)
                + 2.0 * K * K * db2 * (3.0 * Gbm * c2 - Gbm + I * db * z));

    c.l(8) = -Cb2 / (k * db)
             * (2.0 * db4 * sk2
                - I * K * db3 * s2
                + 4.0 * I * K3 * db * (2.0 * Gbm - 1.0) * s2
                + 8.0 * K4 * (-Gbm * c2 + Gbm + I * db * z)
                + 2.0 * K * K * db2 * ((Gbp + 2.0) * c2 - Gbm - 4.0 - I * db * z));

    c.l(9) = Cb2 / (K * db2)
             * (-16.0 * K5 * (Gbm + I * db * z)
                + (8.0 * I * K4 * db * Gbm - 2.0 * I * K * K * db3 * (Gbp + 2.0) + I * db5) * s2
                + 4.0 * K3 * ((1.0 - 2.0 * Gbm) * c2 - 1.0 + Gbm + 3.0 * I * db * z) * db2
                + K * db4 * (c2 - 1.0 - 2.0 * I * db * z));

    c.flags = near_singular(p) ? Flags(Flag::near_singular) : Flags();
    // The l10..l14 braces vanish at z = 0 only through cancellation of O(|k|^6 dk)
    // terms, which leaves rounding residue; the boundary value is exact.
    if (p.linear_probe() || z == 0.0)
        return c; // C_ab ∝ Γa* vanishes with a linear probe

    const double da = p.dk_a;
    const double dab = h.dk_ab;
    const double da2 = da * da, da3 = da2 * da;
    const double dab2 = dab * dab, dab3 = dab2 * dab;
    const cplx Cab = h.c_ab;
    const cplx Gam = conj(h.minus(Mismatch::a));
    const cplx Gap = conj(h.plus(Mismatch::a));
    const cplx Gabm = conj(h.minus(Mismatch::ab));
    const cplx Gabp = conj(h.plus(Mismatch::ab));
    const cplx Gabp_unstarred = h.plus(Mismatch::ab); // the (G_ab+ - 1) prefactor is not starred

    // l10. Alternative form of the first brace, last factor: (G_a-* - 1);
    // it flips the sign of the exp(i dk_a z) sin2|k|z component and is rejected.
    c.l(10) = 2.0 * Cab * K * (Gabp_unstarred - 1.0) / kc
              * (2.0 * I * K * K * db * dab * s2
                     * (4.0 * K * K * (db * (Gam - 1.0) - da * (Gam + 1.0) + db)
                        - (db2 * (db - 2.0 * da) + (dab3 - 2.0 * da2 * db) * (Gap - 1.0)))
                 - I * da2 * db2 * dab3 * (Gap - 1.0) * s2
                 + 16.0 * K5 * (-db * dab * Gam * c2 + (da * (Gabm - 1.0) + dab * (Gap - 1.0) + db) * da)
                 - 4.0 * K3
                       * (db * dab * c2 * (da2 * (3.0 * Gap - 2.0) - da * db * Gap - db2 * Gam)
                          + da * ((db2 * dab + dab3) * (Gap - 1.0) + db3 + db * dab2
                                  - (Gabp - 1.0) * (2.0 * da2 * db - 4.0 * da * db2 + da3 + 2.0 * db3)))
                 - K * da * db * dab2
                       * (db * dab * (Gam - 1.0) + 2.0 * da2 * (Gabp - 1.0) - db2
                          + c2 * (-db2 + (da * db - 2.0 * da2 + db2) * (Gap - 1.0))));

    // l11. Alternative form of the |k|^2 brace: dk_a^3 (G_ab-* + 1)(2 dk_ab - dk_b);
    // it leaves l11(0) = 2 dk_a^3 (2 dk_ab - dk_b) instead of 0 and is rejected.
    c.l(11) = -2.0 * Cab * k * (Gabp_unstarred - 1.0) / kc
              * (32.0 * K6 * (da * (Gabm - 1.0) + db + dab * (Gap - 1.0))
                 + 16.0 * I * db * dab * K5 * Gam * s2
                 - 2.0 * da2 * db2 * dab3 * (Gap - 1.0) * sk2
                 + (4.0 * I * db * dab * K3 * (-da * db * Gap - db2 * Gam + da2 * (3.0 * Gap - 2.0))
                    - I * da * (db2 + (2.0 * da2 - da * db - db2) * (Gap - 1.0)) * db * dab2 * K)
                       * s2
                 - 8.0 * K4
                       * (db * dab * c2 * (db * Gam - da * (Gam + 1.0))
                          - da * (Gabp - 1.0) * (da * db + 3.0 * dab2)
                          + db * (dab2 + db2)
                          + (Gap - 1.0) * (-5.0 * da2 * db + 4.0 * da * db2 + 3.0 * da3 - 2.0 * db3))
                 + 2.0 * dab * K * K
                       * (db * (db2 * (db - 2.0 * da) + (Gap - 1.0) * (dab3 - 2.0 * da2 * db)) * c2
                          + da3 * (Gabm - 1.0) * (2.0 * dab - db)
                          + db3 * dab
                          + (Gap - 1.0) * (2.0 * da2 * dab2 - 2.0 * da * db3 + 3.0 * da2 * db2 + db4)));

    // l12. Alternative form of the |k|^2 brace, last term: dk_a^3 (G_a-* - 1) dk_b^3,
    // which is of degree 6 among degree-3 terms and is rejected.
    c.l(12) = -2.0 * Cab * k * (Gabp_unstarred - 1.0) * (4.0 * K * K - dab2) / kc
              * (8.0 * K4 * (da * (Gabm - 1.0) + dab * (Gap - 1.0) + db)
                 + da2 * db2 * dab * sk2 * (Gap - 1.0)
                 - 2.0 * K * K
                       * (da * dab * (Gap - 1.0) * c2 * db + dab * (da2 + db2) * (Gap - 1.0)
                          + da3 * (Gabm - 1.0) + db3)
                 + I * da * db * K * (da2 - db2) * (Gap - 1.0) * s2);

    // l13. Alternative form of the |k|^3 brace, second term: -dk_ab (G_ab+* - 1)(...);
    // it adds a constant 2 C_ab k|k|/k* 8|k|^3 (dk_a^2 dk_b + dk_a dk_b^2 - dk_b^3) and is rejected.
    c.l(13) = -2.0 * Cab * k * K * (Gabp_unstarred - 1.0) / kc
              * (32.0 * K5 * (da * (Gabm - 1.0) + db + dab * (Gap - 1.0))
                 - 4.0 * I * db * dab * K * K * s2
                       * (4.0 * K * K * Gam - da * db * (3.0 * Gap - 2.0) + da2 * Gap - db2 * Gam)
                 - I * da * db2 * dab2 * s2 * (-db + dab * (Gap - 1.0))
                 - 8.0 * K3
                       * (db * dab * (-db * Gam + da * (Gap + 1.0)) * c2
                          - da * (Gabp - 1.0) * (da2 + db * dab)
                          + (db + dab * (Gap - 1.0)) * (db2 + dab2))
                 - 2.0 * db * dab * K
                       * (c2 * (-db2 * (da + dab) - dab2 * (da + db) * (Gap - 1.0))
                          - db * dab2 * (Gap - 1.0) + da3 * (Gabp - 1.0) - db2 * dab));

    // l14. Alternative form of the leading term: without the sin^2|k|z factor;
    // it violates l14(0) = 0 and is rejected.
    c.l(14) = -2.0 * Cab * k * k * (Gabp_unstarred - 1.0) / kc
              * (2.0 * da * db2 * dab2 * (-db + dab * (Gap - 1.0)) * sk2
                 + 2.0 * I * db * dab * K * s2
                       * (-4.0 * K * K * (-db * Gam + da * (Gap + 1.0)) + (da + dab) * db2
                          + dab2 * (da + db) * (Gap - 1.0))
                 + 16.0 * K4
                       * (-db * dab * Gam * c2
                          + da * ((Gap - 1.0) * dab + ((db - dab) * (Gabp - 1.0) - db)))
                 - 4.0 * K * K
                       * (db * dab * (-da * db * (3.0 * Gap - 2.0) - db2 * Gam + da2 * Gap) * c2
                          + da * ((db - dab) * da2 * (Gabp - 1.0) + (db2 + dab2) * (-db + dab * (Gap - 1.0)))));

    return c;
}

/// The k = 0 limits. p5 = 2 p6 holds exactly (p5 is formed by doubling p6).
inline ProbeOffCoeffs coeff_p(const CouplerParams& p, EvalPoint at)
{
    constexpr cplx I{0.0, 1.0};
    const double z = at.length(p);
    const double db = p.dk_b;
    const cplx Gbm = std::conj(detail::one_minus_expi(db * z));
    ProbeOffCoeffs out;
    out.p2 = -p.gamma_b * Gbm / db;
    out.p6 = -2.0 * std::norm(p.gamma_b) * (Gbm + I * db * z) / (db * db);
    out.p5 = 2.0 * out.p6;
    return out;
}

/// One line per coefficient, `l<i> = <re> <im>`, 17 significant digits.
inline std::string dump(const CoeffSet& c)
{
    std::string out;
    char line[96];
    for (int i = 1; i <= 14; ++i) {
        std::snprintf(line, sizeof line, "l%d = %.17g %.17g\n", i, c.l(i).real(), c.l(i).imag());
        out += line;
    }
    return out;
}

} // namespace nlzeno
