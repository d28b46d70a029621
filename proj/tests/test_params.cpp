#include <gtest/gtest.h>

#include <random>

#include "nlzeno/coefficients.hpp"
#include "nlzeno/params.hpp"

using namespace nlzeno;

namespace {

CouplerParams fig2_params()
{
    CouplerParams p;
    p.gamma_b = 1e-2;
    p.dk_b = 1e-3;
    p.dk_a = 0.37; // irrelevant while Γa = 0
    return p;
}

Manifold rejected_manifold(const CouplerParams& p)
{
    try {
        validate_params(p);
    } catch (const SingularDenominator& e) {
        return e.which();
    }
    ADD_FAILURE() << "expected SingularDenominator";
    return Manifold::dk_b;
}

} // namespace

TEST(ValidateParams, AcceptsLinearProbeSet)
{
    const Validated v = validate_params(fig2_params());
    EXPECT_EQ(v.params, fig2_params());
    EXPECT_TRUE(v.flags.empty());
}

TEST(ValidateParams, RejectsZeroSystemMismatch)
{
    CouplerParams p = fig2_params();
    p.dk_b = 0.0;
    EXPECT_EQ(rejected_manifold(p), Manifold::dk_b);
}

TEST(ValidateParams, RejectsEqualMismatchesWithNonlinearProbe)
{
    CouplerParams p = fig2_params();
    p.gamma_a = 1e-2;
    p.dk_a = p.dk_b;
    EXPECT_EQ(rejected_manifold(p), Manifold::dk_ab);
}

TEST(ValidateParams, ProbeManifoldsIgnoredForLinearProbe)
{
    CouplerParams p = fig2_params();
    p.dk_a = p.dk_b;
    EXPECT_NO_THROW(validate_params(p));
    p.dk_a = 0.0;
    EXPECT_NO_THROW(validate_params(p));
    p.gamma_a = 1e-2;
    EXPECT_EQ(rejected_manifold(p), Manifold::dk_a);
}

TEST(ValidateParams, RejectsResonances)
{
    CouplerParams p = fig2_params();
    p.dk_b = 2.0;
    EXPECT_EQ(rejected_manifold(p), Manifold::resonance_b);

    p = fig2_params();
    p.gamma_a = 1e-2;
    p.dk_a = 2.0;
    EXPECT_EQ(rejected_manifold(p), Manifold::resonance_a);

    p.dk_a = 2.5;
    p.dk_b = 0.5;
    EXPECT_EQ(rejected_manifold(p), Manifold::resonance_ab);
}

TEST(ValidateParams, SingularToleranceIsRelativeToK)
{
    CouplerParams p = fig2_params();
    p.k = 1000.0;
    p.gamma_b = 10.0;
    p.dk_b = 5e-7; // 5e-10 relative
    EXPECT_EQ(rejected_manifold(p), Manifold::dk_b);
    p.dk_b = 5e-6;
    EXPECT_NO_THROW(validate_params(p));
    ValidationOptions o;
    o.tol_sing = 1e-8;
    EXPECT_THROW(validate_params(p, o), SingularDenominator);
}

TEST(ValidateParams, PerturbativeCeilingAndWarning)
{
    CouplerParams p = fig2_params();
    p.gamma_b = 0.3;
    EXPECT_THROW(validate_params(p), PerturbativeCeilingExceeded);
    p.gamma_b = 0.1;
    EXPECT_TRUE(validate_params(p).flags.has(Flag::weak_perturbative));
    p.gamma_b = 0.05;
    EXPECT_FALSE(validate_params(p).flags.has(Flag::weak_perturbative));
    p.gamma_b = 1e-2;
    p.gamma_a = cplx{0.0, -0.25};
    EXPECT_THROW(validate_params(p), PerturbativeCeilingExceeded);
}

TEST(ValidateParams, NearSingularBandFlags)
{
    CouplerParams p = fig2_params();
    p.dk_b = 5e-5;
    EXPECT_TRUE(validate_params(p).flags.has(Flag::near_singular));
    p.dk_b = 2e-4;
    EXPECT_FALSE(validate_params(p).flags.has(Flag::near_singular));
}

TEST(ValidateParams, RejectsNonFiniteZeroKAndNegativeMismatch)
{
    CouplerParams p = fig2_params();
    p.k = 0.0;
    EXPECT_THROW(validate_params(p), ValidationError);
    p = fig2_params();
    p.gamma_b = cplx{NAN, 0.0};
    EXPECT_THROW(validate_params(p), ValidationError);
    p = fig2_params();
    p.dk_b = -1e-3;
    EXPECT_THROW(validate_params(p), ValidationError);
    ValidationOptions o;
    o.allow_negative_mismatch = true;
    EXPECT_NO_THROW(validate_params(p, o));
}

TEST(ValidateParams, NormalizesToUnitK)
{
    CouplerParams p;
    p.k = std::polar(4.0, 0.3);
    p.gamma_a = 0.04;
    p.gamma_b = cplx{0.0, 0.08};
    p.dk_a = 0.4;
    p.dk_b = 0.2;
    const CouplerParams n = validate_params(p).params;
    EXPECT_NEAR(std::abs(n.k), 1.0, 1e-15);
    EXPECT_NEAR(std::arg(n.k), 0.3, 1e-15);
    EXPECT_NEAR(std::abs(n.gamma_a - 0.01), 0.0, 1e-17);
    EXPECT_NEAR(std::abs(n.gamma_b - cplx{0.0, 0.02}), 0.0, 1e-17);
    EXPECT_DOUBLE_EQ(n.dk_a, 0.1);
    EXPECT_DOUBLE_EQ(n.dk_b, 0.05);
}

TEST(ValidateParams, NormalizationIsIdempotent)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const double K = 0.1 + 10.0 * u(rng);
        CouplerParams p;
        p.k = std::polar(K, 6.28 * u(rng));
        p.gamma_a = std::polar(0.15 * K * u(rng), 6.28 * u(rng));
        p.gamma_b = std::polar(0.15 * K * u(rng), 6.28 * u(rng));
        p.dk_a = K * (0.01 + 0.5 * u(rng));
        p.dk_b = K * (0.6 + 0.5 * u(rng));
        const CouplerParams once = validate_params(p).params;
        const CouplerParams twice = validate_params(once).params;
        EXPECT_EQ(once, twice) << "sample " << i;
    }
}

TEST(ValidateParams, ScaleInvarianceOfCoefficients)
{
    CouplerParams p;
    p.k = std::polar(1.0, 0.4);
    p.gamma_a = std::polar(0.02, 1.0);
    p.gamma_b = std::polar(0.015, -0.5);
    p.dk_a = 0.3;
    p.dk_b = 0.11;
    for (double lambda : {0.5, 3.0, 17.0}) {
        CouplerParams q = p;
        q.k *= lambda;
        q.gamma_a *= lambda;
        q.gamma_b *= lambda;
        q.dk_a *= lambda;
        q.dk_b *= lambda;
        for (double kz : {0.3, 1.7, 6.0}) {
            // same kz = |k| z means z / lambda in the scaled system
            const CoeffSet a = coeff_l(p, EvalPoint(kz));
            const CoeffSet b = coeff_l(q, EvalPoint(kz));
            const CoeffSet bn = coeff_l(validate_params(q).params, EvalPoint(kz));
            for (int i = 1; i <= 14; ++i) {
                const double scale = std::max(std::abs(a.l(i)), 1e-300);
                EXPECT_LE(std::abs(a.l(i) - b.l(i)) / scale, 1e-9) << "l" << i << " lambda " << lambda;
                EXPECT_LE(std::abs(a.l(i) - bn.l(i)) / scale, 1e-9) << "l" << i << " lambda " << lambda;
            }
        }
    }
}

TEST(EvalPoint, RejectsNegativeAndNonFinite)
{
    EXPECT_THROW(EvalPoint{-1e-12}, ValidationError);
    EXPECT_THROW(EvalPoint{INFINITY}, ValidationError);
    EXPECT_THROW(EvalPoint{NAN}, ValidationError);
    CouplerParams p;
    p.k = 2.0;
    EXPECT_DOUBLE_EQ(EvalPoint(3.0).length(p), 1.5);
}

TEST(Amplitudes, CeilingAndFiniteness)
{
    EXPECT_NO_THROW(validate_amplitudes({5.0, 3.0, 0.0, 1.0}));
    EXPECT_THROW(validate_amplitudes({101.0, 0.0, 0.0, 0.0}), ValidationError);
    EXPECT_THROW(validate_amplitudes({0.0, cplx{0.0, NAN}, 0.0, 0.0}), ValidationError);
    AmplitudeOptions o;
    o.ceiling = 1000.0;
    EXPECT_NO_THROW(validate_amplitudes({101.0, 0.0, 0.0, 0.0}, o));
    EXPECT_TRUE((CoherentAmplitudes{1.0, 1.0, 1.0, 0.0}).spontaneous());
}

TEST(Flags, RenderNames)
{
    Flags f;
    EXPECT_EQ(f.to_string(), "");
    f |= Flag::near_singular;
    f |= Flag::weak_perturbative;
    EXPECT_EQ(f.to_string(), "weak_perturbative|near_singular");
}
