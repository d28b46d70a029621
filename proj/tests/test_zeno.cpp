#include <gtest/gtest.h>

#include <random>

#include "nlzeno/fock.hpp"
#include "nlzeno/zeno.hpp"

using namespace nlzeno;

namespace {

CouplerParams acceptance_params()
{
    CouplerParams p;
    p.gamma_a = 1e-2;
    p.gamma_b = 1e-2;
    p.dk_a = 1.1e-3;
    p.dk_b = 1e-3;
    return p;
}

const CoherentAmplitudes acceptance_amps{0.8, 0.6, 0.4, 0.5};

struct RandomPoint {
    CouplerParams p;
    CoherentAmplitudes a;
    double kz;
};

RandomPoint random_point(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto ph = [&] { return 6.283185307179586 * u(rng); };
    RandomPoint r;
    r.p.k = 1.0;
    r.p.gamma_a = std::polar(0.001 + 0.05 * u(rng), ph());
    r.p.gamma_b = std::polar(0.001 + 0.05 * u(rng), ph());
    r.p.dk_a = 0.01 + 1.5 * u(rng);
    r.p.dk_b = 0.01 + 1.5 * u(rng);
    if (std::abs(r.p.dk_a - r.p.dk_b) < 1e-2)
        r.p.dk_a += 0.05;
    r.a = {std::polar(4.0 * u(rng), ph()), std::polar(4.0 * u(rng), ph()), std::polar(4.0 * u(rng), ph()),
           std::polar(4.0 * u(rng), ph())};
    r.kz = 10.0 * u(rng);
    return r;
}

double rel(double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); }

} // namespace

TEST(MeanPhotonB2, InitialValueAndFreeEvolution)
{
    const CouplerParams p = acceptance_params();
    EXPECT_EQ(mean_photon_b2(p, acceptance_amps, EvalPoint(0.0)), 0.25);
    EXPECT_EQ(mean_photon_b2(p, acceptance_amps, EvalPoint(0.0), Probe::Decoupled), 0.25);

    CouplerParams free = p;
    free.gamma_a = 0.0;
    free.gamma_b = 0.0;
    EXPECT_EQ(mean_photon_b2(free, acceptance_amps, EvalPoint(3.0)), 0.25);
    EXPECT_EQ(mean_photon_b2(free, acceptance_amps, EvalPoint(3.0), Probe::Decoupled), 0.25);
}

TEST(Classify, Bands)
{
    EXPECT_EQ(classify(-1e-3), Regime::Zeno);
    EXPECT_EQ(classify(2e-7), Regime::AntiZeno);
    EXPECT_EQ(classify(0.0), Regime::Neutral);
    EXPECT_EQ(classify(5e-16), Regime::Neutral);
    EXPECT_EQ(classify(5e-16, 1e-16), Regime::AntiZeno);
    EXPECT_EQ(classify(NAN), Regime::Undefined);
    EXPECT_STREQ(to_string(Regime::AntiZeno), "anti_zeno");
}

TEST(ZenoNonlinear, AcceptanceValue)
{
    const ZenoResult r = zeno_nonlinear(acceptance_params(), acceptance_amps, EvalPoint(1.0));
    EXPECT_EQ(r.regime, Regime::Zeno);
    EXPECT_LT(r.value, 0.0);
    EXPECT_LE(r.consistency_residual, 1e-9);
    EXPECT_LE(r.imag_residual, 1e-12 * (1.0 + std::abs(r.value)));
    EXPECT_NEAR(r.value, r.mean_n_probe_on - r.mean_n_probe_off, 1e-12);
}

TEST(ZenoNonlinear, VanishesAtZeroLength)
{
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const RandomPoint r = random_point(rng);
        EXPECT_EQ(zeno_nonlinear(r.p, r.a, EvalPoint(0.0)).value, 0.0);
        EXPECT_EQ(zeno_linear(r.p, r.a, EvalPoint(0.0)).value, 0.0);
        EXPECT_EQ(zeno_nonlinear(r.p, r.a, EvalPoint(0.0)).regime, Regime::Neutral);
    }
}

TEST(ZenoNonlinear, VanishesWithoutSystemNonlinearity)
{
    std::mt19937_64 rng(2);
    for (int i = 0; i < 50; ++i) {
        RandomPoint r = random_point(rng);
        r.p.gamma_b = 0.0;
        EXPECT_EQ(zeno_nonlinear(r.p, r.a, EvalPoint(r.kz)).value, 0.0);
        EXPECT_EQ(zeno_linear(r.p, r.a, EvalPoint(r.kz)).value, 0.0);
    }
}

TEST(ZenoNonlinear, ReducesToLinearProbe)
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        RandomPoint r = random_point(rng);
        r.p.gamma_a = 0.0;
        const ZenoResult n = zeno_nonlinear(r.p, r.a, EvalPoint(r.kz));
        const ZenoResult l = zeno_linear(r.p, r.a, EvalPoint(r.kz));
        EXPECT_LE(rel(n.value, l.value), 1e-12) << "sample " << i;
        EXPECT_EQ(l.variant, Variant::Linear);
    }
}

TEST(ZenoLinear, IgnoresProbeNonlinearity)
{
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        RandomPoint r = random_point(rng);
        CouplerParams q = r.p;
        q.gamma_a = 0.0;
        CoherentAmplitudes b = r.a;
        b.gamma = 3.0;
        EXPECT_EQ(zeno_linear(r.p, r.a, EvalPoint(r.kz)).value, zeno_linear(q, b, EvalPoint(r.kz)).value);
    }
}

TEST(ZenoNonlinear, PhaseEquivalence)
{
    const CouplerParams p = acceptance_params();
    const CoherentAmplitudes plus{-6.0, 6.0, 3.0, 2.0}, minus{6.0, -6.0, 3.0, 2.0};
    EXPECT_LE(rel(zeno_nonlinear(p, plus, EvalPoint(1.5)).value, zeno_nonlinear(p, minus, EvalPoint(1.5)).value),
              1e-12);

    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        const RandomPoint r = random_point(rng);
        CoherentAmplitudes x = r.a, y = r.a;
        x.alpha = -r.a.alpha;
        y.beta = -r.a.beta;
        EXPECT_LE(rel(zeno_nonlinear(r.p, x, EvalPoint(r.kz)).value, zeno_nonlinear(r.p, y, EvalPoint(r.kz)).value),
                  1e-12)
            << "sample " << i;
    }
}

TEST(ZenoLinear, DeltaPhaseFlipsRegime)
{
    CouplerParams p;
    p.gamma_b = 1e-2;
    p.dk_b = 1e-3;
    bool flipped = false;
    for (int i = 1; i <= 200 && !flipped; ++i) {
        const double kz = 0.01 * i;
        const double up = zeno_linear(p, {5.0, 3.0, 0.0, 1.0}, EvalPoint(kz)).value;
        const double down = zeno_linear(p, {5.0, 3.0, 0.0, -1.0}, EvalPoint(kz)).value;
        flipped = std::abs(up) > 1e-10 && std::abs(down) > 1e-10 && (up > 0) != (down > 0);
    }
    EXPECT_TRUE(flipped);
}

TEST(ZenoSpontaneous, RequiresVacuumSecondHarmonic)
{
    EXPECT_THROW(zeno_spontaneous(acceptance_params(), acceptance_amps, EvalPoint(1.0)), DeltaNotZero);
    EXPECT_THROW(zeno_spontaneous(acceptance_params(), acceptance_amps, EvalPoint(1.0)), ValidationError);
}

TEST(ZenoSpontaneous, ProbeQuantitiesDropOut)
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        RandomPoint r = random_point(rng);
        r.a.delta = 0.0;
        const EvalPoint at(r.kz);
        const double base = zeno_spontaneous(r.p, r.a, at).value;

        RandomPoint s = r;
        s.p.gamma_a = std::polar(0.05 * u(rng), 6.0 * u(rng));
        s.p.dk_a = 0.02 + u(rng);
        s.a.gamma = std::polar(5.0 * u(rng), 6.0 * u(rng));
        if (std::abs(s.p.dk_a - s.p.dk_b) < 1e-2)
            s.p.dk_a += 0.05;
        EXPECT_LE(rel(zeno_spontaneous(s.p, s.a, at).value, base), 1e-12) << "sample " << i;
        EXPECT_LE(rel(zeno_nonlinear(r.p, r.a, at).value, base), 1e-12) << "sample " << i;
        EXPECT_LE(rel(zeno_nonlinear(s.p, s.a, at).value, base), 1e-12) << "sample " << i;
    }
}

TEST(ZenoSpontaneous, SecondOrderInCoupling)
{
    CouplerParams p = acceptance_params();
    const CoherentAmplitudes a{0.8, 0.6, 0.4, 0.0};
    std::vector<double> ratios;
    for (double lambda : {0.1, 0.05, 0.025}) {
        CouplerParams q = p;
        q.gamma_b *= lambda;
        ratios.push_back(zeno_spontaneous(q, a, EvalPoint(1.0)).value / (lambda * lambda));
    }
    EXPECT_NE(ratios[0], 0.0);
    for (double r : ratios)
        EXPECT_LE(rel(r, ratios[0]), 0.01);
}

TEST(ZenoNonlinear, RealAndConsistentOnRandomInputs)
{
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const RandomPoint r = random_point(rng);
        ZenoResult z;
        ASSERT_NO_THROW(z = zeno_nonlinear(r.p, r.a, EvalPoint(r.kz))) << "sample " << i;
        EXPECT_LE(z.imag_residual, 1e-12 * (1.0 + std::abs(z.value))) << "sample " << i;
        EXPECT_LE(z.consistency_residual, 1e-9) << "sample " << i;
    }
}

TEST(ZenoNonlinear, WeakLinearCouplingSuppressesEffect)
{
    // Same physical length z = 1 with a shrinking evanescent coupling.
    auto at_k = [](double k) {
        CouplerParams p;
        p.k = k;
        p.gamma_a = 1e-4;
        p.gamma_b = 1e-4;
        p.dk_a = 2.2e-3;
        p.dk_b = 1.7e-3;
        return zeno_nonlinear(p, acceptance_amps, EvalPoint(k * 1.0)).value;
    };
    const double big = at_k(1e-2), small = at_k(1e-3), tiny = at_k(1e-4);
    EXPECT_LT(std::abs(small), std::abs(big));
    EXPECT_LT(std::abs(tiny), std::abs(small));
    // leading order is linear in k
    EXPECT_NEAR(tiny / big, 1e-2, 2e-3);
}

TEST(ZenoLinear, MatchesFockOracleAtSmallAmplitudes)
{
    CouplerParams p = acceptance_params();
    p.gamma_a = 0.0;
    const CoherentAmplitudes a{0.3, 0.4, 0.0, 0.2};
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i)
        grid.push_back(0.2 * i);
    OracleSettings s;
    s.truncation = TruncationSpec::weighted_total(10);
    const OracleZeno oz = oracle_zeno(p, a, grid, s);
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        worst = std::max(worst, std::abs(zeno_linear(p, a, EvalPoint(grid[i])).value - oz.delta_n[i]));
        scale = std::max(scale, std::abs(oz.delta_n[i]));
    }
    EXPECT_GT(scale, 1e-6);
    EXPECT_LE(worst, 0.05 * scale);
}

TEST(Finish, ReportsInconsistency)
{
    ZenoResult r;
    r.value = 1e-3;
    r.mean_n_probe_on = 1.0;
    r.mean_n_probe_off = 1.0 - 2e-3;
    EXPECT_THROW(detail::finish(r, {}), ConsistencyFailure);

    EngineOptions lax;
    lax.check_consistency = false;
    ASSERT_NO_THROW(detail::finish(r, lax));
    EXPECT_NEAR(r.consistency_residual, 1.0, 1e-9);
    EXPECT_EQ(r.regime, Regime::AntiZeno);
}

TEST(Finish, FloorProtectsVanishingDifference)
{
    ZenoResult r;
    r.value = 0.0;
    r.mean_n_probe_on = 4.0;
    r.mean_n_probe_off = 4.0 - 1e-15;
    ASSERT_NO_THROW(detail::finish(r, {}));
    EXPECT_LE(r.consistency_residual, 1e-9);
    EXPECT_EQ(r.regime, Regime::Neutral);
}
