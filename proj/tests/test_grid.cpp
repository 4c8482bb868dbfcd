#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "roitomo/pdo.hpp"
#include "roitomo/phantom.hpp"
#include "roitomo/spectral.hpp"

using namespace roitomo;

TEST(Grid, SpacingAndNodePositions) {
    Grid g(2, 128);
    EXPECT_DOUBLE_EQ(g.h(), 2.0 / 128);
    EXPECT_EQ(g.node_count(), 128u * 128u);
    EXPECT_DOUBLE_EQ(g.position(Index{0, 0, 0})[0], -1.0);
    EXPECT_DOUBLE_EQ(g.position(Index{64, 64, 0})[1], 0.0);
    for (std::size_t k : {0ul, 17ul, 5000ul, 16383ul}) EXPECT_EQ(g.flat(g.unflat(k)), k);
}

TEST(Grid, RejectsBadGeometry) {
    EXPECT_THROW(Grid(2, 4), GeometryError);
    EXPECT_THROW(Grid(4, 16), GeometryError);
    EXPECT_THROW(Grid(2, 16, 1.0, 0), GeometryError);
    EXPECT_THROW(Grid(2, Index{16, 32, 1}, Point{1.0, 1.0, 0.0}, 2), GeometryError);
    EXPECT_NO_THROW(Grid(2, Index{16, 32, 1}, Point{1.0, 2.0, 0.0}, 2));
}

TEST(Grid, FieldsOnDifferentGridsDoNotMix) {
    ScalarField a(Grid(2, 16)), b(Grid(2, 32));
    EXPECT_THROW(inner_product(a, b), GeometryError);
    EXPECT_THROW(a += b, GeometryError);
}

TEST(Phantom, GaussianPeakAtOrigin) {
    Grid g(2, 128);
    PhantomSpec s;
    s.sigma = 0.15;
    const ScalarField f = sample_phantom(s, g).field;
    EXPECT_DOUBLE_EQ(f[g.flat(Index{64, 64, 0})], 1.0);
}

TEST(Phantom, QuadraticPatchHasVanishingThirdDifferences) {
    Grid g(2, 128);
    PhantomSpec s;
    s.kind = PhantomKind::admissible_patch;
    s.poly = {{{0, 0}, 1.0}, {{2, 0}, 1.0}, {{1, 1}, 0.4}, {{0, 2}, -0.5}};
    s.amplitude = 2.0;
    s.outer_radius = 0.3;
    s.outer_center = {0.45, 0.0, 0.0};
    s.outer_amplitude = 0.7;
    const ScalarField f = sample_phantom(s, g).field;
    const RegionMask v = RegionMask::ball(g, s.center, s.v_radius, 2 * g.h()).interior();
    double worst = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (!v.contains(k)) continue;
        const Index i = g.unflat(k);
        auto at = [&](int a, int b) { return f[g.flat(Index{i[0] + a, i[1] + b, 0})]; };
        // third forward differences along each axis and the mixed xxy one
        worst = std::max(worst, std::abs(at(2, 0) - 3 * at(1, 0) + 3 * at(0, 0) - at(-1, 0)));
        worst = std::max(worst, std::abs(at(0, 2) - 3 * at(0, 1) + 3 * at(0, 0) - at(0, -1)));
        worst = std::max(worst, std::abs(at(1, 1) - 2 * at(0, 1) + at(-1, 1) - at(1, 0) + 2 * at(0, 0) - at(-1, 0)));
    }
    EXPECT_LE(worst, 1e-10 * s.amplitude);
}

TEST(Phantom, DiskAreaFraction) {
    Grid g(2, 256);
    PhantomSpec s;
    s.kind = PhantomKind::disk_indicator;
    s.radius = 0.5;
    const ScalarField f = sample_phantom(s, g).field;
    double inside = 0.0;
    for (double v : f.values()) inside += v;
    const double expected = std::numbers::pi * 0.25 / 4.0;
    EXPECT_NEAR(inside / f.size() / expected, 1.0, 0.02);
}

TEST(Phantom, RejectsSupportOutsideBall) {
    Grid g(2, 64);
    PhantomSpec s;
    s.kind = PhantomKind::disk_indicator;
    s.radius = 0.95;
    EXPECT_THROW(sample_phantom(s, g), GeometryError);
    s.radius = 0.3;
    s.center = {0.7, 0.0, 0.0};
    EXPECT_THROW(sample_phantom(s, g), GeometryError);
}

TEST(Phantom, PatchEqualsRuleOnVAndHonoursAnnihilator) {
    Grid g(2, 128);
    std::vector<PhantomSpec> specs(5);
    specs[0].poly = {{{1, 0}, 1.0}, {{0, 2}, 0.3}};
    specs[1].rule = PatchRule::polyharmonic;
    specs[2].rule = PatchRule::plane_wave;
    specs[2].xi0 = {0.0, 9.0, 0.0};
    specs[3].rule = PatchRule::coordinate_independent;
    specs[3].axis = 1;
    specs[4].rule = PatchRule::wave;
    for (PhantomSpec& s : specs) {
        s.kind = PhantomKind::admissible_patch;
        s.center = {0.1, -0.05, 0.0};
        s.outer_center = {-0.3, 0.3, 0.0};
        s.outer_radius = 0.35;
        s.outer_amplitude = 1.5;
        const PhantomSample p = sample_phantom(s, g);
        ASSERT_TRUE(p.annihilator.has_value());
        for (std::size_t k = 0; k < g.node_count(); ++k) {
            const Point x = g.position(k);
            if (std::hypot(x[0] - s.center[0], x[1] - s.center[1]) < s.v_radius) {
                ASSERT_EQ(p.field[k], detail::patch_rule_value(s, x, 2)) << static_cast<int>(s.rule);
            }
        }
        const RegionMask v = patch_region(s, g, *p.annihilator);
        const MaskedComplexField r = apply_fd(*p.annihilator, p.field, v);
        EXPECT_LE(r.max_abs(), 1e-8 * s.amplitude) << static_cast<int>(s.rule);
    }
}

TEST(InnerProduct, ZeroAndUnitSquare) {
    Grid g(2, 64);
    const ScalarField zero(g);
    const ScalarField one = ScalarField::sample(g, [](const Point&) { return 1.0; });
    const ScalarField rnd = ScalarField::sample(g, [](const Point& x) { return std::sin(7 * x[0]) + x[1]; });
    EXPECT_EQ(inner_product(rnd, zero), 0.0);
    EXPECT_NEAR(inner_product(one, one), 4.0, 1e-12);
}

TEST(InnerProduct, GaussianMatchesRefinedQuadrature) {
    const double sigma = 0.15;
    auto gauss = [&](const Point& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1]) / (2 * sigma * sigma)); };
    const ScalarField f = ScalarField::sample(Grid(2, 128), gauss);
    // midpoint rule at 512 per axis, written out independently
    const int m = 512;
    const double h = 2.0 / m;
    double ref = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double v = gauss({-1.0 + (i + 0.5) * h, -1.0 + (j + 0.5) * h, 0.0});
            ref += v * v * h * h;
        }
    EXPECT_NEAR(inner_product(f, f) / ref, 1.0, 5e-3);
    EXPECT_NEAR(ref, std::numbers::pi * sigma * sigma, 1e-6);
}

TEST(Spectral, ConstantFieldLivesOnDcBin) {
    Grid g(2, 32, 1.0, 1);
    const ScalarField c = ScalarField::sample(g, [](const Point&) { return 2.5; });
    const Spectrum s = spectral_forward(c);
    double off = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (k != s.flat(Index{0, 0, 0})) off = std::max(off, std::abs(s[k]));
    EXPECT_NEAR(std::abs(s[s.flat(Index{0, 0, 0})]), 2.5 * 4.0, 1e-12);
    EXPECT_LT(off, 1e-12);
}

TEST(Spectral, InverseOfForwardIsIdentity) {
    Grid g(2, 48);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    const ScalarField f = ScalarField::sample(g, [&](const Point&) { return d(rng); });
    const InverseResult r = spectral_inverse(spectral_forward(f));
    EXPECT_LT(relative_l2(r.field, f), 1e-12);
    EXPECT_LT(r.imag_residue, 1e-12 * l2_norm(f));
}

TEST(Spectral, SingleBinIsSampledCosine) {
    Grid g(2, 32);
    Spectrum s = Spectrum::zeros(g);
    const std::size_t k = s.flat(Index{3, 61, 0});  // signed bins (3, -3) of the 64-point padded axes
    const Point xi = s.frequency(k);
    EXPECT_NEAR(xi[0], std::numbers::pi * 3 / 2.0, 1e-12);
    EXPECT_NEAR(xi[1], -std::numbers::pi * 3 / 2.0, 1e-12);
    double box = 1.0;
    for (int a = 0; a < 2; ++a) box *= s.dims()[a] * g.h();
    s[k] = box;
    const ScalarField f = spectral_inverse(std::move(s)).field;
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const Point x = g.position(i);
        worst = std::max(worst, std::abs(f[i] - std::cos(xi[0] * x[0] + xi[1] * x[1])));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Spectral, Parseval) {
    Grid g(2, 40);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> d;
    const ScalarField a = ScalarField::sample(g, [&](const Point&) { return d(rng); });
    const ScalarField b = ScalarField::sample(g, [&](const Point&) { return d(rng); });
    const double direct = inner_product(a, b);
    EXPECT_NEAR(spectral_inner_product(spectral_forward(a), spectral_forward(b)), direct, 1e-10 * std::abs(direct));
}

TEST(Spectral, Linearity) {
    Grid g(2, 24);
    const ScalarField a = ScalarField::sample(g, [](const Point& x) { return std::cos(3 * x[0]) * x[1]; });
    const ScalarField b = ScalarField::sample(g, [](const Point& x) { return std::exp(-x[0] * x[0]); });
    const ScalarField lhs = spectral_inverse(spectral_forward(a + 2.0 * b)).field;
    const ScalarField rhs = spectral_inverse(spectral_forward(a)).field + 2.0 * spectral_inverse(spectral_forward(b)).field;
    EXPECT_LT(relative_l2(lhs, rhs), 1e-13);
}

TEST(RegionMask, InteriorIsInsideAndErodes) {
    Grid g(2, 64);
    const RegionMask m = RegionMask::ball(g, {0.0, 0.0, 0.0}, 0.4, 3 * g.h());
    const RegionMask in = m.interior();
    EXPECT_TRUE(in.subset_of(m));
    EXPECT_LT(in.count(), m.count());
    EXPECT_GT(in.count(), 0u);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        const Point x = g.position(k);
        // the discrete neighbourhood can miss the radial direction by under one cell
        if (in.contains(k)) {
            EXPECT_LT(std::hypot(x[0], x[1]), 0.4 - 2 * g.h());
        }
        if (std::hypot(x[0], x[1]) < 0.4 - 3 * g.h() - 1e-12) {
            EXPECT_TRUE(in.contains(k));
        }
    }
}
