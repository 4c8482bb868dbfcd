#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "roitomo/xray.hpp"

using namespace roitomo;

namespace {

ScalarField random_supported(const Grid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    return ScalarField::sample(g, [&](const Point& x) {
        return std::hypot(x[0], x[1]) < g.support_radius() ? d(rng) : 0.0;
    });
}

Sinogram random_sinogram(const LineSet& ls, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    Sinogram s(ls);
    for (double& v : s.values) v = d(rng);
    return s;
}

}  // namespace

TEST(XrayForward, ZeroFieldGivesZeroSinogram) {
    Grid g(2, 64);
    auto s = xray_forward(ScalarField(g), make_lineset(g, 30, 40));
    for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(XrayForward, DiskChordLength) {
    Grid g(2, 256);
    const double R = 0.5;
    auto f = ScalarField::sample(g, [&](const Point& x) { return std::hypot(x[0], x[1]) < R ? 1.0 : 0.0; });
    auto ls = make_lineset(g, 7, 96);
    auto s = xray_forward(f, ls);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const double d = norm(ls[i].z, 2);
        if (d >= R - 2 * g.h()) continue;
        EXPECT_NEAR(s.values[i], 2.0 * std::sqrt(R * R - d * d), 2.0 * g.h()) << "line " << i;
    }
}

TEST(XrayForward, GaussianLineIntegral) {
    Grid g(2, 128);
    const double sigma = 0.15;
    ASSERT_GE(sigma, 4 * g.h());
    auto f = ScalarField::sample(g, [&](const Point& x) { return std::exp(-(x[0] * x[0] + x[1] * x[1]) / (2 * sigma * sigma)); });
    auto ls = make_lineset(g, 9, 64);
    auto s = xray_forward(f, ls);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const double d = norm(ls[i].z, 2);
        const double expect = sigma * std::sqrt(2 * std::numbers::pi) * std::exp(-d * d / (2 * sigma * sigma));
        if (d > 3 * sigma) continue;
        EXPECT_NEAR(s.values[i], expect, 0.01 * expect) << "d=" << d;
    }
}

TEST(XrayBackproject, MatchedAdjoint) {
    Grid g(2, 64);
    auto ls = make_lineset(g, 45, 64);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 5; ++t) {
        auto f = random_supported(g, rng);
        auto s = random_sinogram(ls, rng);
        const double lhs = inner_product(xray_forward(f, ls), s);
        const double rhs = inner_product(f, xray_backproject(s, g));
        EXPECT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)), 1e-12);
    }
}

TEST(XrayBackproject, ZeroData) {
    Grid g(2, 32);
    auto b = xray_backproject(Sinogram(make_lineset(g, 10, 10)), g);
    EXPECT_EQ(b.max_abs(), 0.0);
}

TEST(XrayBackproject, MismatchThrows) {
    Grid g2(2, 32), g3(3, 16);
    EXPECT_THROW(xray_backproject(Sinogram(make_lineset(g2, 4, 4)), g3), GeometryError);
}

TEST(XrayBackproject, AllOnesIsRadiallySymmetric) {
    Grid g(2, 64);
    auto ls = make_lineset(g, 180, 96);
    Sinogram s(ls);
    std::fill(s.values.begin(), s.values.end(), 1.0);
    auto b = xray_backproject(s, g);
    // Compare each node with its images under the square's symmetry group
    // and with nodes at equal radius.
    const int N = g.size(0);
    double asym = 0.0;
    for (int i = 1; i < N; ++i)
        for (int j = 1; j < N; ++j) {
            const double v = b[g.flat({i, j, 0})];
            const double u = b[g.flat({j, i, 0})];
            const double w = b[g.flat({N - i, j, 0})];
            asym = std::max({asym, std::abs(v - u) / v, std::abs(v - w) / v});
        }
    EXPECT_LT(asym, 0.01);
}

TEST(NormalScalar, SymmetricPositive) {
    Grid g(2, 48);
    auto ls = make_lineset(g, 40, 60);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 5; ++t) {
        auto f = random_supported(g, rng);
        auto h = random_supported(g, rng);
        EXPECT_GE(inner_product(normal_scalar(f, ls), f), 0.0);
        const double a = inner_product(normal_scalar(f, ls), h);
        const double b = inner_product(f, normal_scalar(h, ls));
        EXPECT_LT(std::abs(a - b) / std::abs(a), 1e-12);
    }
}

TEST(NormalScalarConv, RejectsOneDimension) {
    EXPECT_THROW(normal_kernel_spectrum(Grid(1, 32)), DomainError);
}

TEST(NormalScalarConv, TranslationEquivariant) {
    Grid g(2, 64);
    auto bump = [&](double cx, double cy) {
        return ScalarField::sample(g, [&](const Point& x) {
            const double r2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy);
            return std::exp(-r2 / (2 * 0.1 * 0.1));
        });
    };
    const int k = 3;
    auto a = normal_scalar_conv(bump(0.0, 0.0));
    auto b = normal_scalar_conv(bump(k * g.h(), 0.0));
    double err = 0.0, scale = 0.0;
    for (int i = 0; i + k < g.size(0); ++i)
        for (int j = 0; j < g.size(1); ++j) {
            err = std::max(err, std::abs(b[g.flat({i + k, j, 0})] - a[g.flat({i, j, 0})]));
            scale = std::max(scale, std::abs(a[g.flat({i, j, 0})]));
        }
    EXPECT_LT(err, 1e-12 * scale);
}

// 2D kernel symbol of 2/|x|: the radial transform 4 pi int_0^R J0(xi r) dr
// approaches 4 pi / xi as R grows.
TEST(NormalScalarConv, KernelSymbolMatchesRadialQuadrature) {
    const double xi = 30.0;
    // Quadrature oracle: int_0^R J0(xi r) dr by Simpson, R on a J0 zero-crossing average.
    auto oracle = [&](double R) {
        const int m = 200000;
        double s = 0.0;
        for (int i = 0; i <= m; ++i) {
            const double r = R * i / m;
            s += (i == 0 || i == m ? 1.0 : (i % 2 ? 4.0 : 2.0)) * std::cyl_bessel_j(0.0, xi * r);
        }
        return 4 * std::numbers::pi * s * R / (3.0 * m);
    };
    const double q = 0.5 * (oracle(40.0) + oracle(40.0 + std::numbers::pi / xi));
    EXPECT_NEAR(q, 4 * std::numbers::pi / xi, 0.02 * 4 * std::numbers::pi / xi);

    // The sampled kernel's DFT, averaged over rings of width 2 in the mid band.
    Grid g(2, 256, 1.0, 2);
    Spectrum k = normal_kernel_spectrum(g);
    std::vector<double> sum(20, 0.0);
    std::vector<int> cnt(20, 0);
    for (std::size_t b = 0; b < k.size(); ++b) {
        const double r = norm(k.frequency(b), 2);
        if (r < 10.0 || r >= 40.0) continue;
        const int ring = static_cast<int>((r - 10.0) / 2.0);
        sum[ring] += k[b].real() * r / (4 * std::numbers::pi);
        ++cnt[ring];
    }
    int checked = 0;
    for (int i = 0; i < 15; ++i) {
        ASSERT_GT(cnt[i], 0);
        EXPECT_NEAR(sum[i] / cnt[i], 1.0, 0.02) << "ring " << i;
        ++checked;
    }
    EXPECT_EQ(checked, 15);
}
