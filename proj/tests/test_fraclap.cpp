#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "roitomo/fraclap.hpp"
#include "roitomo/phantom.hpp"

using namespace roitomo;

namespace {

/// Zero-mean sum of cosines whose wave numbers are whole bins of the periodic
/// (pad 1) box.
ScalarField band_limited(const Grid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> k(-8, 8);
    std::uniform_real_distribution<double> ph(0.0, 6.28), amp(-1.0, 1.0);
    ScalarField f(g);
    for (int t = 0; t < 6; ++t) {
        int a = 0, b = 0;
        while (a == 0 && b == 0) {
            a = k(rng);
            b = k(rng);
        }
        const double p = ph(rng), c = amp(rng);
        const double w = std::numbers::pi / g.extent(0);
        f += ScalarField::sample(g, [&](const Point& x) { return c * std::cos(w * (a * x[0] + b * x[1]) + p); });
    }
    return f;
}

}  // namespace

TEST(FracExponent, RejectsIntegersUnlessFlagged) {
    EXPECT_THROW(FracExponent(1.0), DomainError);
    EXPECT_THROW(FracExponent(0.0), DomainError);
    EXPECT_NO_THROW(FracExponent(1.0, true));
    EXPECT_NO_THROW(FracExponent(0.5));
    EXPECT_THROW(FracExponent(std::nan("")), DomainError);
}

TEST(FracExponent, RejectsExponentsAtOrBelowMinusHalfDimension) {
    Grid g(2, 16);
    const ScalarField f = ScalarField::sample(g, [](const Point& x) { return std::exp(-10 * x[0] * x[0]); });
    EXPECT_THROW(fractional_laplacian(f, FracExponent(-1.0, true)), DomainError);
    EXPECT_THROW(fractional_laplacian(f, FracExponent(-1.2)), DomainError);
    EXPECT_NO_THROW(fractional_laplacian(f, FracExponent(-0.9)));
}

TEST(FractionalLaplacian, LaplacianOnFourierMode) {
    Grid g(2, 32, 1.0, 1);
    const double w = std::numbers::pi / g.extent(0);
    const Point xi{3 * w, -2 * w, 0.0};
    const ScalarField f = ScalarField::sample(g, [&](const Point& x) { return std::cos(xi[0] * x[0] + xi[1] * x[1]); });
    const ScalarField lf = fractional_laplacian(f, FracExponent(1.0, true));
    ScalarField expect = f;
    expect *= xi[0] * xi[0] + xi[1] * xi[1];
    EXPECT_LT(relative_l2(lf, expect), 1e-12);
}

TEST(FractionalLaplacian, InversePair) {
    Grid g(2, 64, 1.0, 1);
    const ScalarField f = band_limited(g, 1);
    const ScalarField back = fractional_laplacian(fractional_laplacian(f, FracExponent(0.35)), FracExponent(-0.35));
    EXPECT_LT(relative_l2(back, f), 1e-10);
}

TEST(FractionalLaplacian, Semigroup) {
    Grid g(2, 64, 1.0, 1);
    const ScalarField f = band_limited(g, 2);
    const ScalarField a = fractional_laplacian(fractional_laplacian(f, FracExponent(0.3)), FracExponent(0.4));
    const ScalarField b = fractional_laplacian(f, FracExponent(0.7));
    EXPECT_LT(relative_l2(a, b), 1e-10);
}

TEST(FractionalLaplacian, OutputIsReal) {
    Grid g(2, 48);
    const ScalarField f = calibration_gaussian(g, 0.12, {0.1, 0.05, 0.0});
    Spectrum s = spectral_forward(f);
    apply_fractional_multiplier(s, FracExponent(0.5));
    EXPECT_LT(spectral_inverse(std::move(s)).imag_residue, 1e-12 * l2_norm(f));
}

TEST(FractionalLaplacian, DcBinIsProjectedOut) {
    Grid g(2, 32, 1.0, 1);
    const ScalarField one = ScalarField::sample(g, [](const Point&) { return 1.0; });
    EXPECT_LT(fractional_laplacian(one, FracExponent(-0.4)).max_abs(), 1e-12);
}

TEST(Constants, AnalyticValueInThePlane) {
    const ReconstructionConstants c = analytic_constants(2);
    EXPECT_NEAR(c.c0, 1.0 / (4 * std::numbers::pi), 1e-15);
    EXPECT_DOUBLE_EQ(c.c1, c.c0);
    EXPECT_EQ(c.provenance, ConstantsProvenance::analytic);
    EXPECT_NEAR(analytic_constants(3).c0, 1.0 / (4 * std::pow(std::numbers::pi, 2)), 1e-15);
    EXPECT_THROW(analytic_constants(1), DomainError);
}

TEST(Constants, CalibrationAt256) {
    Grid g(2, 256);
    const LineSet ls = make_lineset(g, 360, 384);
    const ReconstructionConstants c = calibrate_constants(g, ls);
    EXPECT_EQ(c.provenance, ConstantsProvenance::calibrated);
    EXPECT_NEAR(c.c0 / (1.0 / (4 * std::numbers::pi)), 1.0, 0.03);
    EXPECT_LT(c.c0_residual, 0.02);
    // a second, narrower and off-centre gaussian
    const ReconstructionConstants d = calibrate_constants(g, ls, {0.1, {0.1, -0.05, 0.0}, {}});
    EXPECT_NEAR(d.c0 / c.c0, 1.0, 0.01);
}

TEST(Constants, RejectsDegeneratePhantom) {
    EXPECT_THROW(detail::least_squares_scale(0.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(detail::least_squares_scale(0.0, 1.0, 0.0), DomainError);
}

TEST(ReconstructFull, ZeroDataGivesZero) {
    Grid g(2, 64);
    const LineSet ls = make_lineset(g, 90, 96);
    const ScalarField f = reconstruct_full_scalar(xray_forward(ScalarField(g), ls), g, analytic_constants(2));
    EXPECT_EQ(f.max_abs(), 0.0);
}

TEST(ReconstructFull, GaussianRoundTripAndRefinement) {
    // calibrate on one gaussian, invert another
    double err[2];
    int i = 0;
    for (int n : {128, 256}) {
        Grid g(2, n);
        const LineSet ls = make_lineset(g, n == 128 ? 180 : 360, 3 * n / 2);
        const ReconstructionConstants c = calibrate_constants(g, ls);
        const ScalarField f = calibration_gaussian(g, 0.1, {0.1, -0.05, 0.0});
        err[i++] = relative_l2(reconstruct_full_scalar(xray_forward(f, ls), g, c), f);
    }
    EXPECT_LT(err[1], 0.02);
    EXPECT_GE(err[0] / err[1], 2.0);
}

TEST(ReconstructFull, DiskPlateau) {
    Grid g(2, 256);
    const LineSet ls = make_lineset(g, 360, 384);
    const ReconstructionConstants c = calibrate_constants(g, ls);
    PhantomSpec s;
    s.kind = PhantomKind::disk_indicator;
    s.radius = 0.5;
    const ScalarField f = sample_phantom(s, g).field;
    const ScalarField r = reconstruct_full_scalar(xray_forward(f, ls), g, c);
    double worst = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
        const Point x = g.position(k);
        if (std::hypot(x[0], x[1]) < s.radius - 4 * g.h()) worst = std::max(worst, std::abs(r[k] - 1.0));
    }
    EXPECT_LT(worst, 0.05);
}

TEST(ReconstructFull, RoutesAgree) {
    Grid g(2, 128);
    const LineSet ls = make_lineset(g, 180, 192);
    const ScalarField f = calibration_gaussian(g, 0.15);
    const Sinogram data = xray_forward(f, ls);
    ReconstructionOptions grid_route;
    grid_route.route = HalfLaplacianRoute::grid;
    const ReconstructionConstants c = analytic_constants(2);
    const ScalarField a = reconstruct_full_scalar(data, g, c);
    const ScalarField b = reconstruct_full_scalar(data, g, c, grid_route);
    EXPECT_LT(relative_l2(a, f), 0.01);
    EXPECT_LT(relative_l2(b, f), 0.05);
}

TEST(ReconstructFull, WarnsOnRoiData) {
    Grid g(2, 32);
    const LineSet ls = filter_roi(make_lineset(g, 30, 48), RegionMask::ball(g, {0.0, 0.0, 0.0}, 0.3));
    std::string seen;
    reconstruct_full_scalar(Sinogram(ls), g, analytic_constants(2), {}, [&](std::string_view m) { seen = m; });
    EXPECT_NE(seen.find("ROI"), std::string::npos);
}

TEST(ReconstructFull, Linear) {
    Grid g(2, 64);
    const LineSet ls = make_lineset(g, 90, 96);
    const ReconstructionConstants c = analytic_constants(2);
    const Sinogram a = xray_forward(calibration_gaussian(g, 0.1, {0.2, 0.0, 0.0}), ls);
    Sinogram b = xray_forward(calibration_gaussian(g, 0.2), ls);
    const ScalarField ra = reconstruct_full_scalar(a, g, c), rb = reconstruct_full_scalar(b, g, c);
    b.axpy(3.0, a);
    EXPECT_LT(relative_l2(reconstruct_full_scalar(b, g, c), rb + 3.0 * ra), 1e-12);
}
