#include <gtest/gtest.h>

#include <sstream>

#include "roitomo/config.hpp"
#include "roitomo/io.hpp"

using namespace roitomo;

TEST(FieldIo, ScalarRoundTripIsBitExact) {
    Grid g(2, Index{16, 24, 1}, Point{1.0, 1.5, 0.0}, 2);
    const ScalarField f = ScalarField::sample(g, [](const Point& x) { return std::sin(3 * x[0]) * x[1] + 1e-300; });
    std::stringstream ss;
    write_field(ss, f);
    const ScalarField back = read_field(ss);
    EXPECT_EQ(back.grid().size(1), 24);
    EXPECT_DOUBLE_EQ(back.grid().extent(1), 1.5);
    for (std::size_t k = 0; k < f.size(); ++k) ASSERT_EQ(back[k], f[k]);
}

TEST(FieldIo, VectorRoundTrip) {
    Grid g(2, 12);
    VectorField F(g);
    F[0] = ScalarField::sample(g, [](const Point& x) { return x[0]; });
    F[1] = ScalarField::sample(g, [](const Point& x) { return -x[0] * x[1]; });
    std::stringstream ss;
    write_field(ss, F);
    const VectorField back = read_vector_field(ss);
    EXPECT_EQ(relative_l2(back, F), 0.0);
}

TEST(FieldIo, RejectsMalformedInput) {
    std::stringstream bad("ROIF2 n=2\n");
    EXPECT_THROW(read_field(bad), ConfigError);
    std::stringstream dim("ROIF1 n=7 size=4 extent=1\n");
    EXPECT_THROW(read_field(dim), ConfigError);
    std::stringstream trunc("ROIF1 n=1 size=8 extent=1\nabc");
    EXPECT_THROW(read_field(trunc), ConfigError);
    std::stringstream scalar_as_vector;
    write_field(scalar_as_vector, ScalarField(Grid(2, 8)));
    EXPECT_THROW(read_vector_field(scalar_as_vector), ConfigError);
}

TEST(SinogramIo, CsvRoundTripAndMismatch) {
    Grid g(2, 32);
    const LineSet ls = make_lineset(g, 6, 8);
    Sinogram s(ls);
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
    std::stringstream ss;
    write_sinogram_csv(ss, s);
    const std::string text = ss.str();
    const Sinogram back = read_sinogram_csv(ss, ls);
    for (std::size_t i = 0; i < s.values.size(); ++i) EXPECT_EQ(back.values[i], s.values[i]);

    std::stringstream other(text);
    EXPECT_THROW(read_sinogram_csv(other, make_lineset(g, 6, 9)), ConfigError);
    std::stringstream junk("hello\n");
    EXPECT_THROW(read_sinogram_csv(junk, ls), ConfigError);
}

TEST(PgmIo, HeaderAndExtremes) {
    const std::vector<double> v{0.0, 1.0, 2.0, 4.0, 3.0, 1.0};
    std::stringstream ss;
    write_pgm(ss, v, 3, 2);
    const std::string s = ss.str();
    ASSERT_EQ(s.rfind("P5\n3 2\n65535\n", 0), 0u);
    const std::string body = s.substr(std::string("P5\n3 2\n65535\n").size());
    ASSERT_EQ(body.size(), 12u);
    auto px = [&](int i) { return (static_cast<unsigned char>(body[2 * i]) << 8) | static_cast<unsigned char>(body[2 * i + 1]); };
    EXPECT_EQ(px(0), 0);
    EXPECT_EQ(px(3), 65535);
    EXPECT_THROW(write_pgm(ss, v, 4, 2), GeometryError);
}

TEST(PolyOpIo, RoundTripAndErrors) {
    const PolyOp p = PolyOp(2, {{MultiIndex{4, 0}, 1.0}, {MultiIndex{2, 2}, 2.0}, {MultiIndex{0, 1}, Complex(0.0, -0.5)}});
    std::stringstream ss;
    write_polyop(ss, p);
    EXPECT_EQ(read_polyop(ss, 2), p);

    std::stringstream comment("# biharmonic\n4 0 1 0\n2 2 2 0   # mixed\n0 4 1 0\n");
    EXPECT_EQ(read_polyop(comment, 2), PolyOp::neg_laplacian_power(2, 2));
    std::stringstream short_row("2 0 1\n");
    EXPECT_THROW(read_polyop(short_row, 2), ConfigError);
    std::stringstream negative("-1 0 1 0\n");
    EXPECT_THROW(read_polyop(negative, 2), ConfigError);
    std::stringstream empty("# nothing\n");
    EXPECT_THROW(read_polyop(empty, 2), ConfigError);
    std::stringstream cancels("1 0 1 0\n1 0 -1 0\n");
    EXPECT_THROW(read_polyop(cancels, 2), ConfigError);
}

TEST(ReportIo, CarriesTheFields) {
    SolveReport r;
    r.iterations = 12;
    r.converged = true;
    r.relative_error = 0.25;
    r.restart_objectives = {3.0, 2.0};
    std::stringstream ss;
    write_report(ss, r);
    const std::string s = ss.str();
    for (const char* key : {"status=ok", "converged=true", "iterations=12", "rel_error=0.25", "restart_objectives=3,2",
                            "data_residual=", "prior_residual=", "line_count=", "wall_time_s="})
        EXPECT_NE(s.find(key), std::string::npos) << key;
    r.relative_error.reset();
    std::stringstream t;
    write_report(t, r);
    EXPECT_EQ(t.str().find("rel_error"), std::string::npos);
}

TEST(Config, DefaultsAndOverrides) {
    std::stringstream ss("# comment\ncommand = forward\ngrid.size = 64   # trailing\nphantom.center = 0.1, -0.2\n");
    const ExperimentConfig c = ExperimentConfig::parse(ss);
    EXPECT_EQ(c.text("command"), "forward");
    EXPECT_EQ(c.integer("grid.size"), 64);
    EXPECT_TRUE(c.given("grid.size"));
    EXPECT_FALSE(c.given("grid.n"));
    EXPECT_EQ(c.integer("grid.n"), 2);
    EXPECT_DOUBLE_EQ(c.point("phantom.center")[1], -0.2);
    EXPECT_EQ(c.grid().size(0), 64);
}

TEST(Config, RejectsBadInput) {
    std::stringstream unknown("grid.sise = 3\n");
    EXPECT_THROW(ExperimentConfig::parse(unknown), ConfigError);
    std::stringstream no_eq("grid.size 3\n");
    EXPECT_THROW(ExperimentConfig::parse(no_eq), ConfigError);
    std::stringstream not_int("grid.size = 3.5\n");
    EXPECT_THROW(ExperimentConfig::parse(not_int), ConfigError);
    std::stringstream not_real("solver.cg_tol = fast\n");
    EXPECT_THROW(ExperimentConfig::parse(not_real), ConfigError);
    ExperimentConfig c;
    c.set("solver.preconditioner", "ilu");
    EXPECT_THROW(c.choice("solver.preconditioner", {"none", "jacobi"}), ConfigError);
    EXPECT_THROW(ExperimentConfig::load("/nonexistent/x.cfg"), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstTheConfigDirectory) {
    std::stringstream ss("prior.file = sub/p.polyop\noutput.dir = /abs/out\n");
    const ExperimentConfig c = ExperimentConfig::parse(ss, "/etc/roitomo");
    EXPECT_EQ(c.text("prior.file"), "/etc/roitomo/sub/p.polyop");
    EXPECT_EQ(c.text("output.dir"), "/abs/out");
}

TEST(Config, ResolvedOutputReparses) {
    std::stringstream ss("grid.size = 48\nphantom.kind = disk\n");
    const ExperimentConfig c = ExperimentConfig::parse(ss);
    std::stringstream out;
    c.write_resolved(out);
    const ExperimentConfig d = ExperimentConfig::parse(out);
    EXPECT_EQ(d.integer("grid.size"), 48);
    EXPECT_EQ(d.text("phantom.kind"), "disk");
}
