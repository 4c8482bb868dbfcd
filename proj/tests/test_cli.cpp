#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("roitomo_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

fs::path write_cfg(const std::string& name, const std::string& body) {
    const fs::path p = scratch() / (name + ".cfg");
    std::ofstream(p) << body;
    return p;
}

/// Runs the CLI and returns its exit status.
int run(const std::string& args) {
    const std::string cmd = std::string(ROITOMO_CLI) + ' ' + args + " >" + (scratch() / "last.log").string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

double report_value(const fs::path& p, const std::string& key) {
    std::ifstream is(p);
    for (std::string row; std::getline(is, row);)
        if (row.rfind(key + "=", 0) == 0) return std::stod(row.substr(key.size() + 1));
    ADD_FAILURE() << key << " missing from " << p;
    return NAN;
}

const std::string kSmall = "grid.size = 32\nlines.angles = 20\nlines.offsets = 48\n";

}  // namespace

TEST(Cli, ZeroPhantomGivesZeroSinogram) {
    const fs::path cfg = write_cfg("zero", kSmall + "phantom.kind = zero\n");
    const fs::path out = scratch() / "zero";
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + out.string() + " forward"), 0);
    std::ifstream is(out / "sinogram.csv");
    std::string row;
    std::getline(is, row);
    int rows = 0;
    while (std::getline(is, row)) {
        EXPECT_EQ(std::stod(row.substr(row.rfind(',') + 1)), 0.0);
        ++rows;
    }
    EXPECT_EQ(rows, 20 * 48);
    for (const char* f : {"lines.csv", "sinogram.pgm", "phantom.roif", "config.resolved", "versions.txt"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST(Cli, ForwardIsDeterministic) {
    const fs::path cfg = write_cfg("det", kSmall + "phantom.kind = disk\nphantom.radius = 0.3\n");
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + (scratch() / "d1").string() + " forward"), 0);
    ASSERT_EQ(run("--config " + cfg.string() + " --out " + (scratch() / "d2").string() + " --threads 1 forward"), 0);
    EXPECT_EQ(slurp(scratch() / "d1" / "sinogram.csv"), slurp(scratch() / "d2" / "sinogram.csv"));
    EXPECT_EQ(slurp(scratch() / "d1" / "phantom.roif"), slurp(scratch() / "d2" / "phantom.roif"));
}

TEST(Cli, FullReconstructionFromSavedSinogram) {
    const std::string base = "grid.size = 64\nlines.angles = 90\nlines.offsets = 96\nphantom.sigma = 0.15\n";
    const fs::path fwd = write_cfg("fwd", base);
    ASSERT_EQ(run("--config " + fwd.string() + " --out " + (scratch() / "f").string() + " forward"), 0);
    const fs::path rec = write_cfg("rec", base + "phantom.kind = gaussian\nreconstruct.input = f/sinogram.csv\nreconstruct.constants = analytic\n");
    const fs::path out = scratch() / "r";
    ASSERT_EQ(run("--config " + rec.string() + " --out " + out.string() + " reconstruct"), 0);
    EXPECT_LT(report_value(out / "report.txt", "rel_error"), 0.02);
    EXPECT_TRUE(fs::exists(out / "reconstruction.roif"));
}

TEST(Cli, PhantomAndProbe) {
    const fs::path ph = write_cfg("ph", kSmall + "phantom.kind = admissible_patch\n");
    ASSERT_EQ(run("--config " + ph.string() + " --out " + (scratch() / "ph").string() + " phantom"), 0);
    EXPECT_TRUE(fs::exists(scratch() / "ph" / "annihilator.txt"));
    const fs::path pr = write_cfg("pr", kSmall + "roi.radius = 0.3\nprobe.iters = 10\n");
    ASSERT_EQ(run("--config " + pr.string() + " --out " + (scratch() / "pr").string() + " probe"), 0);
    EXPECT_TRUE(fs::exists(scratch() / "pr" / "probe.roif"));
}

TEST(Cli, ExitCodes) {
    const std::string o = " --out " + (scratch() / "e").string() + ' ';
    EXPECT_EQ(run(o), 2);  // no subcommand
    EXPECT_EQ(run(o + "transmogrify"), 2);
    EXPECT_EQ(run("--config " + write_cfg("typo", "grid.sise = 3\n").string() + o + "forward"), 2);
    EXPECT_EQ(run("--config " + write_cfg("mismatch", "command = probe\n").string() + o + "forward"), 2);
    EXPECT_EQ(run("--config /nonexistent/config.cfg" + o + "forward"), 2);
    const fs::path partial = write_cfg("partial", kSmall + "reconstruct.mode = partial\nroi.radius = 0.35\n");
    EXPECT_EQ(run("--config " + partial.string() + o + "reconstruct"), 2);  // partial mode without prior.file
    const fs::path big = write_cfg("big", kSmall + "phantom.kind = disk\nphantom.radius = 0.95\n");
    EXPECT_EQ(run("--config " + big.string() + o + "forward"), 3);
    EXPECT_EQ(run("--config " + write_cfg("thr", kSmall).string() + o + "--threads -2 forward"), 2);
}
