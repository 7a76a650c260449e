#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "swt/harness.hpp"

namespace fs = std::filesystem;
using namespace swt;

namespace {

struct CliResult {
    int code = -1;
    std::string out, err;
};

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("swt_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

CliResult swt_cli(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(SWT_CLI_PATH) + " " + args + " 2>" + err.string();
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

bool has(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

} // namespace

TEST(Cli, ListsProblems) {
    const auto d = scratch("problems");
    const CliResult r = swt_cli("problems", d);
    EXPECT_EQ(r.code, 0);
    for (const auto& id : builtin_problem_ids()) EXPECT_TRUE(has(r.out, id + ":")) << id;
    EXPECT_EQ(builtin_problem_ids().size(), 5u);
}

TEST(Cli, UsageErrorsExitOne) {
    const auto d = scratch("usage");
    EXPECT_EQ(swt_cli("", d).code, 1);
    EXPECT_EQ(swt_cli("frobnicate", d).code, 1);
    EXPECT_EQ(swt_cli("transform", d).code, 1);
    EXPECT_EQ(swt_cli("transform --problem nosuch", d).code, 1);
    EXPECT_EQ(swt_cli("transform --problem problem4 --window sideways", d).code, 1);
    EXPECT_EQ(swt_cli("--help", d).code, 0);
}

TEST(Cli, BenchRejectsThreads) {
    const auto d = scratch("bench_threads");
    const CliResult r = swt_cli("bench --problem problem4 --threads 2 --out " + d.string(), d);
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(has(r.err, "--threads is not accepted by bench")) << r.err;
}

TEST(Cli, TransformWritesReadableGrid) {
    const auto d = scratch("transform");
    const CliResult r = swt_cli("transform --problem problem4 --epsilon 1/8 --csv --out " + d.string(), d);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto W = read_swtg((d / "swt.swtg").string());
    EXPECT_DOUBLE_EQ(W.sigma_x, 1.0);
    EXPECT_DOUBLE_EQ(W.sigma_k, 1.0);
    EXPECT_TRUE(has(r.out, "n_x=" + std::to_string(W.x.n)));
    EXPECT_TRUE(fs::exists(d / "swt.csv"));
    double mn = 0.0;
    for (double v : W.values) mn = std::min(mn, v);
    EXPECT_GE(mn, -1e-10 * *std::max_element(W.values.begin(), W.values.end()));

    const CliResult raw = swt_cli("transform --problem problem4 --epsilon 1/8 --raw --out " + d.string(), d);
    ASSERT_EQ(raw.code, 0) << raw.err;
    const auto R = read_swtg((d / "wt.swtg").string());
    EXPECT_EQ(R.sigma_x, 0.0);
    EXPECT_EQ(R.sigma_k, 0.0);
}

TEST(Cli, PropagateRunsAndCompares) {
    const auto d = scratch("propagate");
    const CliResult r = swt_cli("propagate --problem problem4 --epsilon 1/8 --times 0.25,0.5 --out " + d.string(), d);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(has(r.out, "ok=true"));
    EXPECT_TRUE(has(r.out, "reference=exact"));
    EXPECT_TRUE(fs::exists(d / "report.txt"));
    EXPECT_TRUE(fs::exists(d / ("density_t" + io::fmt(0.25) + ".csv")));
    EXPECT_TRUE(fs::exists(d / ("density_t" + io::fmt(0.5) + ".csv")));
}

TEST(Cli, NumericFailureExitsTwo) {
    const auto d = scratch("silent");
    const fs::path cfg = d / "silent.cfg";
    std::ofstream(cfg) << "[problem]\nic_type = wkb\nA = 0\nS = x\n[run]\nepsilon = 1/8\n";
    const CliResult r = swt_cli("propagate --config " + cfg.string() + " --n-x 256 --n-k 64 --no-compare --out " +
                              (d / "run").string(), d);
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(has(r.out, "ok=false"));
    EXPECT_TRUE(has(r.err, "failed in stage")) << r.err;
}

TEST(Cli, ReferenceAndCompare) {
    const auto d = scratch("reference");
    const CliResult a = swt_cli("reference splitstep --problem problem4 --epsilon 1/8 --times 0.5 --out " + d.string(), d);
    ASSERT_EQ(a.code, 0) << a.err;
    const CliResult b = swt_cli("reference exact --problem problem4 --epsilon 1/8 --times 0.5 --out " + d.string(), d);
    ASSERT_EQ(b.code, 0) << b.err;
    const std::string fa = (d / ("reference_splitstep_t" + io::fmt(0.5) + ".csv")).string();
    const std::string fb = (d / ("reference_exact_t" + io::fmt(0.5) + ".csv")).string();
    ASSERT_TRUE(fs::exists(fa) && fs::exists(fb));

    const CliResult same = swt_cli("compare " + fa + " " + fa, d);
    ASSERT_EQ(same.code, 0) << same.err;
    EXPECT_TRUE(has(same.out, "l1_rel=0\n")) << same.out;
    EXPECT_TRUE(has(same.out, "mass_ratio=1\n")) << same.out;

    const CliResult diff = swt_cli("compare " + fa + " " + fb, d);
    ASSERT_EQ(diff.code, 0) << diff.err;
    const ErrorReport e = compare(read_density_csv(fa), read_density_csv(fb));
    EXPECT_LT(e.l1_rel, 1e-6);
    EXPECT_TRUE(has(diff.out, "l1_rel=" + io::fmt(e.l1_rel)));

    EXPECT_EQ(swt_cli("compare " + fa + " " + (d / "missing.csv").string(), d).code, 1);
}

TEST(Cli, ConfigWithFourPartTerms) {
    const auto d = scratch("config");
    const fs::path cfg = d / "p.cfg";
    // a Gaussian with purely imaginary alpha/eps part: the width is set by alpha0
    std::ofstream(cfg) << "[problem]\nic_type = gaussian_sum\nterms = 0+0.5j, 0, 0, 4\n"
                       << "[run]\nepsilon = 1/8\nt_max = 0.25\n[grid]\nx_min = -4\nx_max = 4\n";
    const CliResult r = swt_cli("transform --config " + cfg.string() + " --out " + d.string(), d);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto W = read_swtg((d / "swt.swtg").string());
    EXPECT_DOUBLE_EQ(W.x.min, -4.0);
    EXPECT_EQ(swt_cli("transform --config " + cfg.string() + " --problem problem4", d).code, 1);
}

TEST(Cli, BenchWritesTableAndSlopes) {
    const auto d = scratch("bench");
    const CliResult r = swt_cli("bench --problem problem4 --epsilons 1/4,1/8,1/16,1/32 --out " + d.string(), d);
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream is(r.out);
    const BenchTable t = read_bench_csv(is);
    ASSERT_EQ(t.rows.size(), 4u);
    EXPECT_TRUE(t.timings_comparable);
    EXPECT_TRUE(std::isfinite(t.slope_T_swt.slope));
    std::ifstream f(d / "bench.csv");
    const BenchTable back = read_bench_csv(f);
    EXPECT_EQ(back.rows.size(), 4u);
}
