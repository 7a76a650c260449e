#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "swt/reference.hpp"

using namespace swt;

namespace {

constexpr double pi = std::numbers::pi;

double max_diff(const WavefunctionGrid& a, const WavefunctionGrid& b) {
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
    return m;
}

double l1_rel_density(const WavefunctionGrid& a, const WavefunctionGrid& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        num += std::abs(std::norm(a[j]) - std::norm(b[j]));
        den += std::norm(b[j]);
    }
    return num / den;
}

// Free propagator quadrature: u(x,t) = (4 pi D t)^(-1/2) int exp(-(x-y)^2/(4 D t)) u0(y) dy, D = i eps/2.
cplx propagate_by_quadrature(const GaussianTerm& g, double eps, double t, double x) {
    const cplx D(0.0, eps / 2.0);
    const cplx pref = 1.0 / std::sqrt(4.0 * pi * D * t);
    const double a = g.quadratic(eps).real();
    const double half_width = 12.0 / std::sqrt(a);
    const double centre = g.beta.real() / (2.0 * a);
    const int n = 400000;
    const double h = 2 * half_width / n;
    cplx s{};
    for (int m = 0; m <= n; ++m) {
        const double y = centre - half_width + m * h;
        const double w = (m == 0 || m == n) ? 0.5 : 1.0;
        s += w * std::exp(-(x - y) * (x - y) / (4.0 * D * t)) * g(y, eps);
    }
    return pref * s * h;
}

ProblemSpec plane_wave(double eps, double k0, double t_max) {
    // exp(2 pi i k0 x/eps) written as a Gaussian term with a = 0 is not
    // allowed, so use a WKB recipe with unit amplitude.
    ProblemSpec p;
    p.initial_condition = WkbRecipe{Expr::number(1.0), parse_expression(detail::format_double(k0) + "*x")};
    p.epsilon = eps;
    p.t_max = t_max;
    p.x_min = 0.0;
    p.x_max = 1.0;
    return p;
}

ProblemSpec packet(double eps, double t_max, PotentialSpec v) {
    ProblemSpec p;
    p.initial_condition = GaussianSum{{GaussianTerm{cplx(0.5, 0.0), cplx(0.0, 2 * pi * 0.4) / eps, 0.0, 0.0}}};
    p.potential = std::move(v);
    p.epsilon = eps;
    p.t_max = t_max;
    p.x_min = -4.0;
    p.x_max = 4.0;
    return p;
}

} // namespace

TEST(ExactFreeGaussian, MatchesPropagatorQuadratureAtRandomPoints) {
    const double eps = 1.0 / 16;
    const GaussianTerm g{cplx(0.4, 1.5), cplx(0.3, -2.0), cplx(0.1, 0.2), 0.5};
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> X(-2.0, 2.0), T(0.05, 1.0);
    for (int n = 0; n < 10; ++n) {
        const double x = X(rng), t = T(rng);
        const cplx exact = free_gaussian_value(g, eps, t, x);
        const cplx quad = propagate_by_quadrature(g, eps, t, x);
        EXPECT_LT(std::abs(exact - quad), 1e-8) << "x=" << x << " t=" << t;
    }
}

TEST(ExactFreeGaussian, SingleTermAtOriginProblemScale) {
    const double eps = 1.0 / 16;
    const auto p4 = builtin_problem("problem4", eps);
    const auto& term = std::get<GaussianSum>(p4.initial_condition).terms[0];
    EXPECT_LT(std::abs(free_gaussian_value(term, eps, 0.5, 0.0) - propagate_by_quadrature(term, eps, 0.5, 0.0)), 1e-8);
}

TEST(ExactFreeGaussian, ZeroTimeResamplesInitialData) {
    const auto p4 = builtin_problem("problem4", 1.0 / 16);
    const auto u = exact_free_gaussian_solution(std::get<GaussianSum>(p4.initial_condition), p4.epsilon, 0.0, p4.axis(1024));
    const auto u0 = sample_problem(p4, 1024);
    EXPECT_LT(max_diff(u, u0), 1e-15);
}

TEST(ExactFreeGaussian, SuperpositionIsSumOfTerms) {
    const auto p4 = builtin_problem("problem4", 1.0 / 16);
    const auto& sum = std::get<GaussianSum>(p4.initial_condition);
    const auto all = exact_free_gaussian_solution(sum, p4.epsilon, 0.5, p4.axis(512));
    std::vector<cplx> parts(512, cplx{});
    for (const auto& term : sum.terms) {
        const auto one = exact_free_gaussian_solution(GaussianSum{{term}}, p4.epsilon, 0.5, p4.axis(512));
        for (std::size_t j = 0; j < 512; ++j) parts[j] += one[j];
    }
    for (std::size_t j = 0; j < 512; ++j) EXPECT_LT(std::abs(all[j] - parts[j]), 1e-14);
}

TEST(SplitStep, ZeroTimeIsIdentity) {
    auto p = builtin_problem("problem3", 1.0 / 16);
    const auto run = splitstep_solve(p, 1024, 10, {0.0});
    EXPECT_EQ(max_diff(run.snapshots[0].u, sample_problem(p, 1024)), 0.0);
}

TEST(SplitStep, PlaneWaveIsExact) {
    const double eps = 1.0 / 8, k0 = 0.5;  // 4 periods on [0, 1]
    const auto p = plane_wave(eps, k0, 0.3);
    const auto run = splitstep_solve(p, 64, 7);
    const auto& u = run.last().u;
    for (std::size_t j = 0; j < u.size(); ++j) {
        const double x = u.x(j);
        const cplx exact = std::polar(1.0, two_pi / eps * (k0 * x - pi * k0 * k0 * 0.3));
        EXPECT_LT(std::abs(u[j] - exact), 1e-10);
    }
}

TEST(SplitStep, FreeGaussianMatchesClosedForm) {
    // The t=0.5 solution spreads past +-6, so use a wider periodic box.
    auto p = builtin_problem("problem4", 1.0 / 16);
    p.x_min = -12;
    p.x_max = 12;
    const auto run = splitstep_solve(p, 4096, 3);
    const auto exact = exact_free_gaussian_solution(std::get<GaussianSum>(p.initial_condition), p.epsilon, 0.5, p.axis(4096));
    EXPECT_LT(max_diff(run.last().u, exact), 1e-8);
}

TEST(SplitStep, NormConserved) {
    const auto p = builtin_problem("problem3", 1.0 / 16);
    const auto run = splitstep_solve(p, 1024, 50);
    EXPECT_NEAR(run.last().u.norm2(), run.snapshots[0].u.norm2(), 1e-8 * run.snapshots[0].u.norm2());
}

TEST(SplitStep, SecondOrderInTime) {
    const auto p = packet(1.0 / 8, 0.5, QuadraticPotential{4.0});
    const auto fine = splitstep_solve(p, 512, 2048).last().u;
    const double e1 = max_diff(splitstep_solve(p, 512, 32).last().u, fine);
    const double e2 = max_diff(splitstep_solve(p, 512, 64).last().u, fine);
    EXPECT_NEAR(e1 / e2, 4.0, 0.8);
}

TEST(SplitStep, RejectsUndecayedBoundary) {
    const auto p = plane_wave(1.0 / 8, 0.5, 0.1);
    auto q = p;
    q.initial_condition = GaussianSum{{GaussianTerm{cplx(0.01, 0.0)}}};
    EXPECT_THROW(splitstep_solve(q, 64, 4), input_error);
}

TEST(CrankNicolson, ZeroTimeIsIdentity) {
    const auto p = builtin_problem("problem3", 1.0 / 16);
    const auto run = crank_nicolson_solve(p, 1024, 10, {0.0});
    EXPECT_EQ(max_diff(run.snapshots[0].u, sample_problem(p, 1024)), 0.0);
}

TEST(CrankNicolson, NormConservedOverHundredSteps) {
    const auto p = builtin_problem("problem3", 1.0 / 16);
    const auto run = crank_nicolson_solve(p, 1024, 100);
    EXPECT_NEAR(run.last().u.norm2(), run.snapshots[0].u.norm2(), 1e-10 * run.snapshots[0].u.norm2());
}

TEST(CrankNicolson, PlaneWaveSecondOrderConvergence) {
    const double eps = 1.0 / 8, k0 = 0.5;
    auto err = [&](std::size_t n_x, std::size_t n_t) {
        const auto p = plane_wave(eps, k0, 0.2);
        const auto u = crank_nicolson_solve(p, n_x, n_t).last().u;
        double m = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j)
            m = std::max(m, std::abs(u[j] - std::polar(1.0, two_pi / eps * (k0 * u.x(j) - pi * k0 * k0 * 0.2))));
        return m;
    };
    const double e1 = err(256, 200), e2 = err(512, 400);
    EXPECT_LT(e1, 0.05);
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
}

TEST(CrankNicolson, AgreesWithSplitStepOnResolvedPacket) {
    const auto p = packet(1.0 / 8, 0.25, LinearPotential{1.0});
    const auto ss = splitstep_solve(p, 1024, 256).last().u;
    const auto cn = crank_nicolson_solve(p, 4096, 2048).last().u;
    // compare on the common 1024 grid
    std::vector<cplx> sub(1024);
    for (std::size_t j = 0; j < 1024; ++j) sub[j] = cn[4 * j];
    EXPECT_LT(l1_rel_density(WavefunctionGrid(ss.axis(), sub, p.epsilon), ss), 1e-3);
}

TEST(SwtcFormat, RoundTripIsBitExact) {
    std::vector<cplx> v(64);
    for (std::size_t j = 0; j < 64; ++j) v[j] = cplx(std::sin(0.3 * j), std::cos(1.7 * j) / 3);
    const WavefunctionGrid u(Axis{-1.5, 2.5, 64}, v, 1.0 / 16);
    std::stringstream ss;
    write_swtc(ss, u, 0.25);
    EXPECT_EQ(ss.str().size(), 4u + 8 + 32 + 64 * 16);
    const auto back = read_swtc(ss);
    EXPECT_EQ(back.t, 0.25);
    EXPECT_EQ(back.u.values(), u.values());
    EXPECT_EQ(back.u.axis(), u.axis());
    EXPECT_EQ(back.u.epsilon(), u.epsilon());
}

TEST(SnapshotCsv, Header) {
    const WavefunctionGrid u(Axis{0, 1, 4}, std::vector<cplx>(4, cplx(1, 2)), 1.0);
    std::stringstream ss;
    write_snapshot_csv(ss, u);
    std::string line;
    std::getline(ss, line);
    EXPECT_EQ(line, "x,re,im");
}

TEST(ReferenceMethodName, RoundTrip) {
    for (auto m : {ReferenceMethod::splitstep, ReferenceMethod::crank_nicolson, ReferenceMethod::exact_free_gaussian})
        EXPECT_EQ(parse_method(method_name(m)), m);
    EXPECT_THROW(parse_method("euler"), input_error);
}
