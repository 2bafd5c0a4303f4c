#include <pseudogen/boltzmann.hpp>
#include <pseudogen/sde.hpp>
#include <pseudogen/stats.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace pseudogen;

namespace {

// L¹ distance between a position histogram on [0, 1) and the bin masses of f_Q.
double l1_to_boltzmann(const std::vector<double>& counts, double beta) {
    const PeriodicDoubleWell dw;
    const double z = normalization_constant(dw, beta);
    const auto bins = counts.size();
    double total = 0.0;
    for (double c : counts) {
        total += c;
    }
    double l1 = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = static_cast<double>(b) / static_cast<double>(bins);
        const double hi = static_cast<double>(b + 1) / static_cast<double>(bins);
        const double mass = integrate_box<1>([&](const Vec<1>& q) { return std::exp(-beta * dw.energy(q)) / z; },
                                             {lo}, {hi}, {false}, 4);
        l1 += std::abs(counts[b] / total - mass);
    }
    return l1;
}

template <class Integrator>
double trajectory_l1(const Integrator& integrator, std::size_t steps, std::uint64_t seed) {
    RandomStream rng(seed);
    SimState<1> s;
    s.q[0] = 0.318;
    std::vector<double> counts(50, 0.0);
    integrator.advance(s, 10000, rng);
    for (std::size_t k = 0; k < steps; ++k) {
        integrator.advance(s, 1, rng);
        counts[std::min<std::size_t>(49, static_cast<std::size_t>(s.q[0] * 50.0))] += 1.0;
    }
    return l1_to_boltzmann(counts, integrator.config().beta);
}

struct NanPotential {
    static constexpr int dim = 1;
    [[nodiscard]] double energy(const Vec<1>&) const { return 0.0; }
    [[nodiscard]] Vec<1> gradient(const Vec<1>&) const { return Vec<1>(std::numeric_limits<double>::quiet_NaN()); }
    [[nodiscard]] Domain<1> domain() const { return periodic_interval(); }
    [[nodiscard]] std::string name() const { return "nan"; }
};

}  // namespace

TEST(Langevin, HamiltonianLimitConservesEnergy) {
    const HarmonicPotential<1> h(Vec<1>(1.0), Vec<1>(0.0), reflecting_interval(-10.0, 10.0));
    auto cfg = SimConfig<1>::isotropic(1.0, 0.0, 1.0, 1e-3);
    const LangevinIntegrator<HarmonicPotential<1>> integrator(h, cfg);
    SimState<1> s;
    s.q[0] = 1.0;
    const double h0 = integrator.hamiltonian(s);
    ZeroNoise noise;
    const auto period = static_cast<std::size_t>(std::round(kTwoPi / cfg.dt));
    double worst = 0.0;
    for (std::size_t k = 0; k < period; ++k) {
        integrator.advance(s, 1, noise);
        worst = std::max(worst, std::abs(integrator.hamiltonian(s) - h0) / h0);
    }
    EXPECT_LT(worst, 1e-4);
    EXPECT_NEAR(s.q[0], 1.0, 1e-3);
}

TEST(Langevin, FixedPointWithoutNoise) {
    const PeriodicDoubleWell dw;
    const auto cfg = SimConfig<1>::isotropic(1.0, 5.0);
    SimState<1> s;
    s.q[0] = 0.5;  // barrier top; the gradient is zero up to rounding
    ZeroNoise noise;
    const auto next = step_langevin(s, cfg, dw, noise);
    EXPECT_NEAR(next.q[0], 0.5, 1e-15);
    EXPECT_NEAR(next.p[0], 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(next.t, cfg.dt);
}

TEST(Langevin, NoiseSatisfiesFluctuationDissipation) {
    SimConfig<2> cfg;
    cfg.beta = 2.0;
    cfg.friction << 3.0, 0.5, 0.5, 1.0;
    cfg.mass << 2.0, 0.3, 0.3, 1.0;
    cfg.dt = 0.01;
    const LangevinIntegrator<FlatPotential<2>> integrator(FlatPotential<2>(Domain<2>{{0, 0}, {1, 1}, {true, true}}),
                                                          cfg);
    const Mat<2>& l = integrator.momentum_noise();
    const Mat<2>& a = integrator.momentum_damping();
    const Mat<2> expected = (cfg.mass - a * cfg.mass * a.transpose()) / cfg.beta;
    EXPECT_LT((l * l.transpose() - expected).norm(), 1e-12);
    // To first order in dt the O-step covariance is 2γ dt/β.
    EXPECT_LT((expected - 2.0 * cfg.friction * cfg.dt / cfg.beta).norm(), 0.05 * expected.norm());
    const Mat<2> sigma = cfg.noise_amplitude();
    EXPECT_LT((sigma * sigma.transpose() - 2.0 * cfg.friction / cfg.beta).norm(), 1e-12);
}

TEST(Langevin, NonFiniteForceReportsPosition) {
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0);
    SimState<1> s;
    s.q[0] = 0.25;
    RandomStream rng(1);
    try {
        (void)step_langevin(s, cfg, NanPotential{}, rng);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("q = (0.25)"), std::string::npos) << e.what();
    }
}

TEST(Langevin, InvariantHistogram) {
    const LangevinIntegrator<PeriodicDoubleWell> integrator(PeriodicDoubleWell{},
                                                            SimConfig<1>::isotropic(1.0, 5.0, 1.0, 1e-3));
    EXPECT_LT(trajectory_l1(integrator, 10'000'000, 11), 0.05);
}

TEST(Smoluchowski, InvariantHistogram) {
    const SmoluchowskiIntegrator<PeriodicDoubleWell> integrator(PeriodicDoubleWell{},
                                                                SimConfig<1>::isotropic(1.0, 5.0, 1.0, 1e-3));
    EXPECT_LT(trajectory_l1(integrator, 10'000'000, 12), 0.05);
}

TEST(Smoluchowski, PureDiffusionIncrements) {
    const FlatPotential<1> flat(periodic_interval(0.0, 1e6));
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0, 1.0, 1e-3);
    const SmoluchowskiIntegrator<FlatPotential<1>> integrator(flat, cfg);
    RandomStream rng(3);
    SimState<1> s;
    s.q[0] = 5e5;
    const std::size_t n = 100000;
    const int bins = 20;
    std::vector<double> counts(bins, 0.0);
    const double sd = std::sqrt(2.0 * cfg.dt / cfg.beta);
    const boost::math::normal_distribution<> standard;
    RunningStats stats;
    for (std::size_t k = 0; k < n; ++k) {
        const double before = s.q[0];
        integrator.advance(s, 1, rng);
        const double z = (s.q[0] - before) / sd;
        stats.add(z);
        const double u = boost::math::cdf(standard, z);
        counts[std::min(bins - 1, static_cast<int>(u * bins))] += 1.0;
    }
    double chi2 = 0.0;
    const double expected = static_cast<double>(n) / bins;
    for (double c : counts) {
        chi2 += (c - expected) * (c - expected) / expected;
    }
    const boost::math::chi_squared_distribution<> dist(bins - 1);
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.999));
    EXPECT_NEAR(stats.mean(), 0.0, 4.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_NEAR(stats.variance(), 1.0, 0.02);
    const Mat<1>& l = integrator.increment_noise();
    EXPECT_NEAR(l(0, 0) * l(0, 0), 2.0 * cfg.dt / cfg.beta, 1e-15);
}

TEST(Smoluchowski, FrictionRescalesTime) {
    // Doubling γ and dt gives the same discrete path at doubled time.
    const PeriodicDoubleWell dw;
    const SmoluchowskiIntegrator<PeriodicDoubleWell> slow(dw, SimConfig<1>::isotropic(1.0, 2.0, 1.0, 2e-3));
    const SmoluchowskiIntegrator<PeriodicDoubleWell> fast(dw, SimConfig<1>::isotropic(1.0, 1.0, 1.0, 1e-3));
    RandomStream r1(9);
    RandomStream r2(9);
    SimState<1> a;
    SimState<1> b;
    a.q[0] = b.q[0] = 0.3;
    slow.advance(a, 5000, r1);
    fast.advance(b, 5000, r2);
    EXPECT_NEAR(a.q[0], b.q[0], 1e-9);
    EXPECT_NEAR(a.t, 2.0 * b.t, 1e-12);
}

TEST(Determinism, SameSeedSameTrajectory) {
    const LangevinIntegrator<PeriodicDoubleWell> integrator(PeriodicDoubleWell{}, SimConfig<1>::isotropic(1.0, 5.0));
    const StreamFactory streams(42);
    auto r1 = streams.stream(7);
    auto r2 = streams.stream(7);
    const auto t1 = record_trajectory(integrator, SimState<1>{}, 1000, 10, r1);
    const auto t2 = record_trajectory(integrator, SimState<1>{}, 1000, 10, r2);
    ASSERT_EQ(t1.size(), 101u);
    for (std::size_t k = 0; k < t1.size(); ++k) {
        EXPECT_EQ(t1[k].q[0], t2[k].q[0]);
        EXPECT_EQ(t1[k].p[0], t2[k].p[0]);
    }
}

TEST(Canonical, FlatPositionsAreUniform) {
    const FlatPotential<1> flat(periodic_interval());
    const auto sample = sample_canonical(100000, SimConfig<1>::isotropic(1.0, 1.0), flat, StreamFactory(5));
    std::vector<double> q;
    for (const auto& s : sample.states) {
        q.push_back(s.q[0]);
    }
    std::sort(q.begin(), q.end());
    double d = 0.0;
    const auto n = static_cast<double>(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - q[i], q[i] - static_cast<double>(i) / n});
    }
    // Asymptotic Kolmogorov critical value at p = 0.001.
    EXPECT_LT(std::sqrt(n) * d, 1.949);
    // Every proposal is accepted on a flat potential, which is reported.
    EXPECT_EQ(sample.acceptance_rate, 1.0);
    ASSERT_EQ(sample.warnings.size(), 1u);
    EXPECT_NE(sample.warnings[0].find("acceptance rate"), std::string::npos);
}

TEST(Canonical, MomentumCovariance) {
    SimConfig<2> cfg;
    cfg.beta = 2.0;
    cfg.mass << 2.0, 0.5, 0.5, 1.0;
    const FlatPotential<2> flat(Domain<2>{{0, 0}, {1, 1}, {true, true}});
    const auto sample = sample_canonical(100000, cfg, flat, StreamFactory(6));
    Mat<2> cov = Mat<2>::Zero();
    for (const auto& s : sample.states) {
        cov += s.p * s.p.transpose();
    }
    cov /= static_cast<double>(sample.states.size());
    const Mat<2> target = cfg.mass / cfg.beta;
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(cov(i, i), target(i, i), 0.02 * target(i, i));
    }
    EXPECT_NEAR(cov(0, 1), target(0, 1), 0.02 * std::sqrt(target(0, 0) * target(1, 1)));
}

TEST(Canonical, DoubleWellMarginal) {
    const auto sample = sample_canonical(200000, SimConfig<1>::isotropic(1.0, 1.0), PeriodicDoubleWell{}, StreamFactory(8));
    std::vector<double> counts(50, 0.0);
    for (const auto& s : sample.states) {
        counts[std::min<std::size_t>(49, static_cast<std::size_t>(s.q[0] * 50.0))] += 1.0;
    }
    EXPECT_LT(l1_to_boltzmann(counts, 1.0), 0.05);
    EXPECT_GT(sample.acceptance_rate, 0.1);
    EXPECT_LT(sample.acceptance_rate, 0.9);
}

TEST(Canonical, IndependentOfThreadCount) {
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0);
    const MetropolisSettings settings{.burn_in = 200, .thinning = 2, .samples_per_chain = 1000};
    const auto a = sample_canonical(5000, cfg, PeriodicDoubleWell{}, StreamFactory(2), 1, settings);
    const auto b = sample_canonical(5000, cfg, PeriodicDoubleWell{}, StreamFactory(2), 3, settings);
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        ASSERT_EQ(a.states[i].q[0], b.states[i].q[0]);
        ASSERT_EQ(a.states[i].p[0], b.states[i].p[0]);
    }
}

TEST(OuKernel, ScalarCovariance) {
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0, 1.0);
    EXPECT_NEAR(ou_covariance(1.0, cfg)(0, 0), 1.0 - std::exp(-2.0), 1e-14);
    EXPECT_NEAR(1.0 - std::exp(-2.0), 0.8647, 1e-4);
}

TEST(OuKernel, StationaryLimit) {
    SimConfig<2> cfg;
    cfg.beta = 1.5;
    cfg.friction << 2.0, 0.0, 0.0, 1.0;
    cfg.mass << 1.0, 0.0, 0.0, 0.5;
    // Slowest rate γ/m = 2 in both axes; γt = 50 at t = 25.
    for (const auto& p : {Vec<2>(0.0, 0.0), Vec<2>(0.5, -0.3), Vec<2>(-1.0, 1.2)}) {
        const double k = ou_kernel<2>(25.0, p, Vec<2>(3.0, -2.0), cfg);
        EXPECT_LT(std::abs(k - momentum_density<2>(p, cfg)), 1e-10);
    }
}

TEST(OuKernel, ShortTimeMeanMatchesSimulation) {
    // With a flat potential the BAOAB momentum update is the exact OU flow.
    const double gamma = 2.0;
    const double t = 0.01;
    const auto cfg = SimConfig<1>::isotropic(1.0, gamma, 1.0, t);
    const LangevinIntegrator<FlatPotential<1>> integrator(FlatPotential<1>(periodic_interval()), cfg);
    RandomStream rng(4);
    RunningStats stats;
    for (int k = 0; k < 1'000'000; ++k) {
        SimState<1> s;
        s.p[0] = 1.0;
        integrator.advance(s, 1, rng);
        stats.add(s.p[0]);
    }
    EXPECT_NEAR(stats.mean(), std::exp(-gamma * t), 1e-3);
    EXPECT_NEAR(stats.variance(), ou_covariance(t, cfg)(0, 0) / cfg.beta, 1e-3);
    // The kernel itself integrates to one and has that mean.
    const double mass = integrate_box<1>([&](const Vec<1>& p) { return ou_kernel<1>(t, p, Vec<1>(1.0), cfg); },
                                         {-1.0}, {3.0}, {false}, 64);
    const double mean = integrate_box<1>(
        [&](const Vec<1>& p) { return p[0] * ou_kernel<1>(t, p, Vec<1>(1.0), cfg); }, {-1.0}, {3.0}, {false}, 64);
    EXPECT_NEAR(mass, 1.0, 1e-10);
    EXPECT_NEAR(mean, std::exp(-gamma * t), 1e-10);
}

TEST(OuKernel, RejectsNonpositiveTime) {
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0);
    EXPECT_THROW(ou_kernel<1>(0.0, Vec<1>(0.0), Vec<1>(0.0), cfg), InvalidArgument);
    EXPECT_THROW(ou_kernel<1>(-1.0, Vec<1>(0.0), Vec<1>(0.0), cfg), InvalidArgument);
}

TEST(Config, RejectsInvalid) {
    auto cfg = SimConfig<1>::isotropic(1.0, 1.0);
    cfg.friction(0, 0) = -1.0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = SimConfig<1>::isotropic(1.0, 1.0);
    cfg.dt = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    SimConfig<2> c2;
    c2.mass << 1.0, 0.2, 0.1, 1.0;
    EXPECT_THROW(c2.validate(), InvalidArgument);
}

TEST(Trajectory, CsvHeader) {
    std::ostringstream os;
    write_trajectory_csv<2>(os, {SimState<2>{}});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,q1,q2,p1,p2");
}
