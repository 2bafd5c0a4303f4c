#include <pseudogen/linalg.hpp>
#include <pseudogen/parallel.hpp>
#include <pseudogen/rng.hpp>
#include <pseudogen/stats.hpp>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <atomic>
#include <set>

using namespace pseudogen;

namespace {

Matrix random_matrix(Eigen::Index n, double scale, std::uint64_t seed) {
    RandomStream rng(seed);
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            a(i, j) = scale * rng.normal();
        }
    }
    return a;
}

}  // namespace

TEST(Expm, MatchesReferenceImplementation) {
    for (double scale : {1e-3, 0.3, 2.0, 20.0}) {
        const Matrix a = random_matrix(12, scale, 17);
        const Matrix reference = a.exp();
        EXPECT_LT((expm(a) - reference).norm(), 1e-11 * std::max(1.0, reference.norm())) << "scale " << scale;
    }
}

TEST(Expm, DiagonalAndZero) {
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << -1.0, 0.5, -40.0;
    const Matrix e = expm(d);
    EXPECT_NEAR(e(0, 0) / std::exp(-1.0), 1.0, 1e-14);
    EXPECT_NEAR(e(1, 1) / std::exp(0.5), 1.0, 1e-14);
    EXPECT_NEAR(e(2, 2) / std::exp(-40.0), 1.0, 1e-12);
    EXPECT_TRUE(expm(Matrix::Zero(4, 4)).isIdentity(1e-15));
}

TEST(Expm, RejectsBadInput) {
    EXPECT_THROW(expm(Matrix::Zero(2, 3)), InvalidArgument);
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(expm(a), NumericalError);
}

TEST(Weighted, NormAndSymmetrization) {
    Vector w(3);
    w << 0.2, 0.3, 0.5;
    Vector u(3);
    u << 1.0, -2.0, 0.5;
    EXPECT_NEAR(weighted_norm(u, w), std::sqrt(0.2 + 1.2 + 0.125), 1e-15);

    // A = D_w^{-1} S with S symmetric is w-self-adjoint.
    Matrix s = random_matrix(3, 1.0, 3);
    s = (s + s.transpose()).eval();
    const Matrix a = w.cwiseInverse().asDiagonal() * s;
    EXPECT_LT(self_adjointness_defect(a, w), 1e-15);
    const Matrix sym = symmetrize_weighted(a, w);
    EXPECT_LT((sym - sym.transpose()).norm(), 1e-13);
    EXPECT_GT(self_adjointness_defect(random_matrix(3, 1.0, 4), w), 1e-3);
}

TEST(Stats, LineFitExact) {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y{1.0, 3.0, 5.0, 7.0};
    const auto fit = fit_line(x, y);
    EXPECT_NEAR(fit.slope, 2.0, 1e-14);
    EXPECT_NEAR(fit.intercept, 1.0, 1e-14);
    EXPECT_NEAR(fit.r_squared, 1.0, 1e-14);
    EXPECT_NEAR(loglog_slope({0.1, 0.2, 0.4}, {0.003, 0.024, 0.192}), 3.0, 1e-12);
    EXPECT_THROW(fit_line({1.0, 1.0}, {2.0, 3.0}), InvalidArgument);
}

TEST(Stats, RunningStatsMatchesTwoPass) {
    RandomStream rng(5);
    std::vector<double> xs;
    RunningStats a;
    RunningStats b;
    for (int k = 0; k < 1000; ++k) {
        xs.push_back(3.0 + rng.normal());
        (k < 400 ? a : b).add(xs.back());
    }
    a.merge(b);
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= 1000.0;
    double var = 0.0;
    for (double x : xs) {
        var += (x - mean) * (x - mean);
    }
    var /= 999.0;
    EXPECT_EQ(a.count(), 1000u);
    EXPECT_NEAR(a.mean(), mean, 1e-12);
    EXPECT_NEAR(a.variance(), var, 1e-12);
    EXPECT_NEAR(a.standard_error(), std::sqrt(var / 1000.0), 1e-12);
}

TEST(Parallel, CoversEveryIndexOnce) {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) {
        EXPECT_EQ(h.load(), 1);
    }
}

TEST(Parallel, RethrowsWorkerException) {
    EXPECT_THROW(parallel_for(100, 3,
                              [](std::size_t i) {
                                  if (i == 37) {
                                      throw NumericalError("boom");
                                  }
                              }),
                 NumericalError);
}

TEST(Streams, CounterBased) {
    const StreamFactory f(123);
    auto a = f.stream(4, 2);
    auto b = f.stream(4, 2);
    auto c = f.stream(2, 4);
    const double xa = a.normal();
    EXPECT_EQ(xa, b.normal());
    EXPECT_NE(xa, c.normal());
    EXPECT_NE(f.derive(1).stream(0).normal(), f.derive(2).stream(0).normal());
    EXPECT_NE(StreamFactory(124).stream(4, 2).normal(), xa);

    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        seeds.insert(hash_words(1, {i}));
    }
    EXPECT_EQ(seeds.size(), 10000u);
}

TEST(Streams, NormalMoments) {
    RandomStream rng(77);
    RunningStats s;
    for (int k = 0; k < 200000; ++k) {
        s.add(rng.normal());
    }
    EXPECT_NEAR(s.mean(), 0.0, 0.01);
    EXPECT_NEAR(s.variance(), 1.0, 0.01);
}

TEST(Format, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e-300), "1e-300");
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(format_double(x)), x);
}
