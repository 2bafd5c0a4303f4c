#include <pseudogen/reaction.hpp>
#include <pseudogen/spectral.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace pseudogen;

namespace {

ProjectedCoefficients synthetic(std::size_t bins, double a, bool periodic) {
    ProjectedCoefficients c;
    c.width = 1.0 / static_cast<double>(bins);
    c.periodic = periodic;
    for (std::size_t i = 0; i < bins; ++i) {
        c.z.push_back((static_cast<double>(i) + 0.5) * c.width);
    }
    c.a.assign(bins, a);
    c.b.assign(bins, 0.0);
    c.free_energy.assign(bins, 0.0);
    c.stderr_a.assign(bins, 0.0);
    c.stderr_b.assign(bins, 0.0);
    c.stderr_free_energy.assign(bins, 0.0);
    c.count.assign(bins, 100);
    c.total = 100 * bins;
    return c;
}

// −log of the bin average of e^{−V}, composite Simpson.
double bin_free_energy(double center, double width) {
    const int n = 200;
    const double h = width / n;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double x = center - 0.5 * width + k * h;
        sum += (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0)) * std::exp(-PeriodicDoubleWell::value(x));
    }
    return -std::log(sum * h / 3.0 / width);
}

class SeparableProjection : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        const auto cfg = SimConfig<2>::isotropic(1.0, 1.0);
        const auto xi = linear_coordinate(model.domain(), 0, 1.0, 32);
        coeffs = estimate_coefficients(xi, cfg, model, 200000, StreamFactory(21));
    }

    static inline SeparableDoubleWell2D model{};
    static inline ProjectedCoefficients coeffs;
};

}  // namespace

TEST_F(SeparableProjection, LinearCoordinateHasUnitDiffusion) {
    ASSERT_EQ(coeffs.bins(), 32u);
    EXPECT_TRUE(coeffs.periodic);
    EXPECT_EQ(coeffs.total, 200000u);
    for (std::size_t i = 0; i < coeffs.bins(); ++i) {
        ASSERT_TRUE(coeffs.active(i));
        EXPECT_DOUBLE_EQ(coeffs.a[i], 1.0);
        EXPECT_NEAR(coeffs.stderr_a[i], 0.0, 1e-12);
    }
}

TEST_F(SeparableProjection, DriftIsMeanForce) {
    // Boltzmann average of −V′ over a bin: (e^{−V(r)} − e^{−V(l)}) / ∫ e^{−V}.
    for (std::size_t i = 0; i < coeffs.bins(); ++i) {
        const double l = coeffs.z[i] - 0.5 * coeffs.width;
        const double r = coeffs.z[i] + 0.5 * coeffs.width;
        const double mass = coeffs.width * std::exp(-bin_free_energy(coeffs.z[i], coeffs.width));
        const double exact = (std::exp(-PeriodicDoubleWell::value(r)) - std::exp(-PeriodicDoubleWell::value(l))) / mass;
        EXPECT_NEAR(coeffs.b[i], exact, 4.0 * coeffs.stderr_b[i] + 1e-3) << "z = " << coeffs.z[i];
    }
}

TEST_F(SeparableProjection, FreeEnergyIsMarginalPotential) {
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < coeffs.bins(); ++i) {
        deepest = coeffs.count[i] > coeffs.count[deepest] ? i : deepest;
    }
    for (std::size_t i = 0; i < coeffs.bins(); ++i) {
        if (coeffs.count[i] < 2000) {
            continue;
        }
        const double df = coeffs.free_energy[i] - coeffs.free_energy[deepest];
        const double dv = bin_free_energy(coeffs.z[i], coeffs.width) - bin_free_energy(coeffs.z[deepest], coeffs.width);
        const double se = std::hypot(coeffs.stderr_free_energy[i], coeffs.stderr_free_energy[deepest]);
        EXPECT_NEAR(df, dv, 4.0 * se + 0.01) << "z = " << coeffs.z[i];
    }
}

TEST_F(SeparableProjection, DriftIdentityHolds) {
    const auto vt = volatility_transform(coeffs, 1.0);
    int within = 0;
    for (std::size_t i = 0; i < coeffs.bins(); ++i) {
        within += std::abs(coeffs.b[i] - vt.z_drift_identity[i]) <= 4.0 * vt.identity_error[i] + 1.0 ? 1 : 0;
        EXPECT_DOUBLE_EQ(vt.y_diffusion[i], 1.0);
    }
    EXPECT_GE(within, 29);
}

TEST(Coefficients, ScaledCoordinate) {
    const SeparableDoubleWell2D model;
    const auto xi = linear_coordinate(model.domain(), 0, 2.0, 16);
    EXPECT_DOUBLE_EQ(xi.z_max, 2.0);
    const auto c = estimate_coefficients(xi, SimConfig<2>::isotropic(1.0, 1.0), model, 20000, StreamFactory(3));
    for (std::size_t i = 0; i < c.bins(); ++i) {
        EXPECT_DOUBLE_EQ(c.a[i], 4.0);
    }
    const auto vt = volatility_transform(c, 1.0);
    for (std::size_t i = 0; i < c.bins(); ++i) {
        EXPECT_NEAR(vt.phi[i], 0.5 * c.z[i], 1e-12);
        EXPECT_NEAR(vt.y_free_energy[i], c.free_energy[i] - std::log(2.0), 1e-12);
    }
}

TEST(Coefficients, SparseBinsAreMerged) {
    const SeparableDoubleWell2D model;
    const auto xi = linear_coordinate(model.domain(), 0, 1.0, 64);
    const auto c = estimate_coefficients(xi, SimConfig<2>::isotropic(1.0, 1.0), model, 10000, StreamFactory(4));
    // 10⁴ samples over 64 bins leave the median bin below 200.
    EXPECT_EQ(c.bins(), 32u);
    EXPECT_DOUBLE_EQ(c.width, 1.0 / 32.0);
    EXPECT_NE(std::find_if(c.warnings.begin(), c.warnings.end(),
                           [](const std::string& w) { return w.find("reduced from 64 to 32") != std::string::npos; }),
              c.warnings.end());
}

TEST(Coefficients, NumericalLaplacianMatchesAnalytic) {
    ReactionCoordinate<2> xi;
    xi.value = [](const Vec<2>& q) { return q[1] * q[1]; };
    xi.gradient = [](const Vec<2>& q) { return Vec<2>(0.0, 2.0 * q[1]); };
    EXPECT_NEAR(xi.laplacian_at(Vec<2>(0.3, 0.7)), 2.0, 1e-8);
}

TEST(Coefficients, RejectsDegenerateInput) {
    const SeparableDoubleWell2D model;
    const auto cfg = SimConfig<2>::isotropic(1.0, 1.0);
    ReactionCoordinate<2> flat;
    flat.value = [](const Vec<2>&) { return 0.5; };
    flat.gradient = [](const Vec<2>&) { return Vec<2>::Zero().eval(); };
    flat.laplacian = [](const Vec<2>&) { return 0.0; };
    EXPECT_THROW(estimate_coefficients(flat, cfg, model, 10000, StreamFactory(1)), NumericalError);
    const auto xi = linear_coordinate(model.domain(), 0);
    EXPECT_THROW(estimate_coefficients(xi, cfg, model, 100, StreamFactory(1)), InvalidArgument);
    EXPECT_THROW(linear_coordinate(model.domain(), 2), InvalidArgument);
}

TEST(EffectiveGenerator, FlatSpectrumIsDiscreteLaplacian) {
    const auto op = build_g2ess_matrix(synthetic(64, 1.0, true), 2.0);
    const auto spec = compute_spectrum(op, 5);
    EXPECT_TRUE(spec.self_adjoint);
    EXPECT_NEAR(spec.real(0), 0.0, 1e-9);
    for (std::size_t k = 1; k < 5; ++k) {
        const double mode = static_cast<double>((k + 1) / 2);
        const double exact = -4.0 * std::numbers::pi * std::numbers::pi * mode * mode / 2.0;
        EXPECT_NEAR(spec.real(k) / exact, 1.0, 0.01) << k;
    }
}

TEST(EffectiveGenerator, InvariantWeightsAreLeftNullVector) {
    auto c = synthetic(20, 1.0, false);
    for (std::size_t i = 0; i < c.bins(); ++i) {
        c.free_energy[i] = std::sin(3.0 * c.z[i]) + c.z[i];
        c.a[i] = 1.0 + 0.5 * c.z[i];
    }
    const auto op = build_g2ess_matrix(c, 1.5);
    EXPECT_NEAR(op.weights.sum(), 1.0, 1e-14);
    EXPECT_LT((op.weights.transpose() * op.matrix).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(row_sum_defect(op.matrix, 0.0), 1e-10);
    EXPECT_NEAR(op.weights[3] / op.weights[4], std::exp(-1.5 * (c.free_energy[3] - c.free_energy[4])), 1e-12);
}

TEST(EffectiveGenerator, EmptyBinsDecoupledAndBadInputRejected) {
    auto c = synthetic(8, 1.0, false);
    c.count[2] = 0;
    const auto op = build_g2ess_matrix(c, 1.0);
    EXPECT_EQ(op.flagged_cells, std::vector<std::size_t>{2});
    EXPECT_TRUE(op.matrix.row(2).isZero(0.0));
    EXPECT_TRUE(op.matrix.col(2).isZero(0.0));
    c.count[2] = 5;
    c.a[5] = 0.0;
    EXPECT_THROW(build_g2ess_matrix(c, 1.0), InvalidArgument);
    EXPECT_THROW(build_g2ess_matrix(synthetic(8, 1.0, false), 0.0), InvalidArgument);
}

TEST(VolatilityTransform, UnitDiffusionGivesIdentityMap) {
    const auto c = synthetic(10, 1.0, false);
    const auto vt = volatility_transform(c, 1.0);
    for (std::size_t i = 0; i < c.bins(); ++i) {
        EXPECT_NEAR(vt.phi[i], c.z[i], 1e-14);
        EXPECT_DOUBLE_EQ(vt.sigma[i], 1.0);
        EXPECT_NEAR(vt.y_drift[i], 0.0, 1e-14);
    }
    auto empty = c;
    empty.count[4] = 0;
    EXPECT_THROW(volatility_transform(empty, 1.0), InvalidArgument);
    auto tiny = c;
    tiny.a[3] = 1e-20;
    EXPECT_THROW(volatility_transform(tiny, 1.0), NumericalError);
}

TEST(Output, CoefficientsCsv) {
    std::ostringstream os;
    write_coefficients_csv(os, synthetic(3, 1.0, false));
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "z,a,b,F,stderr_a,stderr_b,count");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}
