#include <pseudogen/operators.hpp>
#include <pseudogen/spectral.hpp>
#include <pseudogen/stats.hpp>

#include <gtest/gtest.h>

#include <sstream>

using namespace pseudogen;

namespace {

const PeriodicDoubleWell kWell;

UlamGrid<1> well_grid(int cells) { return UlamGrid<1>::with_boltzmann(kWell, 1.0, {cells}); }

double set_mass(const Vector& w, const std::vector<std::size_t>& set) {
    double m = 0.0;
    for (auto i : set) {
        m += w[static_cast<Eigen::Index>(i)];
    }
    return m;
}

}  // namespace

TEST(Spectrum, StochasticMatrixHasUnitEigenvalue) {
    const auto grid = well_grid(32);
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0, 1.0, 1e-3);
    const auto op = build_spatial_transfer(grid, 0.05, cfg, kWell, 200, StreamFactory(1));
    const auto spec = compute_spectrum(op, 4);
    EXPECT_FALSE(spec.self_adjoint);
    EXPECT_NEAR(spec.real(0), 1.0, 1e-10);
    EXPECT_LT(spec.residuals.maxCoeff(), 1e-10);
    for (Eigen::Index i = 0; i < op.size(); ++i) {
        EXPECT_NEAR(std::abs(spec.vectors(i, 0)), 1.0, 1e-8);
    }
    for (std::size_t k = 1; k < spec.size(); ++k) {
        EXPECT_LE(spec.real(k), spec.real(k - 1));
        EXPECT_NEAR(weighted_norm(spec.vectors.col(static_cast<Eigen::Index>(k)), grid.weights()), 1.0, 1e-12);
    }
    EXPECT_THROW(compute_spectrum(op, 0), InvalidArgument);
    EXPECT_THROW(compute_spectrum(op, 33), InvalidArgument);
}

TEST(Spectrum, FlatGeneratorHasDegeneratePair) {
    const FlatPotential<1> flat(periodic_interval());
    const auto grid = UlamGrid<1>::with_boltzmann(flat, 1.0, {64});
    const auto spec = compute_spectrum(build_g2_matrix(grid, 1.0), 5);
    EXPECT_TRUE(spec.self_adjoint);
    EXPECT_NEAR(spec.real(1), spec.real(2), 1e-9);
    EXPECT_NEAR(spec.real(3), spec.real(4), 1e-9);
    const Vector& w = grid.weights();
    EXPECT_NEAR(weighted_dot(spec.vectors.col(1), spec.vectors.col(2), w), 0.0, 1e-10);
}

TEST(Spectrum, NonFiniteMatrixThrows) {
    OperatorMatrix op;
    op.matrix = Matrix::Identity(3, 3);
    op.matrix(1, 2) = std::nan("");
    EXPECT_THROW(compute_spectrum(op, 1), NumericalError);
}

TEST(CompareEigenfunctions, SignAndScaleInvariant) {
    const Vector w = Vector::Constant(4, 0.25);
    Vector u(4);
    u << 1.0, -1.0, 1.0, -1.0;
    Vector orth(4);
    orth << 1.0, 1.0, -1.0, -1.0;
    EXPECT_NEAR(compare_eigenfunctions(u, 3.0 * u, w), 0.0, 1e-15);
    EXPECT_NEAR(compare_eigenfunctions(u, -2.0 * u, w), 0.0, 1e-15);
    EXPECT_NEAR(compare_eigenfunctions(u, orth, w), std::sqrt(2.0), 1e-15);
    EXPECT_THROW(compare_eigenfunctions(u, Vector::Zero(4), w), InvalidArgument);
}

TEST(Partition, DoubleWellSplitsAtBarriers) {
    const auto grid = well_grid(64);
    const auto spec = compute_spectrum(exponential_operator(build_g2_matrix(grid, 1.0), 0.2), 3);
    const auto part = metastable_partition(spec, 2);
    ASSERT_EQ(part.sets.size(), 2u);
    EXPECT_TRUE(part.metastable);
    std::vector<int> label(grid.size(), 0);
    for (auto i : part.sets[1]) {
        label[i] = 1;
    }
    std::vector<double> boundaries;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (label[i] != label[(i + 1) % grid.size()]) {
            boundaries.push_back(std::fmod(grid.center(i)[0] + 0.5 * grid.width(0), 1.0));
        }
    }
    ASSERT_EQ(boundaries.size(), 2u);
    std::sort(boundaries.begin(), boundaries.end());
    EXPECT_LE(std::min(boundaries[0], 1.0 - boundaries[1]), 2.0 * grid.width(0));
    const double middle = boundaries[0] < 0.25 ? boundaries[1] : boundaries[0];
    EXPECT_NEAR(middle, 0.5, 2.0 * grid.width(0));
    const Vector& w = grid.weights();
    EXPECT_NEAR(set_mass(w, part.sets[0]), set_mass(w, part.sets[1]), 0.02);
}

TEST(Partition, FlatPotentialIsNotMetastable) {
    const FlatPotential<1> flat(periodic_interval());
    const auto grid = UlamGrid<1>::with_boltzmann(flat, 1.0, {32});
    const auto spec = compute_spectrum(exponential_operator(build_g2_matrix(grid, 1.0), 0.3), 3);
    const auto part = metastable_partition(spec, 2);
    EXPECT_FALSE(part.metastable);
    EXPECT_FALSE(part.warnings.empty());
}

TEST(Partition, KMeansFindsThreeWells) {
    const TrigSeriesPotential triple({0.0, 0.0, 0.0, 3.0}, {});
    const auto grid = UlamGrid<1>::with_boltzmann(triple, 1.0, {60});
    const auto spec = compute_spectrum(exponential_operator(build_g2_matrix(grid, 1.0), 0.5), 4);
    const auto part = metastable_partition(spec, 3);
    ASSERT_EQ(part.sets.size(), 3u);
    EXPECT_TRUE(part.metastable);
    for (const auto& set : part.sets) {
        EXPECT_NEAR(set_mass(grid.weights(), set), 1.0 / 3.0, 0.02);
    }
}

TEST(Bounds, IdentityOperatorIsTight) {
    const auto grid = well_grid(8);
    OperatorMatrix id;
    id.kind = OperatorKind::exponential;
    id.matrix = Matrix::Identity(8, 8);
    id.weights = grid.weights();
    const auto spec = compute_spectrum(id, 3);
    Partition part;
    part.sets = {{0, 1, 2, 3}, {4, 5, 6, 7}};
    const auto b = metastability_bounds(id, spec, part);
    EXPECT_NEAR(b.diagonal_sum, 2.0, 1e-12);
    EXPECT_NEAR(b.upper, 2.0, 1e-12);
    EXPECT_NEAR(b.lower, 2.0, 1e-12);
}

TEST(Bounds, BracketDiagonalSum) {
    const auto grid = well_grid(64);
    const auto op = exponential_operator(build_g2_matrix(grid, 1.0), 0.4);
    const auto spec = compute_spectrum(op, 64);
    const auto part = metastable_partition(spec, 2);
    const auto b = metastability_bounds(op, spec, part);
    ASSERT_EQ(b.rho.size(), 1u);
    EXPECT_GT(b.rho[0], 0.9);
    EXPECT_LE(b.rho[0], 1.0 + 1e-12);
    EXPECT_LE(b.lower, b.diagonal_sum + 1e-12);
    EXPECT_LE(b.diagonal_sum, b.upper + 1e-12);
    EXPECT_LT(b.upper - b.lower, 0.02);
    EXPECT_NEAR(b.spectrum_floor, spec.real(63), 1e-12);
    // The floor comes from the operator, not from how many modes were computed.
    const auto few = metastability_bounds(op, compute_spectrum(op, 3), part);
    EXPECT_NEAR(few.lower, b.lower, 1e-12);

    // A split that ignores the wells has a smaller ρ and a looser lower bound.
    Partition halves;
    halves.sets.assign(2, {});
    for (std::size_t i = 0; i < grid.size(); ++i) {
        halves.sets[(i + 16) % 64 < 32 ? 0 : 1].push_back(i);
    }
    const auto poor = metastability_bounds(op, spec, halves);
    EXPECT_LT(poor.rho[0], b.rho[0]);
    EXPECT_LT(poor.lower, b.lower);
    EXPECT_LT(poor.diagonal_sum, b.diagonal_sum);
    EXPECT_LE(poor.lower, poor.diagonal_sum + 1e-12);
}

TEST(RestrictedNorm, MatchesSingularValueOnSubspace) {
    const auto grid = well_grid(16);
    const auto g2 = build_g2_matrix(grid, 1.0);
    const auto spec = compute_spectrum(g2, 4);
    const Matrix basis = spec.vectors.leftCols(3);
    // On its own eigenvectors G₂ acts diagonally: the norm is the largest |μ|.
    EXPECT_NEAR(restricted_operator_norm(g2.matrix, basis, grid.weights()), std::abs(spec.real(2)), 1e-9);
    EXPECT_NEAR(restricted_operator_norm(Matrix::Identity(16, 16), 2.0 * basis, grid.weights()), 1.0, 1e-12);
}

TEST(MonteCarloError, StandardErrorMatchesReplicateSpread) {
    const auto grid = well_grid(16);
    const auto cfg = SimConfig<1>::isotropic(1.0, 1.0, 1.0, 1e-3);
    RunningStats lambda;
    RunningStats reported;
    RunningStats noise;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto op = build_smoluchowski_transfer(grid, 0.05, cfg, kWell, 200, StreamFactory(seed));
        const auto spec = compute_spectrum(op, 3);
        lambda.add(spec.real(1));
        reported.add(eigenvalue_standard_error(op, spec, 1));
        noise.add(restricted_noise_norm(op, spec.vectors.leftCols(3), grid.weights()));
    }
    const double spread = std::sqrt(lambda.variance());
    EXPECT_GT(reported.mean() / spread, 0.6);
    EXPECT_LT(reported.mean() / spread, 1.6);
    EXPECT_GT(noise.mean(), reported.mean());

    OperatorMatrix exact = exponential_operator(build_g2_matrix(grid, 1.0), 0.3);
    EXPECT_THROW(eigenvalue_standard_error(exact, compute_spectrum(exact, 2), 1), InvalidArgument);
}

TEST(Output, SpectrumAndEigenfunctionCsv) {
    const auto grid = well_grid(4);
    const auto spec = compute_spectrum(build_g2_matrix(grid, 1.0), 2);
    std::ostringstream os;
    write_spectrum_csv(os, spec);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "rank,re_lambda,im_lambda,residual");
    std::ostringstream es;
    write_eigenfunctions_csv(es, grid, spec, 5);
    const std::string text = es.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "cell_center,u1,u2");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}
