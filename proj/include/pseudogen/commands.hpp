#pragma once

#include "config.hpp"
#include "experiments.hpp"
#include "manifest.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace pseudogen {

using Model1D = std::variant<PeriodicDoubleWell, TrigSeriesPotential, PolynomialPotential>;

/// [potential] name = double_well_1d | trig_series | polynomial.
inline Model1D load_model_1d(const Config& c) {
    const std::string name = c.get_string("potential", "name", "double_well_1d");
    if (name == "double_well_1d") {
        return PeriodicDoubleWell{};
    }
    if (name == "trig_series") {
        return TrigSeriesPotential(c.get_list("potential", "cos"), c.get_list("potential", "sin", {0.0}),
                                   c.get_double("potential", "lo", 0.0), c.get_double("potential", "hi", 1.0));
    }
    if (name == "polynomial") {
        const double lo = c.get_double("potential", "lo");
        const double hi = c.get_double("potential", "hi");
        c.check(hi > lo, "potential", "hi", "must exceed potential.lo");
        return PolynomialPotential(c.get_list("potential", "coeffs"), lo, hi);
    }
    c.check(false, "potential", "name", "unknown 1-D potential \"" + name + "\"");
    return PeriodicDoubleWell{};
}

inline SeparableDoubleWell2D load_model_2d(const Config& c) {
    const std::string name = c.get_string("potential", "name", "separable_double_well_2d");
    c.check(name == "separable_double_well_2d", "potential", "name",
            "this command needs separable_double_well_2d, got \"" + name + "\"");
    const double omega = c.get_double("potential", "omega", 4.0);
    const double half = c.get_double("potential", "half_width", 1.5);
    c.check(omega > 0.0, "potential", "omega", "must be positive");
    c.check(half > 0.0, "potential", "half_width", "must be positive");
    return SeparableDoubleWell2D(omega, half);
}

template <int Dim>
SimConfig<Dim> load_dynamics(const Config& c, double default_friction = 5.0, double default_dt = 1e-3) {
    const double beta = c.get_double("dynamics", "beta", 1.0);
    const double friction = c.get_double("dynamics", "friction", default_friction);
    const double mass = c.get_double("dynamics", "mass", 1.0);
    const double dt = c.get_double("dynamics", "dt", default_dt);
    c.check(beta > 0.0, "dynamics", "beta", "must be positive");
    c.check(friction > 0.0, "dynamics", "friction", "must be positive");
    c.check(mass > 0.0, "dynamics", "mass", "must be positive");
    c.check(dt > 0.0, "dynamics", "dt", "must be positive");
    auto cfg = SimConfig<Dim>::isotropic(beta, friction, mass, dt);
    cfg.validate();
    return cfg;
}

struct RunOptions {
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    int threads = 1;
};

namespace detail {

struct CsvRow {
    std::ostream& os;
    bool first = true;

    CsvRow& operator<<(double x) { return put(format_double(x)); }
    CsvRow& operator<<(int x) { return put(std::to_string(x)); }
    CsvRow& operator<<(std::size_t x) { return put(std::to_string(x)); }
    CsvRow& operator<<(bool x) { return put(x ? "1" : "0"); }
    CsvRow& operator<<(const std::string& s) { return put(s); }
    ~CsvRow() { os << '\n'; }

private:
    CsvRow& put(const std::string& s) {
        if (!first) {
            os << ',';
        }
        first = false;
        os << s;
        return *this;
    }
};

inline void add_warnings(RunManifest& m, const std::vector<std::string>& ws) {
    for (const auto& w : ws) {
        m.warn(w);
    }
}

// Loads the model, rejects unread keys before any expensive work, then runs.
template <class Visitor>
auto with_model(const Config& c, Visitor&& v) {
    const Model1D model = load_model_1d(c);
    c.reject_unused();
    return std::visit(std::forward<Visitor>(v), model);
}

inline void write_vectors(std::ostream& os, const UlamGrid<1>& grid, const SpectrumResult& spec, std::size_t count) {
    os << "cell,q,weight";
    for (std::size_t k = 0; k < count; ++k) {
        os << ",phi" << k;
    }
    os << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CsvRow r{os};
        r << i << grid.center(i)[0] << grid.weights()[static_cast<Eigen::Index>(i)];
        for (std::size_t k = 0; k < count; ++k) {
            r << spec.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        }
    }
}

}  // namespace detail

// Each command reads its keys, runs a study, writes CSV artifacts through
// the writer and records headline numbers as manifest results.

inline void cmd_eigenfunctions(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                               RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 5.0);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 256, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 1000, 100);
    const double lag = c.get_double("experiment", "lag", 0.2);
    c.check(lag > 0.0, "experiment", "lag", "must be positive");
    const bool check_timestep = c.get_bool("experiment", "check_timestep", true);
    detail::with_model(c, [&](const auto& model) {
        const auto st = eigenfunction_study(model, cfg, cells, lag, n, streams, threads, check_timestep);
        out.write("potential.csv", [&](std::ostream& os) {
            os << "q,V\n";
            for (std::size_t i = 0; i < st.grid.size(); ++i) {
                const Vec<1> q = st.grid.center(i);
                detail::CsvRow{os} << q[0] << model.energy(q);
            }
        });
        out.write("eigenfunctions_spatial.csv", [&](std::ostream& os) { detail::write_vectors(os, st.grid, st.spatial, 2); });
        out.write("eigenfunctions_smoluchowski.csv",
                  [&](std::ostream& os) { detail::write_vectors(os, st.grid, st.smoluchowski, 2); });
        out.write("eigenfunctions_exponential.csv",
                  [&](std::ostream& os) { detail::write_vectors(os, st.grid, st.exponential, 2); });
        out.write("eigenvalues.csv", [&](std::ostream& os) {
            os << "operator,rank,lambda,stderr\n";
            for (std::size_t k = 0; k < 3; ++k) {
                detail::CsvRow{os} << std::string("spatial") << k << st.spatial.real(k)
                                   << (k == 1 ? st.spatial_stderr : 0.0);
                detail::CsvRow{os} << std::string("smoluchowski") << k << st.smoluchowski.real(k)
                                   << (k == 1 ? st.smoluchowski_stderr : 0.0);
                detail::CsvRow{os} << std::string("exponential") << k << st.exponential.real(k) << 0.0;
            }
        });
        m.result("sign_changes", static_cast<double>(st.spatial_signs.changes));
        for (double x : st.spatial_signs.crossings) {
            m.result("crossing", x);
        }
        m.result("distance_exponential_spatial", st.exponential_vs_spatial);
        m.result("distance_smoluchowski_spatial", st.smoluchowski_vs_spatial);
        m.result("constant_variation", st.constant_variation);
        if (check_timestep) {
            m.result("timestep_halving_change", st.timestep_change);
        }
        detail::add_warnings(m, st.warnings);
    });
}

inline void cmd_extrapolate(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                            RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 5.0);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 256, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 1000, 100);
    const double tau = c.get_double("experiment", "tau", 0.2);
    const auto n_max = static_cast<int>(c.get_count("experiment", "n_max", 10, 1));
    c.check(tau > 0.0, "experiment", "tau", "must be positive");
    detail::with_model(c, [&](const auto& model) {
        const auto st = extrapolation_study(model, cfg, cells, tau, n_max, n, streams, threads);
        out.write("extrapolation.csv", [&](std::ostream& os) {
            os << "n,lambda_S_ntau,stderr_S_ntau,lambda_S_tau_pow,lambda_R_tau_pow,lambda_E_tau_pow\n";
            for (std::size_t k = 0; k < st.n.size(); ++k) {
                detail::CsvRow{os} << st.n[k] << st.spatial_lagged[k] << st.spatial_lagged_stderr[k]
                                   << st.spatial_power[k] << st.taylor_power[k] << st.exponential_power[k];
            }
        });
        m.result("lambda_S_tau", st.spatial);
        m.result("lambda_R_tau", st.taylor);
        m.result("lambda_E_tau", st.exponential);
        m.result("gap_S_R", st.taylor_gap());
        m.result("gap_S_E", st.exponential_gap());
        detail::add_warnings(m, st.warnings);
    });
}

inline void cmd_semigroup_defect(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                                 RunManifest& m) {
    auto cfg = load_dynamics<1>(c, 5.0);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 64, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 2000, 100);
    const auto lags = c.get_list("experiment", "lags", {0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0});
    const auto frictions = c.get_list("experiment", "frictions", {cfg.friction(0, 0)});
    const std::size_t modes = c.get_count("experiment", "modes", 5, 2);
    const double threshold = c.get_double("experiment", "threshold", 0.05);
    c.check(modes <= static_cast<std::size_t>(cells), "experiment", "modes", "exceeds the number of cells");
    detail::with_model(c, [&](const auto& model) {
        std::vector<SemigroupDefectStudy> runs;
        for (std::size_t k = 0; k < frictions.size(); ++k) {
            cfg.friction = Mat<1>(frictions[k]);
            runs.push_back(semigroup_defect_study(model, cfg, cells, lags, n, modes, threshold, streams.derive(k),
                                                  threads));
            detail::add_warnings(m, runs.back().warnings);
        }
        out.write("semigroup_defect.csv", [&](std::ostream& os) {
            os << "friction,t,defect_spatial,noise_spatial,defect_smoluchowski,noise_smoluchowski\n";
            for (const auto& r : runs) {
                for (std::size_t k = 0; k < r.lags.size(); ++k) {
                    detail::CsvRow{os} << r.friction << r.lags[k] << r.spatial_defect[k] << r.spatial_noise[k]
                                       << r.smoluchowski_defect[k] << r.smoluchowski_noise[k];
                }
            }
        });
        out.write("semigroup_decay.csv", [&](std::ostream& os) {
            os << "friction,threshold,decay_lag\n";
            for (const auto& r : runs) {
                detail::CsvRow{os} << r.friction << r.threshold << r.decay_lag;
            }
        });
        m.result("norm", "w-weighted operator norm restricted to the top " + std::to_string(modes) +
                             " finite-volume generator eigenvectors");
    });
}

inline void cmd_overdamped_limit(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                                 RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 1.0, 2e-3);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 64, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 4000, 100);
    const auto eps = c.get_list("experiment", "epsilons", {0.2, 0.1, 0.05, 0.02, 0.01});
    const double lag = c.get_double("experiment", "lag", 0.05);
    c.check(lag > 0.0, "experiment", "lag", "must be positive");
    const double reference_dt = c.get_double("experiment", "reference_dt", 1e-4);
    c.check(reference_dt > 0.0, "experiment", "reference_dt", "must be positive");
    detail::with_model(c, [&](const auto& model) {
        const auto st = overdamped_study(model, cfg, cells, eps, lag, reference_dt, n, streams, threads);
        out.write("overdamped_limit.csv", [&](std::ostream& os) {
            os << "epsilon,distance,lambda_spatial,stderr_spatial,lambda_smoluchowski,stderr_smoluchowski,"
                  "relative_gap,noise_floor\n";
            for (std::size_t k = 0; k < st.epsilon.size(); ++k) {
                detail::CsvRow{os} << st.epsilon[k] << st.distance[k] << st.spatial_eigenvalue[k]
                                   << st.spatial_stderr[k] << st.smoluchowski_eigenvalue << st.smoluchowski_stderr
                                   << st.relative_gap[k] << st.noise_floor;
            }
        });
        m.result("noise_floor", st.noise_floor);
        const auto smallest = std::min_element(st.epsilon.begin(), st.epsilon.end()) - st.epsilon.begin();
        m.result("relative_gap_smallest_epsilon", st.relative_gap[static_cast<std::size_t>(smallest)]);
        detail::add_warnings(m, st.warnings);
    });
}

inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    std::vector<double> out;
    for (std::size_t k = 0; k < n; ++k) {
        const double f = n == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n - 1);
        out.push_back(lo * std::pow(hi / lo, f));
    }
    return out;
}

inline void cmd_lagscan(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                        RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 5.0, 1e-3);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 256, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 1000, 100);
    const auto eps = c.get_list("experiment", "epsilons", log_spaced(0.05, 0.5, 8));
    const double nu = c.get_double("experiment", "nu", 0.05);
    const double tol = c.get_double("experiment", "tolerance", 1e-3);
    const auto coarse = c.get_list("experiment", "coarse_lags",
                                   {0.02, 0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2, 0.25, 0.3, 0.4, 0.5, 0.65, 0.8, 1.0});
    c.check(nu > 0.0, "experiment", "nu", "must be positive");
    c.check(tol >= cfg.dt, "experiment", "tolerance", "must be at least dynamics.dt");
    detail::with_model(c, [&](const auto& model) {
        const auto st = lagscan_study(model, cfg, cells, eps, nu, coarse, tol, n, streams, threads);
        out.write("lagscan.csv", [&](std::ostream& os) {
            os << "epsilon,t_nu,capped,non_monotone\n";
            for (const auto& p : st.points) {
                detail::CsvRow{os} << p.epsilon << p.t_nu << p.capped << p.non_monotone;
            }
        });
        out.write("lagscan_curves.csv", [&](std::ostream& os) {
            os << "epsilon,t,distance,stage\n";
            for (const auto& p : st.points) {
                for (std::size_t k = 0; k < p.coarse_lags.size(); ++k) {
                    detail::CsvRow{os} << p.epsilon << p.coarse_lags[k] << p.coarse_distance[k]
                                       << std::string("coarse");
                }
                for (const auto& [t, d] : p.bisection) {
                    detail::CsvRow{os} << p.epsilon << t << d << std::string("bisection");
                }
            }
        });
        out.write("lagscan_fit.csv", [&](std::ostream& os) {
            os << "c1,c2,r2,monotone_decreasing,nu,tolerance,reference_c1,reference_c2\n";
            detail::CsvRow{os} << st.c1() << st.c2() << st.fit.r_squared << st.monotone_decreasing << st.nu
                               << st.tolerance << -1.04e-4 << 1.07e-1;
        });
        m.result("c1", st.c1());
        m.result("c2", st.c2());
        m.result("r2", st.fit.r_squared);
        m.result("bisection_tolerance", st.tolerance);
        detail::add_warnings(m, st.warnings);
    });
}

inline void cmd_pseudo_generator(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                                 RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 1.0, 1e-4);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 64, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 2000, 2);
    const auto order = static_cast<int>(c.get_int("experiment", "order", 2));
    c.check(order == 1 || order == 2, "experiment", "order", "must be 1 or 2");
    const auto frictions = c.get_list("experiment", "frictions", {1.0, 10.0});
    const auto lags = c.get_list("experiment", "lags", {0.01, 0.005, 0.0025});
    const auto modes = static_cast<int>(c.get_count("experiment", "max_mode", 1, 1));
    detail::with_model(c, [&](const auto& model) {
        const auto st = pseudo_generator_study(order, model, cfg, cells, frictions, lags, n, modes, streams, threads);
        out.write("pseudo_generator.csv", [&](std::ostream& os) {
            os << "friction,row,col,estimate,stderr,target\n";
            for (std::size_t k = 0; k < st.frictions.size(); ++k) {
                const auto& e = st.estimates[k];
                for (Eigen::Index i = 0; i < e.estimate.matrix.rows(); ++i) {
                    for (Eigen::Index j = 0; j < e.estimate.matrix.cols(); ++j) {
                        detail::CsvRow{os} << st.frictions[k] << static_cast<std::size_t>(i)
                                           << static_cast<std::size_t>(j) << e.estimate.matrix(i, j)
                                           << e.standard_error(i, j) << st.target(i, j);
                    }
                }
            }
        });
        out.write("pseudo_generator_lags.csv", [&](std::ostream& os) {
            os << "friction,t,frobenius_norm,stderr_norm\n";
            for (std::size_t k = 0; k < st.frictions.size(); ++k) {
                const auto& e = st.estimates[k];
                for (std::size_t l = 0; l < e.lags.size(); ++l) {
                    detail::CsvRow{os} << st.frictions[k] << e.lags[l] << e.per_lag[l].norm()
                                       << e.per_lag_error[l].norm();
                }
            }
        });
        m.result("lag_slope", st.lag_slope);
        m.result("max_distance", st.max_distance);
        m.result("pooled_stderr", st.pooled_error);
        if (order == 2) {
            m.result("max_relative_error", st.max_relative_error);
        }
        for (const auto& e : st.estimates) {
            detail::add_warnings(m, e.estimate.warnings);
        }
    });
}

inline void cmd_reconstruction(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                               RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 5.0, 2e-4);
    const auto fine = static_cast<int>(c.get_count("grid", "cells", 256, 8));
    const auto points = static_cast<int>(c.get_count("grid", "points", 64, 1));
    const std::size_t paths = c.get_count("grid", "samples_per_cell", 4000, 2);
    const auto lags = c.get_list("experiment", "lags", {0.02, 0.03, 0.05, 0.08, 0.12, 0.2});
    detail::with_model(c, [&](const auto& model) {
        const auto st = reconstruction_study(model, cfg, fine, points, lags, paths, streams, threads);
        out.write("reconstruction.csv", [&](std::ostream& os) {
            os << "t,taylor_error,exponential_error,noise_floor,taylor_corrected,exponential_corrected\n";
            const auto& e = st.errors;
            for (std::size_t l = 0; l < e.lags.size(); ++l) {
                detail::CsvRow{os} << e.lags[l] << e.taylor_error[l] << e.exponential_error[l] << e.noise[l]
                                   << e.taylor_corrected[l] << e.exponential_corrected[l];
            }
        });
        m.result("eigenvalue", st.eigenvalue);
        m.result("taylor_slope", st.taylor_slope);
        m.result("exponential_slope", st.exponential_slope);
    });
}

inline void cmd_metastability(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                              RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 5.0);
    const auto cells = static_cast<int>(c.get_count("grid", "cells", 64, 4));
    const std::size_t n = c.get_count("grid", "samples_per_cell", 2000, 100);
    const auto lags = c.get_list("experiment", "lags", {0.1, 0.2, 0.4});
    const std::size_t sets = c.get_count("experiment", "sets", 2, 2);
    detail::with_model(c, [&](const auto& model) {
        const auto st = metastability_study(model, cfg, cells, lags, sets, n, streams, threads);
        out.write("metastability.csv", [&](std::ostream& os) {
            os << "t,lower,diagonal_sum,upper,spectrum_floor\n";
            for (std::size_t k = 0; k < st.lags.size(); ++k) {
                detail::CsvRow{os} << st.lags[k] << st.bounds[k].lower << st.bounds[k].diagonal_sum
                                   << st.bounds[k].upper << st.bounds[k].spectrum_floor;
            }
        });
        detail::add_warnings(m, st.warnings);
    });
}

inline void cmd_reaction(const Config& c, const StreamFactory& streams, int threads, ArtifactWriter& out,
                         RunManifest& m) {
    const auto model = load_model_2d(c);
    const auto cfg = load_dynamics<2>(c, 1.0);
    const std::size_t samples = c.get_count("experiment", "samples", 400000, 10000);
    const auto bins = static_cast<int>(c.get_count("experiment", "bins", 64, 3));
    const auto full_q1 = static_cast<int>(c.get_count("grid", "cells", 64, 4));
    const auto full_q2 = static_cast<int>(c.get_count("grid", "cells_q2", 32, 4));
    c.reject_unused();
    const auto st = reaction_study(model, cfg, samples, bins, {full_q1, full_q2}, streams, threads);
    out.write("coefficients.csv", [&](std::ostream& os) { write_coefficients_csv(os, st.coefficients); });
    out.write("volatility.csv", [&](std::ostream& os) {
        os << "z,phi,sigma,y_drift,y_free_energy,identity_rhs,identity_stderr,exact_b\n";
        const auto& v = st.volatility;
        for (std::size_t i = 0; i < v.z.size(); ++i) {
            detail::CsvRow{os} << v.z[i] << v.phi[i] << v.sigma[i] << v.y_drift[i] << v.y_free_energy[i]
                               << v.z_drift_identity[i] << v.identity_error[i] << st.exact_b[i];
        }
    });
    m.result("projected_eigenvalue", st.projected_eigenvalue);
    m.result("full_eigenvalue", st.full_eigenvalue);
    m.result("fraction_a_within_2se", st.fraction_a_within);
    m.result("fraction_b_within_2se", st.fraction_b_within);
    m.result("fraction_identity_within_2se", st.fraction_identity_within);
    detail::add_warnings(m, st.warnings);
}

inline CoordinateTransform<1> load_transform_1d(const Config& c) {
    const std::string name = c.get_string("experiment", "transform", "periodic_shear");
    if (name == "identity") {
        return identity_transform<1>(periodic_interval());
    }
    c.check(name == "periodic_shear", "experiment", "transform", "unknown 1-D transform \"" + name + "\"");
    const double amp = c.get_double("experiment", "amplitude", 0.1);
    c.check(std::abs(amp) < 1.0 / kTwoPi, "experiment", "amplitude",
            "must satisfy |A| < 1/(2 pi) for the shear to be a diffeomorphism");
    return periodic_shear_transform(amp);
}

inline void cmd_geometry(const Config& c, const StreamFactory& streams, int /*threads*/, ArtifactWriter& out,
                         RunManifest& m) {
    const auto cfg = load_dynamics<1>(c, 1.0, 1e-4);
    const std::size_t steps = c.get_count("experiment", "steps", 10000000, 1000);
    const auto bins = static_cast<int>(c.get_count("experiment", "bins", 50, 2));
    const auto transform = load_transform_1d(c);
    detail::with_model(c, [&](const auto& model) {
        const auto st = geometry_study(model, cfg, transform, steps, bins, streams);
        out.write("invariant_density.csv", [&](std::ostream& os) {
            os << "u1,density,histogram\n";
            for (std::size_t b = 0; b < st.bin_centers.size(); ++b) {
                detail::CsvRow{os} << st.bin_centers[b] << st.density[b] << st.histogram[b];
            }
        });
        m.result("l1_error", st.l1_error);
        m.result("max_constant_friction_drift", st.max_constant_drift);
        m.result("mass_defect", st.mass_defect);
    });
}

using Command = std::function<void(const Config&, const StreamFactory&, int, ArtifactWriter&, RunManifest&)>;

inline const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> table{
        {"eigenfunctions", cmd_eigenfunctions},
        {"extrapolate", cmd_extrapolate},
        {"geometry", cmd_geometry},
        {"lagscan", cmd_lagscan},
        {"metastability", cmd_metastability},
        {"overdamped-limit", cmd_overdamped_limit},
        {"pseudo-generator", cmd_pseudo_generator},
        {"reaction", cmd_reaction},
        {"reconstruction", cmd_reconstruction},
        {"semigroup-defect", cmd_semigroup_defect},
    };
    return table;
}

/// Runs a command end to end: artifacts, then manifest.txt.
inline RunManifest run_command(const std::string& name, const Config& config, const RunOptions& opts) {
    const auto it = commands().find(name);
    if (it == commands().end()) {
        throw InvalidArgument("unknown command \"" + name + "\"");
    }
    require(opts.threads >= 1, "threads must be at least 1");
    const auto start = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = name;
    m.config_source = config.source();
    m.config_snapshot = config.snapshot();
    m.seed = opts.seed;
    m.threads = opts.threads;
    ArtifactWriter out(opts.out_dir, m);
    it->second(config, StreamFactory(opts.seed), opts.threads, out, m);
    config.reject_unused();
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.write_manifest();
    return m;
}

}  // namespace pseudogen
