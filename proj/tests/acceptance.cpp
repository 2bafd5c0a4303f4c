// Acceptance driver: `acceptance ACn --cli <pseudogen> --work <dir> --configs <dir>`.
// Prints one [PASS]/[FAIL] line for the criterion and exits non-zero on failure.

#include <pseudogen/commands.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace pseudogen;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
        }
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [violated]");
    }
};

std::string num(double x) { return format_double(x); }

struct Paths {
    fs::path cli;
    fs::path work;
    fs::path configs;
};

using Results = std::map<std::string, std::string>;

// Runs the CLI and returns the `result:` lines of its manifest.
Results run_cli(const Paths& p, const std::string& command, const fs::path& config, const fs::path& out,
                int threads = 1, std::uint64_t seed = 1) {
    fs::remove_all(out);
    const std::string line = p.cli.string() + " " + command + " --config " + config.string() + " --out " +
                             out.string() + " --seed " + std::to_string(seed) + " --threads " +
                             std::to_string(threads) + " > " + (out.string() + ".log") + " 2>&1";
    if (std::system(line.c_str()) != 0) {
        throw Error(command + " failed, see " + out.string() + ".log");
    }
    Results r;
    std::ifstream in(out / "manifest.txt");
    for (std::string s; std::getline(in, s);) {
        if (s.rfind("result: ", 0) == 0) {
            const auto eq = s.find(" = ");
            r[s.substr(8, eq - 8)] = s.substr(eq + 3);
        } else if (s.rfind("file: ", 0) == 0) {
            const auto sp = s.find(" sha256=");
            r["sha256:" + s.substr(6, sp - 6)] = s.substr(sp + 8);
        }
    }
    return r;
}

double number(const Results& r, const std::string& key) {
    const auto it = r.find(key);
    if (it == r.end()) {
        throw Error("manifest has no result " + key);
    }
    return std::stod(it->second);
}

// CSV with a header row, columns by name.
struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static Csv read(const fs::path& path) {
        std::ifstream in(path);
        if (!in) {
            throw Error("cannot read " + path.string());
        }
        Csv c;
        std::string line;
        std::getline(in, line);
        c.header = split(line);
        while (std::getline(in, line)) {
            if (!line.empty()) {
                c.rows.push_back(split(line));
            }
        }
        return c;
    }

    [[nodiscard]] std::vector<double> column(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error("missing CSV column " + name);
        }
        const auto k = static_cast<std::size_t>(it - header.begin());
        std::vector<double> out;
        for (const auto& r : rows) {
            out.push_back(std::stod(r.at(k)));
        }
        return out;
    }

private:
    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        for (std::string item; std::getline(ss, item, ',');) {
            out.push_back(item);
        }
        return out;
    }
};

Verdict ac1(const Paths&) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    const PeriodicDoubleWell dw;
    const auto grid = UlamGrid<1>::with_boltzmann(dw, 1.0, {256});
    const auto cfg = SimConfig<1>::isotropic(1.0, 5.0, 1.0, 1e-3);
    const std::vector<double> lags{0.05, 0.2};
    double stochastic = 0.0;
    for (const auto& op : build_spatial_transfer(grid, lags, cfg, dw, 200, StreamFactory(1))) {
        stochastic = std::max(stochastic, row_sum_defect(op.matrix, 1.0));
    }
    for (const auto& op : build_smoluchowski_transfer(grid, lags, cfg, dw, 200, StreamFactory(2))) {
        stochastic = std::max(stochastic, row_sum_defect(op.matrix, 1.0));
    }
    const OperatorMatrix g2 = build_g2_matrix(grid, 1.0);
    for (double t : lags) {
        stochastic = std::max(stochastic, row_sum_defect(exponential_operator(g2, t).matrix, 1.0));
    }
    const double scale = g2.matrix.diagonal().cwiseAbs().maxCoeff();
    const double generator = row_sum_defect(g2.matrix, 0.0) / scale;
    const double adjoint = self_adjointness_defect(g2.matrix, g2.weights);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.expect(stochastic < 1e-12, "max |row sum - 1| = " + num(stochastic));
    v.expect(generator < 1e-12, "max |G2 row sum| / max |G2_ii| = " + num(generator));
    v.expect(adjoint < 1e-12, "G2 self-adjointness defect = " + num(adjoint));
    v.expect(seconds < 60.0, "runtime " + num(seconds) + " s");
    return v;
}

// Largest principal-angle sine between the w-spans of two column sets.
double subspace_sine(const Matrix& a, const Matrix& b, const Vector& w) {
    const Vector sw = w.array().sqrt();
    const Eigen::HouseholderQR<Matrix> qa(sw.asDiagonal() * a);
    const Eigen::HouseholderQR<Matrix> qb(sw.asDiagonal() * b);
    const Matrix ua = qa.householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix ub = qb.householderQ() * Matrix::Identity(b.rows(), b.cols());
    const Matrix residual = ub - ua * (ua.transpose() * ub);
    return Eigen::JacobiSVD<Matrix>(residual).singularValues()(0);
}

Verdict ac2(const Paths&) {
    Verdict v;
    const PeriodicDoubleWell dw;
    const auto grid = UlamGrid<1>::with_boltzmann(dw, 1.0, {256});
    const OperatorMatrix g2 = build_g2_matrix(grid, 1.0);
    const SpectrumResult gen = compute_spectrum(g2, 5);
    double value_error = 0.0;
    double angle = 0.0;
    for (double t : {0.01, 0.02}) {
        // exponential_operator(G, s) = exp((s²/2) G).
        const OperatorMatrix e = exponential_operator(g2, std::sqrt(2.0 * t));
        const SpectrumResult spec = compute_spectrum(e, 5);
        for (std::size_t k = 0; k < 5; ++k) {
            value_error = std::max(value_error, std::abs(spec.real(k) - std::exp(t * gen.real(k))));
        }
        angle = std::max(angle, std::asin(std::min(1.0, subspace_sine(spec.vectors, gen.vectors, grid.weights()))));
    }
    v.expect(value_error < 1e-10, "max |lambda(exp tG2) - exp(t mu)| = " + num(value_error));
    v.expect(angle < 1e-8, "top-5 subspace angle = " + num(angle));
    return v;
}

Verdict ac3(const Paths& p) {
    Verdict v;
    const auto g1 = run_cli(p, "pseudo-generator", p.configs / "pseudo_generator_g1.cfg", p.work / "ac3_g1");
    const auto g2 = run_cli(p, "pseudo-generator", p.configs / "pseudo_generator_g2.cfg", p.work / "ac3_g2");
    const double slope = number(g1, "lag_slope");
    v.expect(slope >= 0.8, "G1 norm log-log slope = " + num(slope) + " (need >= 0.8)");
    const double d = number(g2, "max_distance");
    const double se = number(g2, "pooled_stderr");
    v.expect(d < 3.0 * se, "||G2(1) - G2(10)||_F = " + num(d) + " vs 3 x pooled SE = " + num(3.0 * se));
    return v;
}

Verdict ac4(const Paths& p) {
    Verdict v;
    const auto r = run_cli(p, "reconstruction", p.configs / "reconstruction.cfg", p.work / "ac4");
    const double taylor = number(r, "taylor_slope");
    const double expo = number(r, "exponential_slope");
    v.expect(taylor >= 2.7, "R^t error slope = " + num(taylor));
    v.expect(expo >= 2.7, "E^t error slope = " + num(expo));
    return v;
}

Verdict ac5(const Paths& p) {
    Verdict v;
    const auto r = run_cli(p, "extrapolate", p.configs / "extrapolate.cfg", p.work / "ac5");
    const double gap_r = number(r, "gap_S_R");
    const double gap_e = number(r, "gap_S_E");
    v.expect(std::abs(gap_r - 0.15) <= 0.05, "|lambda(S) - lambda(R)| = " + num(gap_r) + " (0.15 +- 0.05)");
    v.expect(std::abs(gap_e - 0.12) <= 0.05, "|lambda(S) - lambda(E)| = " + num(gap_e) + " (0.12 +- 0.05)");
    const Csv csv = Csv::read(p.work / "ac5" / "extrapolation.csv");
    const auto n = csv.column("n");
    bool complete = n.size() == 10;
    for (std::size_t k = 0; complete && k < n.size(); ++k) {
        complete = n[k] == static_cast<double>(k + 1);
    }
    v.expect(complete, "sequences for n = 1..10");
    return v;
}

Verdict ac6(const Paths& p) {
    Verdict v;
    run_cli(p, "lagscan", p.configs / "lagscan.cfg", p.work / "ac6");
    const Csv fit = Csv::read(p.work / "ac6" / "lagscan_fit.csv");
    const double c1 = fit.column("c1").at(0);
    const double c2 = fit.column("c2").at(0);
    const double r2 = fit.column("r2").at(0);
    v.expect(fit.column("monotone_decreasing").at(0) == 1.0, "t_nu monotone decreasing in epsilon");
    v.expect(r2 >= 0.95, "R^2 = " + num(r2));
    v.expect(c1 < 0.0, "c1 = " + num(c1));
    v.detail << "; c2 = " << num(c2) << " (reported only; reference c1 = -1.04e-4, c2 = 1.07e-1)";
    return v;
}

Verdict ac7(const Paths& p) {
    Verdict v;
    run_cli(p, "metastability", p.configs / "metastability.cfg", p.work / "ac7");
    const Csv csv = Csv::read(p.work / "ac7" / "metastability.csv");
    const auto t = csv.column("t");
    const auto lower = csv.column("lower");
    const auto diag = csv.column("diagonal_sum");
    const auto upper = csv.column("upper");
    v.expect(t == std::vector<double>{0.1, 0.2, 0.4}, "lags 0.1, 0.2, 0.4");
    for (std::size_t k = 0; k < t.size(); ++k) {
        v.expect(lower[k] <= diag[k] && diag[k] <= upper[k] + 0.02,
                 "t = " + num(t[k]) + ": " + num(lower[k]) + " <= " + num(diag[k]) + " <= " + num(upper[k]) +
                     " + 0.02");
    }
    return v;
}

Verdict ac8(const Paths& p) {
    Verdict v;
    const auto r = run_cli(p, "geometry", p.configs / "geometry.cfg", p.work / "ac8");
    const double drift = number(r, "max_constant_friction_drift");
    const double l1 = number(r, "l1_error");
    const double mass = number(r, "mass_defect");
    v.expect(drift == 0.0, "g for constant friction = " + num(drift));
    v.expect(l1 < 0.05, "histogram L1 error = " + num(l1));
    v.expect(mass <= 1e-12, "mass dependence = " + num(mass));
    return v;
}

Verdict ac9(const Paths& p) {
    Verdict v;
    const auto r = run_cli(p, "reaction", p.configs / "reaction.cfg", p.work / "ac9");
    const double fa = number(r, "fraction_a_within_2se");
    const double fb = number(r, "fraction_b_within_2se");
    const double fi = number(r, "fraction_identity_within_2se");
    const double projected = number(r, "projected_eigenvalue");
    const double full = number(r, "full_eigenvalue");
    const double gap = std::abs(projected - full) / std::abs(full);
    // Two standard errors cover about 95% of bins; require 90% coverage.
    v.expect(fa == 1.0, "fraction of bins with a within 2 SE = " + num(fa));
    v.expect(fb >= 0.9, "fraction of bins with b within 2 SE = " + num(fb));
    v.expect(fi >= 0.9, "fraction of bins satisfying the drift identity = " + num(fi));
    v.expect(gap < 0.05, "projected " + num(projected) + " vs full " + num(full) + ", relative gap " + num(gap));
    return v;
}

const std::map<std::string, std::string> kTinyConfigs{
    {"eigenfunctions", "[grid]\ncells = 16\nsamples_per_cell = 100\n"},
    {"extrapolate", "[grid]\ncells = 16\nsamples_per_cell = 100\n[experiment]\nn_max = 3\n"},
    {"semigroup-defect", "[grid]\ncells = 16\nsamples_per_cell = 100\n[experiment]\nlags = [0.05, 0.1]\n"},
    {"overdamped-limit",
     "[grid]\ncells = 16\nsamples_per_cell = 100\n[experiment]\nepsilons = [0.2, 0.1]\nreference_dt = 1e-3\n"},
    {"lagscan",
     "[grid]\ncells = 8\nsamples_per_cell = 100\n[experiment]\nepsilons = [0.5, 1.0]\n"
     "coarse_lags = [0.05, 0.1]\nnu = 0.2\ntolerance = 0.01\n"},
    {"pseudo-generator", "[dynamics]\ndt = 1e-3\n[grid]\ncells = 16\nsamples_per_cell = 20\n"
                         "[experiment]\nlags = [0.02, 0.01]\n"},
    {"reconstruction", "[grid]\ncells = 32\npoints = 4\nsamples_per_cell = 50\n[experiment]\nlags = [0.02, 0.04]\n"},
    {"metastability", "[grid]\ncells = 16\nsamples_per_cell = 100\n"},
    {"geometry", "[experiment]\nsteps = 20000\nbins = 10\n"},
    {"reaction", "[grid]\ncells = 8\ncells_q2 = 8\n[experiment]\nsamples = 20000\nbins = 8\n"},
};

Verdict ac10(const Paths& p) {
    Verdict v;
    for (const auto& [command, text] : kTinyConfigs) {
        const fs::path cfg = p.work / ("ac10_" + command + ".cfg");
        std::ofstream(cfg) << text;
        const auto a = run_cli(p, command, cfg, p.work / ("ac10_" + command + "_a"), 1, 7);
        const auto b = run_cli(p, command, cfg, p.work / ("ac10_" + command + "_b"), 1, 7);
        const auto c = run_cli(p, command, cfg, p.work / ("ac10_" + command + "_c"), 3, 7);
        std::size_t files = 0;
        bool same = true;
        for (const auto& [key, hash] : a) {
            if (key.rfind("sha256:", 0) == 0) {
                ++files;
                same = same && b.count(key) && c.count(key) && b.at(key) == hash && c.at(key) == hash;
            }
        }
        v.expect(same && files > 0, command + ": " + std::to_string(files) + " files identical at 1, 1, 3 threads");
    }
    return v;
}

const std::map<std::string, std::pair<std::string, Verdict (*)(const Paths&)>> kCriteria{
    {"AC1", {"operator sanity", ac1}},
    {"AC2", {"spectral mapping", ac2}},
    {"AC3", {"pseudo-generator orders", ac3}},
    {"AC4", {"reconstruction order", ac4}},
    {"AC5", {"extrapolation anchors", ac5}},
    {"AC6", {"lag scan shape", ac6}},
    {"AC7", {"metastability bracket", ac7}},
    {"AC8", {"generalized coordinates", ac8}},
    {"AC9", {"reaction coordinate", ac9}},
    {"AC10", {"reproducibility", ac10}},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pseudogen acceptance criteria"};
    std::string id;
    Paths paths;
    app.add_option("criterion", id, "AC1 .. AC10")->required();
    app.add_option("--cli", paths.cli, "pseudogen executable")->required();
    app.add_option("--work", paths.work, "scratch directory")->required();
    app.add_option("--configs", paths.configs, "directory with the shipped configs")->required();
    CLI11_PARSE(app, argc, argv);

    const auto it = kCriteria.find(id);
    if (it == kCriteria.end()) {
        std::cerr << "unknown criterion " << id << '\n';
        return 2;
    }
    fs::create_directories(paths.work);
    const auto& [title, check] = it->second;
    const auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        Verdict v = check(paths);
        pass = v.pass;
        detail = v.detail.str();
    } catch (const std::exception& e) {
        detail = std::string("error: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ' ' << title << ": " << detail << " (" << num(seconds)
              << " s)\n";
    return pass ? 0 : 1;
}
