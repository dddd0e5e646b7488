/*
 * Copyright (C) 2026 The phasemix authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "commands.hpp"

#include "phasemix/actionangle.hpp"
#include "phasemix/bounds.hpp"
#include "phasemix/coulomb.hpp"
#include "phasemix/csv.hpp"
#include "phasemix/errors.hpp"
#include "phasemix/observables.hpp"
#include "phasemix/parallel.hpp"
#include "phasemix/profiles.hpp"
#include "phasemix/transport.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

namespace phasemix::cli {

using nlohmann::json;

void Artifacts::write(const std::string& name, const std::string& content)
{
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / name, std::ios::binary | std::ios::trunc);
    os << content;
    os.close();
    if (!os) {
        throw ConfigError("phasemix::cli: cannot write '" + (dir / name).string() + "'");
    }
    files.push_back(name);
}

namespace {

std::string dump(const json& j)
{
    return j.dump(2) + "\n";
}

ScalarField test_function(const ExperimentConfig& cfg, const Model& m)
{
    return cfg.phi ? build_field(*cfg.phi, m.freq.domain, true) : default_phi(m.freq.domain);
}

json fit_json(const EnvelopeFit& fit, double window)
{
    return json{{"slope", fit.slope}, {"stderr", fit.std_error}, {"points", fit.points}, {"window", window}};
}

DeviationSeries run_deviation(const ExperimentConfig& cfg, const Model& m, const ScalarField& phi, Artifacts& out)
{
    DeviationOptions opts;
    opts.expectation = cfg.quadrature;
    const auto series = deviation_series(m, phi, cfg.times, opts);
    std::ostringstream os;
    write_csv(os, series);
    out.write("deviation.csv", os.str());
    return series;
}

std::vector<MixingBound> run_bound(const ExperimentConfig& cfg, const Model& m, const ScalarField& phi,
                                   Artifacts& out)
{
    std::vector<MixingBound> bounds;
    if (m.freq.degeneracy == Degeneracy::isolated) {
        bounds.resize(cfg.times.size());
        parallel_for(cfg.times.size(), [&](std::size_t i) { bounds[i] = localized_bound(m, phi, cfg.times[i]); });
    } else if (m.freq.dim() == 1) {
        bounds.push_back(bound_1d(m, phi));
    } else {
        bounds.push_back(bound_multid(m, phi));
    }
    std::ostringstream os;
    write_csv(os, bounds);
    out.write("bound.csv", os.str());
    return bounds;
}

void cmd_deviation(const ExperimentConfig& cfg, Artifacts& out)
{
    const Model m = build_model(cfg);
    const auto series = run_deviation(cfg, m, test_function(cfg, m), out);
    json fit = fit_json(fit_envelope_exponent(series, cfg.window), cfg.window);
    fit["limit"] = series.limit;
    fit["model"] = m.label;
    out.write("fit.json", dump(fit));
}

void cmd_bound(const ExperimentConfig& cfg, Artifacts& out)
{
    const Model m = build_model(cfg);
    run_bound(cfg, m, test_function(cfg, m), out);
}

void cmd_rate(const ExperimentConfig& cfg, Artifacts& out)
{
    const Model m = build_model(cfg);
    const ScalarField phi = test_function(cfg, m);
    const auto series = run_deviation(cfg, m, phi, out);
    const auto bounds = run_bound(cfg, m, phi, out);
    int violations = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double t = series.times[i];
        double lhs = 0.0;
        double rhs = 0.0;
        if (bounds.size() == 1) {
            lhs = t * series.values[i];
            rhs = bounds[0].constant + t * series.errors[i];
        } else {
            lhs = series.values[i];
            rhs = bounds[i].constant + series.errors[i];
        }
        violations += lhs > rhs;
        worst = std::max(worst, lhs / rhs);
    }
    json r;
    r["fit"] = fit_json(fit_envelope_exponent(series, cfg.window), cfg.window);
    r["bound_kind"] = to_string(bounds.front().kind);
    if (bounds.size() == 1) {
        r["constant"] = bounds[0].constant;
    } else {
        std::vector<double> b;
        for (const auto& x : bounds) {
            b.push_back(x.constant);
        }
        r["bound_fit"] = fit_json(fit_envelope_exponent(cfg.times, b, cfg.window), cfg.window);
    }
    r["violations"] = violations;
    r["max_ratio"] = worst;
    r["model"] = m.label;
    out.write("rate.json", dump(r));
}

WellSpec well_or_default(const ExperimentConfig& cfg)
{
    if (cfg.model.well) {
        return *cfg.model.well;
    }
    if (cfg.model.name != "quartic_osc_1st_order" || !cfg.model.params.empty()) {
        throw ConfigError("phasemix::cli: '" + to_string(cfg.command) + "' needs model.well");
    }
    WellSpec w;
    w.coefficients = {0.0, 0.0, 0.5, 0.0, 0.3};
    w.h_min = 0.01;
    w.h_max = 5.0;
    w.x_lo = -(2.0 * std::sqrt(10.0) + 1.0);
    w.x_hi = -w.x_lo;
    return w;
}

void cmd_actionangle(const ExperimentConfig& cfg, Artifacts& out)
{
    const ActionAngleChart chart = build_well_chart(well_or_default(cfg));
    std::ostringstream os;
    write_csv(os, chart);
    out.write("chart.csv", os.str());
    const auto nd = check_nondegeneracy(chart.omega, 257);
    json j;
    j["h_range"] = {chart.h.front(), chart.h.back()};
    j["I_range"] = {chart.I.front(), chart.I.back()};
    j["T_range"] = {*std::min_element(chart.T.begin(), chart.T.end()), *std::max_element(chart.T.begin(), chart.T.end())};
    j["table_points"] = chart.n_table_points;
    j["x_min"] = chart.well.x_min;
    j["v_min"] = chart.well.v_min;
    j["nondegeneracy"] = {{"min_abs_det", nd.min_abs_det}, {"argmin", nd.argmin[0]}, {"degenerate", nd.degenerate}};
    out.write("chart.json", dump(j));
}

void cmd_coulomb(const ExperimentConfig& cfg, Artifacts& out)
{
    auto chart = std::make_shared<const ActionAngleChart>(build_well_chart(well_or_default(cfg)));
    const auto& d = cfg.coulomb.density;
    const auto dens = gaussian_density(chart, d.x, d.p, d.sigma, d.radius);
    CoulombOptions opts;
    opts.modes = cfg.coulomb.modes;
    opts.amplitude_tol = cfg.coulomb.amplitude_tol;
    opts.tail_tol = cfg.coulomb.tail_tol;
    const auto s = coulomb_deviation(dens, chart->omega, cfg.times, cfg.coulomb.x0, opts);
    std::ostringstream os;
    write_csv(os, s);
    out.write("coulomb.csv", os.str());
    json fit = fit_json(fit_envelope_exponent(s.series, cfg.window), cfg.window);
    for (std::size_t j = 0; j < s.x0.size(); ++j) {
        if (s.x0[j] == 0.0) {
            double worst = 0.0;
            for (const auto& row : s.per_x0) {
                worst = std::max(worst, std::abs(row[j]));
            }
            fit["max_abs_dev_at_origin"] = worst;
        }
    }
    out.write("fit.json", dump(fit));
}

// ---------------------------------------------------------------------------
// snapshot

struct SnapshotChart {
    FrequencyMap freq;
    std::function<PhasePoint(double, double)> to_xp;
    // returns false outside the chart
    std::function<bool(double, double, AnglePoint&)> from_xp;
};

SnapshotChart snapshot_chart(const ExperimentConfig& cfg)
{
    SnapshotChart c;
    if (cfg.model.well) {
        auto chart = std::make_shared<const ActionAngleChart>(build_well_chart(*cfg.model.well));
        c.freq = chart->omega;
        c.to_xp = [chart](double q, double k) { return to_physical(*chart, q, k); };
        c.from_xp = [chart](double x, double p, AnglePoint& a) {
            const double h = hamiltonian(chart->well, x, p);
            if (!(h >= chart->h.front() && h <= chart->h.back())) {
                return false;
            }
            try {
                a = from_physical(*chart, x, p);
            } catch (const DomainError&) {
                return false;
            }
            return true;
        };
        return c;
    }
    const Model m = build_model(cfg);
    if (m.freq.dim() != 1) {
        throw ConfigError("phasemix::emit_snapshot: the model must be one-dimensional");
    }
    c.freq = m.freq;
    // harmonic chart, q = 0 at the left turning point
    c.to_xp = [](double q, double k) {
        const double r = std::sqrt(2.0 * k);
        return PhasePoint{-r * std::cos(q), r * std::sin(q)};
    };
    const DomainBox dom = m.freq.domain;
    c.from_xp = [dom](double x, double p, AnglePoint& a) {
        const double I = 0.5 * (x * x + p * p);
        if (!dom.contains(vec1(I)) || I == 0.0) {
            return false;
        }
        a = AnglePoint{wrap_angle(std::atan2(p, -x)), I};
        return true;
    };
    return c;
}

void cmd_snapshot(const ExperimentConfig& cfg, Artifacts& out)
{
    const auto& sp = cfg.snapshot;
    const SnapshotChart chart = snapshot_chart(cfg);
    const auto& d = sp.density;
    const auto F0 = [&d](double x, double p) {
        const double r2 = (x - d.x) * (x - d.x) + (p - d.p) * (p - d.p);
        const double r = std::sqrt(r2);
        if (r >= d.radius) {
            return 0.0;
        }
        return std::exp(-0.5 * r2 / (d.sigma * d.sigma)) * profiles::cutoff(r / d.radius);
    };
    std::vector<double> xs(std::size_t(sp.nx));
    std::vector<double> ps(std::size_t(sp.np));
    for (int i = 0; i < sp.nx; ++i) {
        xs[std::size_t(i)] = sp.x_min + (sp.x_max - sp.x_min) * double(i) / double(sp.nx - 1);
    }
    for (int i = 0; i < sp.np; ++i) {
        ps[std::size_t(i)] = sp.p_min + (sp.p_max - sp.p_min) * double(i) / double(sp.np - 1);
    }
    json counts = json::array();
    for (double t : sp.times) {
        std::vector<double> grid(xs.size() * ps.size(), 0.0);
        std::vector<int> outside(ps.size(), 0);
        parallel_for(ps.size(), [&](std::size_t r) {
            for (std::size_t c = 0; c < xs.size(); ++c) {
                AnglePoint a;
                if (!chart.from_xp(xs[c], ps[r], a)) {
                    ++outside[r];
                    continue;
                }
                const double w = chart.freq.omega(vec1(a.k))[0];
                const PhasePoint z = chart.to_xp(wrap_angle(a.q - w * t), a.k);
                grid[r * xs.size() + c] = F0(z.x, z.p);
            }
        });
        std::ostringstream os;
        std::vector<std::string> row{"p"};
        for (double x : xs) {
            row.push_back(format_double(x));
        }
        write_csv_row(os, row);
        for (std::size_t r = 0; r < ps.size(); ++r) {
            row.assign(1, format_double(ps[r]));
            for (std::size_t c = 0; c < xs.size(); ++c) {
                row.push_back(format_double(grid[r * xs.size() + c]));
            }
            write_csv_row(os, row);
        }
        const std::string name = "snapshot_" + format_double(t) + ".csv";
        out.write(name, os.str());
        int total = 0;
        for (int n : outside) {
            total += n;
        }
        counts.push_back({{"file", name}, {"t", t}, {"out_of_chart", total}});
    }
    out.summary["snapshot"] = counts;
}

// ---------------------------------------------------------------------------
// verify

class Checks {
public:
    void add(const std::string& name, double value, double tol)
    {
        const bool ok = std::isfinite(value) && value <= tol;
        failed_ = failed_ || !ok;
        list_.push_back({{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", ok}});
    }
    void error(const std::string& name, const std::exception& e)
    {
        failed_ = true;
        list_.push_back({{"name", name}, {"error", e.what()}, {"pass", false}});
    }
    bool failed() const { return failed_; }
    const json& list() const { return list_; }

private:
    json list_ = json::array();
    bool failed_ = false;
};

template <typename F>
void guarded(Checks& c, const std::string& name, F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        c.error(name, e);
    }
}

void cmd_verify(const ExperimentConfig& cfg, Artifacts& out)
{
    Checks checks;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::uint64_t s1 = rng();
    const std::uint64_t s2 = rng();

    for (const auto& name : builtin_model_names()) {
        guarded(checks, "fields:" + name, [&] {
            const Model m = make_builtin_model(name);
            checks.add("jacobian_fd:" + name, jacobian_fd_error(m.freq, 50, s1), 1e-6);
            checks.add("gradient_fd_f0:" + name, gradient_fd_error(m.f0, 50, s2), 1e-6);
            checks.add("gradient_fd_phi:" + name, gradient_fd_error(default_phi(m.freq.domain), 50, s2), 1e-6);
        });
    }

    guarded(checks, "transport", [&] {
        const Model m = make_builtin_model("quartic_osc_1st_order");
        double rev = 0.0;
        for (int i = 0; i < 200; ++i) {
            const Vec q = vec1(two_pi * unit(rng));
            const Vec k = vec1(m.freq.domain.lo[0] + unit(rng) * (m.freq.domain.width()[0]));
            const double t = 1000.0 * unit(rng);
            const Vec back = advance_angles(m.freq, advance_angles(m.freq, q, k, t), k, -t);
            double d = std::abs(back[0] - q[0]);
            rev = std::max(rev, std::min(d, two_pi - d));
        }
        checks.add("time_reversal", rev, 1e-10);
        const auto one = [](const Vec&) { return 1.0; };
        for (int n : {0, 1}) {
            const double ref = conserved_integral(m, one, n, 0.0);
            double drift = 0.0;
            for (double t : {1.0, 10.0, 100.0, 1000.0}) {
                drift = std::max(drift, std::abs(conserved_integral(m, one, n, t) - ref) / ref);
            }
            checks.add("conservation_n" + std::to_string(n), drift, 1e-6);
        }
    });

    guarded(checks, "fourier", [&] {
        const Model m = make_builtin_model("quartic_osc_1st_order");
        const ScalarField phi = default_phi(m.freq.domain);
        const DomainBox in = phi.support;
        double worst = 0.0;
        for (int i = 0; i < 5; ++i) {
            const Vec k = vec1(in.lo[0] + unit(rng) * in.width()[0]);
            const auto s = fourier_coefficients(phi, k, 16, 256);
            double parseval = 0.0;
            for (const auto& c : s.coeffs) {
                parseval += std::norm(c);
            }
            double direct = 0.0;
            for (int j = 0; j < 512; ++j) {
                const double v = phi.value(vec1(two_pi * j / 512.0), k);
                direct += v * v / 512.0;
            }
            worst = std::max(worst, std::abs(parseval - direct));
        }
        checks.add("parseval", worst, 1e-8);
    });

    for (const auto& name : builtin_model_names()) {
        guarded(checks, "cross_validation:" + name, [&] {
            const Model m = make_builtin_model(name);
            const ScalarField phi = default_phi(m.freq.domain);
            double worst = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double t = 200.0 * unit(rng);
                const auto a = expectation_spectral(m, phi, t, cfg.quadrature);
                const auto b = expectation_direct(m, phi, t, cfg.quadrature);
                worst = std::max(worst, std::abs(a.value - b.value) / (a.err + b.err));
            }
            checks.add("cross_validation:" + name, worst, 1.0);
        });
    }

    guarded(checks, "actionangle", [&] {
        checks.add("harmonic_period", std::abs(period(harmonic_well(), 1.0) - two_pi), 1e-10);
        const auto chart = build_chart(quartic_well(0.3, 0.01, 5.0), 256);
        double rt = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double q = two_pi * unit(rng);
            const double k = chart.I.front() + unit(rng) * (chart.I.back() - chart.I.front());
            const auto z = to_physical(chart, q, k);
            const auto a = from_physical(chart, z.x, z.p);
            double dq = std::abs(a.q - q);
            dq = std::min(dq, two_pi - dq);
            rt = std::max({rt, dq, std::abs(a.k - k)});
        }
        checks.add("chart_roundtrip", rt, 1e-6);
    });

    guarded(checks, "kernel", [&] {
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const double x0 = 4.0 * unit(rng) - 2.0;
            const double h = 1e-3;
            const double jump = (kernel_value_1d(x0, x0) - kernel_value_1d(x0, x0 - h)) / h -
                                (kernel_value_1d(x0, x0 + h) - kernel_value_1d(x0, x0)) / h;
            worst = std::max({worst, std::abs(kernel_value_1d(x0, 0.0)), std::abs(jump - 1.0)});
        }
        checks.add("kernel_1d", worst, 1e-9);
    });

    json j{{"seed", cfg.seed}, {"checks", checks.list()}, {"passed", !checks.failed()}};
    out.write("verify.json", dump(j));
    out.invariant_failed = checks.failed();
}

} // namespace

void run_command(const ExperimentConfig& cfg, Artifacts& out)
{
    switch (cfg.command) {
    case Command::snapshot:
        cmd_snapshot(cfg, out);
        break;
    case Command::deviation:
        cmd_deviation(cfg, out);
        break;
    case Command::bound:
        cmd_bound(cfg, out);
        break;
    case Command::rate:
        cmd_rate(cfg, out);
        break;
    case Command::actionangle:
        cmd_actionangle(cfg, out);
        break;
    case Command::coulomb:
        cmd_coulomb(cfg, out);
        break;
    case Command::verify:
        cmd_verify(cfg, out);
        break;
    }
}

} // namespace phasemix::cli
