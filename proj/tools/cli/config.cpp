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
#include "config.hpp"

#include "phasemix/errors.hpp"

#include <cmath>
#include <set>

namespace phasemix::cli {

using nlohmann::json;

namespace {

// Reads one JSON object and rejects keys nobody asked for.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            fail("must be an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key, double fallback)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_number()) {
            fail_key(key, "must be a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail_key(key, "must be finite");
        }
        return x;
    }

    double positive(const std::string& key, double fallback)
    {
        const double x = number(key, fallback);
        if (!(x > 0)) {
            fail_key(key, "must be positive");
        }
        return x;
    }

    long long integer(const std::string& key, long long fallback)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        const json& v = j_.at(key);
        if (!v.is_number_integer()) {
            fail_key(key, "must be an integer");
        }
        return v.get<long long>();
    }

    std::string text(const std::string& key, const std::string& fallback)
    {
        used_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        if (!j_.at(key).is_string()) {
            fail_key(key, "must be a string");
        }
        return j_.at(key).get<std::string>();
    }

    const json* child(const std::string& key)
    {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void done() const
    {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) {
                throw ConfigError("phasemix::config: unknown key '" + at(item.key()) + "'");
            }
        }
    }

    [[noreturn]] void fail_key(const std::string& key, const std::string& what) const
    {
        throw ConfigError("phasemix::config: '" + at(key) + "' " + what);
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigError("phasemix::config: '" + (path_.empty() ? std::string("<root>") : path_) + "' " + what);
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

std::vector<double> number_array(const json& j, const std::string& path)
{
    if (!j.is_array()) {
        throw ConfigError("phasemix::config: '" + path + "' must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            throw ConfigError("phasemix::config: '" + path + "' must contain finite numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<double> parse_times(const json& j, const std::string& path, bool allow_zero)
{
    std::vector<double> t;
    if (j.is_array()) {
        t = number_array(j, path);
        if (t.empty()) {
            throw ConfigError("phasemix::config: '" + path + "' is empty");
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (allow_zero ? !(t[i] >= 0) : !(t[i] > 0)) {
                throw ConfigError("phasemix::config: '" + path + "' entries must be " +
                                  (allow_zero ? "nonnegative" : "positive"));
            }
            if (i > 0 && !(t[i] > t[i - 1])) {
                throw ConfigError("phasemix::config: '" + path + "' must be strictly increasing");
            }
        }
        return t;
    }
    Reader r(j, path);
    const double lo = r.number("t_min", 10.0);
    const double hi = r.number("t_max", 1000.0);
    const long long count = r.integer("count", 0);
    r.done();
    if (!(lo > 0)) {
        r.fail_key("t_min", "must be positive");
    }
    if (!(hi > lo)) {
        r.fail_key("t_max", "must exceed t_min");
    }
    if (count < 0 || count == 1 || count > 1000000) {
        r.fail_key("count", "must be 0 (default density) or between 2 and 1e6");
    }
    return time_grid(lo, hi, int(count));
}

std::vector<double> parse_grid(const json& j, const std::string& path)
{
    if (j.is_array()) {
        auto v = number_array(j, path);
        if (v.empty()) {
            throw ConfigError("phasemix::config: '" + path + "' is empty");
        }
        return v;
    }
    Reader r(j, path);
    const double lo = r.number("min", -2.0);
    const double hi = r.number("max", 2.0);
    const long long n = r.integer("count", 21);
    r.done();
    if (!(hi > lo)) {
        r.fail_key("max", "must exceed min");
    }
    if (n < 2 || n > 100000) {
        r.fail_key("count", "must lie in [2, 1e5]");
    }
    std::vector<double> out;
    for (long long i = 0; i < n; ++i) {
        out.push_back(lo + (hi - lo) * double(i) / double(n - 1));
    }
    return out;
}

AngularSpec parse_angular(const json& j, const std::string& path)
{
    Reader r(j, path);
    AngularSpec a;
    a.kind = r.text("kind", "cosine");
    if (a.kind == "constant") {
        a.value = r.number("value", 1.0);
    } else if (a.kind == "cosine") {
        a.offset = r.number("offset", 1.0);
        a.amplitude = r.number("amplitude", 1.0);
        a.mode = int(r.integer("mode", 1));
        a.phase = r.number("phase", 0.0);
        if (a.mode < 1 || a.mode > 4096) {
            r.fail_key("mode", "must lie in [1, 4096]");
        }
    } else if (a.kind == "bump") {
        a.center = r.number("center", pi);
        a.width = r.positive("width", 1.0);
    } else {
        r.fail_key("kind", "must be constant, cosine or bump");
    }
    r.done();
    return a;
}

FieldSpec parse_field(const json& j, const std::string& path)
{
    Reader r(j, path);
    FieldSpec f;
    f.kind = r.text("kind", "default");
    if (f.kind != "default" && f.kind != "bump" && f.kind != "plateau") {
        r.fail_key("kind", "must be default, bump or plateau");
    }
    f.amplitude = r.number("amplitude", 1.0);
    f.ramp = r.positive("ramp", 1e-3);
    if (const json* s = r.child("support")) {
        if (!s->is_array()) {
            r.fail_key("support", "must be an array of [lo, hi] pairs");
        }
        for (const auto& pair : *s) {
            const auto v = number_array(pair, r.at("support"));
            if (v.size() != 2 || !(v[0] < v[1])) {
                r.fail_key("support", "entries must be [lo, hi] with lo < hi");
            }
            f.support.emplace_back(v[0], v[1]);
        }
    }
    if (const json* a = r.child("angular")) {
        if (!a->is_array()) {
            r.fail_key("angular", "must be an array with one entry per dimension");
        }
        for (std::size_t i = 0; i < a->size(); ++i) {
            f.angular.push_back(parse_angular((*a)[i], r.at("angular") + "[" + std::to_string(i) + "]"));
        }
    }
    r.done();
    if (f.kind == "default" && (!f.support.empty() || !f.angular.empty())) {
        throw ConfigError("phasemix::config: '" + path + "' of kind default takes no support or angular");
    }
    return f;
}

DensitySpec parse_density(const json& j, const std::string& path, DensitySpec d)
{
    Reader r(j, path);
    const std::string kind = r.text("kind", "gaussian");
    if (kind != "gaussian") {
        r.fail_key("kind", "must be gaussian");
    }
    d.x = r.number("x", d.x);
    d.p = r.number("p", d.p);
    d.sigma = r.positive("sigma", d.sigma);
    d.radius = r.positive("radius", d.radius);
    r.done();
    return d;
}

WellSpec parse_well(const json& j, const std::string& path)
{
    Reader r(j, path);
    WellSpec w;
    const json* c = r.child("coefficients");
    if (!c) {
        r.fail_key("coefficients", "is required");
    }
    w.coefficients = number_array(*c, r.at("coefficients"));
    w.h_min = r.number("h_min", 0.01);
    w.h_max = r.number("h_max", 5.0);
    const double X = 2.0 * std::sqrt(2.0 * std::abs(w.h_max)) + 1.0;
    w.x_lo = r.number("x_lo", -X);
    w.x_hi = r.number("x_hi", X);
    w.table_points = int(r.integer("table_points", 256));
    r.done();
    return w;
}

WellSpec default_quartic_well()
{
    WellSpec w;
    w.coefficients = {0.0, 0.0, 0.5, 0.0, 0.3};
    w.h_min = 0.01;
    w.h_max = 5.0;
    const double X = 2.0 * std::sqrt(10.0) + 1.0;
    w.x_lo = -X;
    w.x_hi = X;
    return w;
}

} // namespace

Command parse_command(const std::string& name)
{
    static const std::pair<const char*, Command> names[] = {
        {"snapshot", Command::snapshot}, {"deviation", Command::deviation}, {"bound", Command::bound},
        {"rate", Command::rate},         {"actionangle", Command::actionangle},
        {"coulomb", Command::coulomb},   {"verify", Command::verify}};
    for (const auto& [n, c] : names) {
        if (name == n) {
            return c;
        }
    }
    throw ConfigError("phasemix::config: unknown command '" + name + "'");
}

std::string to_string(Command c)
{
    switch (c) {
    case Command::snapshot:
        return "snapshot";
    case Command::deviation:
        return "deviation";
    case Command::bound:
        return "bound";
    case Command::rate:
        return "rate";
    case Command::actionangle:
        return "actionangle";
    case Command::coulomb:
        return "coulomb";
    case Command::verify:
        return "verify";
    }
    return "unknown";
}

std::vector<double> time_grid(double t_min, double t_max, int count)
{
    if (count == 0) {
        count = int(std::lround(40.0 * std::log10(t_max / t_min))) + 1;
        count = std::max(count, 2);
    }
    return log_spaced(t_min, t_max, count);
}

ExperimentConfig parse_config(const json& doc, Command command)
{
    ExperimentConfig cfg;
    cfg.command = command;
    cfg.echo = doc;
    Reader root(doc, "");
    const std::string named = root.text("command", to_string(command));
    if (named != to_string(command)) {
        root.fail_key("command", "is '" + named + "' but the CLI asked for '" + to_string(command) + "'");
    }

    if (const json* m = root.child("model")) {
        Reader r(*m, "model");
        if (const json* w = r.child("well")) {
            cfg.model.well = parse_well(*w, "model.well");
            if (r.has("name") || r.has("params")) {
                r.fail_key("well", "cannot be combined with a catalog name");
            }
        }
        cfg.model.name = r.text("name", cfg.model.well ? "well" : "quartic_osc_1st_order");
        if (const json* p = r.child("params")) {
            Reader pr(*p, "model.params");
            for (const auto& item : p->items()) {
                cfg.model.params[item.key()] = pr.number(item.key(), 0.0);
            }
            pr.done();
        }
        r.done();
    } else if (command == Command::coulomb) {
        cfg.model.well = default_quartic_well();
        cfg.model.name = "well";
    }

    if (const json* f = root.child("fields")) {
        Reader r(*f, "fields");
        if (const json* a = r.child("f0")) {
            cfg.f0 = parse_field(*a, "fields.f0");
        }
        if (const json* b = r.child("phi")) {
            cfg.phi = parse_field(*b, "fields.phi");
        }
        r.done();
    }

    const double default_hi = command == Command::coulomb ? 500.0 : 1000.0;
    if (const json* t = root.child("times")) {
        cfg.times = parse_times(*t, "times", false);
    } else {
        cfg.times = time_grid(10.0, default_hi);
    }

    if (const json* q = root.child("quadrature")) {
        Reader r(*q, "quadrature");
        cfg.quadrature.tol = r.positive("tol", cfg.quadrature.tol);
        cfg.quadrature.grid_size = int(r.integer("grid_size", cfg.quadrature.grid_size));
        cfg.quadrature.c_osc = r.positive("c_osc", cfg.quadrature.c_osc);
        cfg.quadrature.t_direct_max = r.positive("t_direct_max", cfg.quadrature.t_direct_max);
        r.done();
        if (cfg.quadrature.grid_size < 8 || cfg.quadrature.grid_size > 65536) {
            r.fail_key("grid_size", "must lie in [8, 65536]");
        }
    }
    cfg.window = root.positive("window", cfg.window);

    cfg.snapshot.times = {0.0, 40.0 * pi, 80.0 * pi};
    if (const json* s = root.child("snapshot")) {
        Reader r(*s, "snapshot");
        if (const json* t = r.child("times")) {
            cfg.snapshot.times = parse_times(*t, "snapshot.times", true);
        }
        cfg.snapshot.nx = int(r.integer("nx", cfg.snapshot.nx));
        cfg.snapshot.np = int(r.integer("np", cfg.snapshot.np));
        if (const json* w = r.child("window")) {
            const auto v = number_array(*w, "snapshot.window");
            if (v.size() != 4 || !(v[0] < v[1]) || !(v[2] < v[3])) {
                r.fail_key("window", "must be [x_min, x_max, p_min, p_max] with increasing pairs");
            }
            cfg.snapshot.x_min = v[0];
            cfg.snapshot.x_max = v[1];
            cfg.snapshot.p_min = v[2];
            cfg.snapshot.p_max = v[3];
        }
        if (const json* d = r.child("density")) {
            cfg.snapshot.density = parse_density(*d, "snapshot.density", cfg.snapshot.density);
        }
        r.done();
        if (cfg.snapshot.nx < 64 || cfg.snapshot.np < 64 || cfg.snapshot.nx > 8192 || cfg.snapshot.np > 8192) {
            throw ConfigError("phasemix::config: 'snapshot.nx' and 'snapshot.np' must lie in [64, 8192]");
        }
    }

    cfg.coulomb.x0 = parse_grid(json::object(), "coulomb.x0");
    if (const json* c = root.child("coulomb")) {
        Reader r(*c, "coulomb");
        if (const json* x = r.child("x0")) {
            cfg.coulomb.x0 = parse_grid(*x, "coulomb.x0");
        }
        if (const json* d = r.child("density")) {
            cfg.coulomb.density = parse_density(*d, "coulomb.density", cfg.coulomb.density);
        }
        cfg.coulomb.modes = int(r.integer("modes", cfg.coulomb.modes));
        cfg.coulomb.amplitude_tol = r.positive("amplitude_tol", cfg.coulomb.amplitude_tol);
        cfg.coulomb.tail_tol = r.positive("tail_tol", cfg.coulomb.tail_tol);
        r.done();
        if (cfg.coulomb.modes < 1 || cfg.coulomb.modes > 4096) {
            r.fail_key("modes", "must lie in [1, 4096]");
        }
    }

    cfg.output = root.text("output", cfg.output);
    const long long seed = root.integer("seed", 1);
    if (seed < 0) {
        root.fail_key("seed", "must be nonnegative");
    }
    cfg.seed = std::uint64_t(seed);
    root.done();
    return cfg;
}

ActionAngleChart build_well_chart(const WellSpec& w)
{
    return build_chart(polynomial_well(w.coefficients, w.h_min, w.h_max, w.x_lo, w.x_hi), w.table_points);
}

ScalarField build_field(const FieldSpec& spec, const DomainBox& domain, bool is_phi)
{
    ScalarField base;
    if (spec.kind == "default") {
        base = is_phi ? default_phi(domain) : default_f0(domain, spec.ramp);
    } else {
        const DomainBox inner = domain.inner();
        if (!spec.support.empty() && int(spec.support.size()) != domain.d) {
            throw ConfigError("phasemix::config: field support needs one interval per action dimension");
        }
        if (!spec.angular.empty() && int(spec.angular.size()) != domain.d) {
            throw ConfigError("phasemix::config: field angular needs one entry per angle dimension");
        }
        SeparableParts parts;
        for (int i = 0; i < domain.d; ++i) {
            const double lo = spec.support.empty() ? inner.lo[i] : spec.support[std::size_t(i)].first;
            const double hi = spec.support.empty() ? inner.hi[i] : spec.support[std::size_t(i)].second;
            parts.profiles.push_back(spec.kind == "bump" ? bump_profile(lo, hi) : plateau_profile(lo, hi, spec.ramp));
            if (spec.angular.empty()) {
                parts.angulars.push_back(i == 0 ? angular_cosine(1.0, 1.0) : angular_constant(1.0));
                continue;
            }
            const AngularSpec& a = spec.angular[std::size_t(i)];
            if (a.kind == "constant") {
                parts.angulars.push_back(angular_constant(a.value));
            } else if (a.kind == "cosine") {
                parts.angulars.push_back(angular_cosine(a.offset, a.amplitude, a.mode, a.phase));
            } else {
                parts.angulars.push_back(angular_bump(a.center, a.width));
            }
        }
        base = make_separable_field(domain, std::move(parts));
    }
    return spec.amplitude == 1.0 ? base : scaled(base, spec.amplitude);
}

Model build_model(const ExperimentConfig& cfg)
{
    Model m;
    if (cfg.model.well) {
        const auto chart = build_well_chart(*cfg.model.well);
        m.freq = chart.omega;
        m.f0 = default_f0(m.freq.domain);
        m.label = "well";
    } else {
        m = make_builtin_model(cfg.model.name, cfg.model.params);
    }
    if (cfg.f0) {
        m.f0 = build_field(*cfg.f0, m.freq.domain, false);
    }
    return m;
}

} // namespace phasemix::cli
