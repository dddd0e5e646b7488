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
#include "config.hpp"

#include "phasemix/errors.hpp"
#include "phasemix/parallel.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>
#include <openssl/crypto.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#ifndef PHASEMIX_VERSION
#define PHASEMIX_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;
using namespace phasemix;

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    std::ostringstream buf;
    buf << is.rdbuf();
    const std::string data = buf.str();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw NumericalFailure("phasemix::cli: SHA-256 failed for '" + path.string() + "'");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

json versions()
{
    return json{
        {"phasemix", PHASEMIX_VERSION},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__},
        {"cli11", CLI11_VERSION},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"openssl", OpenSSL_version(OPENSSL_VERSION)},
    };
}

json read_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("phasemix::cli: cannot open config '" + path + "'");
    }
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("phasemix::cli: config '" + path + "' is not valid JSON: " + e.what());
    }
}

void write_manifest(const cli::ExperimentConfig& cfg, const cli::Artifacts& art, double wall, int status)
{
    json files = json::array();
    for (const auto& f : art.files) {
        files.push_back({{"path", f},
                         {"bytes", std::filesystem::file_size(art.dir / f)},
                         {"sha256", sha256_file(art.dir / f)}});
    }
    json m{{"command", cli::to_string(cfg.command)},
           {"config", cfg.echo},
           {"seed", cfg.seed},
           {"versions", versions()},
           {"threads", worker_count()},
           {"wall_time_s", wall},
           {"exit_status", status},
           {"files", files}};
    for (const auto& item : art.summary.items()) {
        m[item.key()] = item.value();
    }
    std::ofstream os(art.dir / "manifest.json", std::ios::binary | std::ios::trunc);
    os << m.dump(2) << "\n";
}

int run(const std::string& command, const std::string& config_path, const std::string& out_dir,
        std::optional<std::uint64_t> seed)
{
    const auto start = std::chrono::steady_clock::now();
    const json doc = read_config(config_path);
    cli::ExperimentConfig cfg = cli::parse_config(doc, cli::parse_command(command));
    if (!out_dir.empty()) {
        cfg.output = out_dir;
    }
    if (seed) {
        cfg.seed = *seed;
    }
    cli::Artifacts art;
    art.dir = cfg.output;
    cli::run_command(cfg, art);
    const int status = art.invariant_failed ? 3 : 0;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(cfg, art, wall, status);
    if (status != 0) {
        std::cerr << "phasemix: verify: at least one property failed, see verify.json\n";
    }
    return status;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"phasemix: phase mixing experiments in action-angle coordinates"};
    app.require_subcommand(1);
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string chosen;
    for (const char* name : {"snapshot", "deviation", "bound", "rate", "actionangle", "coulomb", "verify"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON experiment configuration")->required();
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_option("--seed", seed, "seed for randomized probes (overrides the config)");
        sub->callback([&chosen, name] { chosen = name; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        return run(chosen, config, out, seed);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const DegeneracyError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const PreconditionError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const NotAWellError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const UnsupportedError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const NumericalFailure& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const InvariantFailure& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "phasemix::cli: " << e.what() << "\n";
        return 1;
    }
}
