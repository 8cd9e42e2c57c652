// Command-line front end: config parsing, experiment orchestration and
// output artifacts (reports, plot data, run manifest).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maxdisc/config.hpp"
#include "maxdisc/io.hpp"
#include "maxdisc/pickands.hpp"
#include "maxdisc/verify.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 1 validation error, 2 runtime failure,
// 3 verdict FAIL.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerdict = 3;

// PASS rule for a single verify run: sup-distance within the finite-T
// bias allowance plus four combined standard errors at the sup point.
constexpr double kBiasAllowance = 0.04;

std::string iso_timestamp() {
    const std::time_t now =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string hash_hex(std::uint64_t hash) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

/// Collects output files under --out-dir and writes the run manifest.
class OutputWriter {
public:
    explicit OutputWriter(std::string out_dir) : out_dir_(std::move(out_dir)) {
        started_ = iso_timestamp();
    }

    void write(const std::string& name, const std::string& content) {
        std::filesystem::create_directories(out_dir_);
        const auto path = std::filesystem::path(out_dir_) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw maxdisc::Error("cannot write output file: " + path.string());
        out << content;
        outputs_.push_back(name);
    }

    void write_json(const std::string& name, const nlohmann::json& doc) {
        write(name, doc.dump(2) + "\n");
    }

    void write_binary(const std::string& name, const void* data, std::size_t bytes) {
        std::filesystem::create_directories(out_dir_);
        const auto path = std::filesystem::path(out_dir_) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw maxdisc::Error("cannot write output file: " + path.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        outputs_.push_back(name);
    }

    void finish_manifest(std::uint64_t config_hash, std::uint64_t seed) {
        nlohmann::json manifest;
        manifest["config_hash"] = hash_hex(config_hash);
        manifest["seed"] = seed;
        manifest["version"] = kVersion;
        manifest["started"] = started_;
        manifest["finished"] = iso_timestamp();
        manifest["outputs"] = outputs_;
        write_json("manifest.json", manifest);
    }

private:
    std::string out_dir_;
    std::string started_;
    std::vector<std::string> outputs_;
};

void print_report_console(const maxdisc::ExperimentReport& report) {
    std::printf("T = %.6g (ln T = %.6g), regime %s, delta %.6g (snap err %.6g)\n",
                report.horizon, std::log(report.horizon),
                maxdisc::to_string(report.regime), report.delta,
                report.delta_snap_error);
    std::printf("mesh h %.6g, n %zu, replications %zu, seed %llu\n", report.mesh.h,
                report.mesh.n, report.replications,
                static_cast<unsigned long long>(report.master_seed));
    std::printf("%10s %10s %12s %10s %12s %8s\n", "x", "y", "empirical", "stderr",
                "theoretical", "z");
    for (const auto& point : report.points)
        std::printf("%10.6g %10.6g %12.6g %10.6g %12.6g %8.3g\n", point.x, point.y,
                    point.empirical, point.stderr_emp, point.theoretical,
                    point.z_score);
    std::printf("sup distance %.6g, worst z %.6g, runtime %.1fs\n",
                report.sup_distance, report.worst_z, report.runtime_seconds);
}

void write_report_files(OutputWriter& out, const maxdisc::ExperimentReport& report) {
    out.write_json("report.json", maxdisc::report_to_json(report));
    out.write("report.csv", maxdisc::report_csv(report));
    out.write("samples.csv", maxdisc::samples_csv(report));
    out.write("overlay.csv", maxdisc::overlay_csv(report));
}

int cmd_model_check(const std::string& config_path) {
    const auto doc = maxdisc::load_config_document(config_path);
    const auto config = maxdisc::parse_config(doc);
    const auto model = maxdisc::build_model(config.components, config.r_cross,
                                            config.allow_singular_latent);
    const auto grid = maxdisc::classify_grid(config.grid_rule, config.min_alpha());
    const double horizon = config.horizons.front();
    const auto mesh = maxdisc::MeshSpec::for_horizon(
        horizon, maxdisc::continuum_step_bound(model, horizon, config.mesh_safety));

    std::printf("config %s: OK (hash %s)\n", config_path.c_str(),
                hash_hex(maxdisc::config_hash(doc)).c_str());
    std::printf("components p = %zu, latent rank %zu%s\n", model.dim(),
                model.latent_rank(), model.singular_latent() ? " (singular)" : "");
    for (std::size_t k = 0; k < model.dim(); ++k) {
        const auto& comp = model.component(k);
        std::printf("  component %zu: alpha %.6g, C %.6g, r_kk %.6g\n", k, comp.alpha,
                    comp.c, comp.r_diag);
    }
    std::printf("grid regime: %s", maxdisc::to_string(grid.regime));
    if (grid.regime == maxdisc::GridRegime::Pickands)
        std::printf(" (d = %.6g)", grid.pickands_d);
    std::printf("\nfirst horizon T = %.6g: delta %.6g, mesh h %.6g (n = %zu)\n",
                horizon, grid.rule.delta(horizon, config.min_alpha()), mesh.h, mesh.n);
    return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 bool dump_paths) {
    const auto doc = maxdisc::load_config_document(config_path);
    const auto config = maxdisc::parse_config(doc);
    const auto model = maxdisc::build_model(config.components, config.r_cross,
                                            config.allow_singular_latent);
    const double horizon = config.horizons.front();
    const auto mesh = maxdisc::MeshSpec::for_horizon(
        horizon, maxdisc::continuum_step_bound(model, horizon, config.mesh_safety));
    OutputWriter out(out_dir);

    maxdisc::VectorProcessSampler sampler(model, mesh);
    std::vector<maxdisc::PathEnsemble> batch(config.replications);
    for (std::size_t pair = 0; 2 * pair < config.replications; ++pair) {
        maxdisc::PathEnsemble ens_b;
        sampler.sample_pair(config.master_seed, pair, batch[2 * pair],
                            2 * pair + 1 < config.replications ? batch[2 * pair + 1]
                                                               : ens_b);
    }

    if (dump_paths) {
        // Binary columnar dump of the first replication: header
        // (uint64 p, uint64 n, float64 h, uint64 seed), then each
        // component's path as little-endian float64.
        const auto& first = batch.front();
        std::vector<char> blob;
        const auto append = [&blob](const void* ptr, std::size_t bytes) {
            const char* raw = static_cast<const char*>(ptr);
            blob.insert(blob.end(), raw, raw + bytes);
        };
        const std::uint64_t p = first.dim(), n = mesh.n, seed = config.master_seed;
        append(&p, 8);
        append(&n, 8);
        append(&mesh.h, 8);
        append(&seed, 8);
        for (const auto& path : first.paths) append(path.data(), 8 * path.size());
        out.write_binary("paths.bin", blob.data(), blob.size());
    }

    bool any_flag = false;
    if (config.replications >= 1000) {
        const std::vector<double> lags = {0.0, mesh.h, 2.0 * mesh.h, 5.0 * mesh.h,
                                          10.0 * mesh.h};
        const auto rows = maxdisc::covariance_selfcheck(batch, model, lags);
        std::string csv = "component,lag,empirical,expected,z,flagged\n";
        std::printf("%10s %12s %12s %12s %8s %8s\n", "component", "lag", "empirical",
                    "expected", "z", "flag");
        for (const auto& row : rows) {
            std::printf("%10zu %12.6g %12.6g %12.6g %8.3g %8s\n", row.component,
                        row.lag, row.empirical, row.expected, row.z_score,
                        row.flagged ? "FLAG" : "ok");
            csv += std::to_string(row.component) + "," + maxdisc::format_full(row.lag) +
                   "," + maxdisc::format_full(row.empirical) + "," +
                   maxdisc::format_full(row.expected) + "," +
                   maxdisc::format_full(row.z_score) + "," +
                   (row.flagged ? "1" : "0") + "\n";
            any_flag = any_flag || row.flagged;
        }
        out.write("selfcheck.csv", csv);
    } else {
        std::printf("replications < 1000: covariance self-check skipped\n");
    }

    out.finish_manifest(maxdisc::config_hash(doc), config.master_seed);
    if (any_flag) {
        std::printf("VERDICT: FAIL (covariance self-check flagged)\n");
        return kExitVerdict;
    }
    std::printf("VERDICT: PASS\n");
    return kExitOk;
}

int cmd_pickands(double alpha, double d, double lambda, double mesh_h, std::size_t reps,
                 std::uint64_t seed, bool table, const std::string& out_dir) {
    OutputWriter out(out_dir);
    nlohmann::json result;
    result["alpha"] = alpha;
    result["lambda"] = lambda;
    result["reps"] = reps;
    result["seed"] = seed;

    if (d > 0.0) {
        const auto est = maxdisc::estimate_H_d_alpha_tilted(alpha, d, lambda, reps, seed);
        result["d"] = d;
        result["value"] = est.value;
        result["stderr"] = est.stderr_value;
        result["mesh"] = est.mesh;
    } else {
        if (mesh_h <= 0.0) mesh_h = 0.01;
        const std::vector<double> windows = {lambda / 4.0, lambda / 2.0, lambda};
        const auto ext =
            maxdisc::extrapolate_H_alpha_tilted(alpha, windows, mesh_h, reps, seed);
        result["value"] = ext.extrapolated.value;
        result["stderr"] = ext.extrapolated.stderr_value;
        result["mesh"] = ext.extrapolated.mesh;
        result["fit_residual"] = ext.fit_residual;
        nlohmann::json window_json = nlohmann::json::array();
        for (const auto& est : ext.windows)
            window_json.push_back({{"lambda", est.lambda},
                                   {"value", est.value},
                                   {"stderr", est.stderr_value}});
        result["windows"] = window_json;
    }

    if (table) {
        if (!(d > 0.0))
            throw maxdisc::ConfigError("pickands --table requires --d > 0");
        const auto build = maxdisc::build_H_table_tilted(alpha, d, -3.0, 5.0, -3.0, 5.0,
                                                         0.25, lambda, reps, seed);
        std::string csv = "x,y,value,stderr\n";
        for (std::size_t ix = 0; ix < build.table.nx; ++ix) {
            const double x = build.table.x0 + static_cast<double>(ix) * build.table.pitch;
            for (std::size_t iy = 0; iy < build.table.ny; ++iy) {
                const double y =
                    build.table.y0 + static_cast<double>(iy) * build.table.pitch;
                csv += maxdisc::format_full(x) + "," + maxdisc::format_full(y) + "," +
                       maxdisc::format_full(build.table.cell(ix, iy)) + "," +
                       maxdisc::format_full(build.table.stderrs[ix * build.table.ny + iy]) +
                       "\n";
            }
        }
        out.write("table.csv", csv);
        result["h_alpha_mesh"] = build.h_alpha.value;
        result["h_d_alpha"] = build.h_d_alpha.value;
    }

    out.write_json("pickands.json", result);
    out.finish_manifest(maxdisc::fnv1a64(result.dump()), seed);
    std::printf("%s\n", result.dump(2).c_str());
    return kExitOk;
}

int cmd_verify(const std::string& regime_arg, const std::string& config_path,
               const std::string& out_dir) {
    const auto doc = maxdisc::load_config_document(config_path);
    auto config = maxdisc::parse_config(doc);
    const auto grid = maxdisc::classify_grid(config.grid_rule, config.min_alpha());

    if (regime_arg == "corollary") {
        // Marginal check of the continuous maximum alone: push the grid
        // threshold out of the way; the sparse/dense limit at y = +inf
        // reduces to the same marginal mixture.
        config.lattice_y = {1e9};
        if (grid.regime == maxdisc::GridRegime::Pickands)
            throw maxdisc::ConfigError(
                "verify corollary: use a sparse or dense grid rule");
    } else if (regime_arg != maxdisc::to_string(grid.regime)) {
        throw maxdisc::ConfigError("verify " + regime_arg + ": config grid rule is " +
                                   maxdisc::to_string(grid.regime));
    }

    OutputWriter out(out_dir);
    const auto report = maxdisc::run_experiment(config);
    print_report_console(report);
    write_report_files(out, report);
    out.finish_manifest(maxdisc::config_hash(doc), config.master_seed);

    const double tolerance = kBiasAllowance + 4.0 * maxdisc::stderr_at_sup(report);
    const bool pass = report.sup_distance <= tolerance;
    std::printf("VERDICT: %s (sup %.6g vs tolerance %.6g)\n", pass ? "PASS" : "FAIL",
                report.sup_distance, tolerance);
    return pass ? kExitOk : kExitVerdict;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
    const auto doc = maxdisc::load_config_document(config_path);
    const auto config = maxdisc::parse_config(doc);
    OutputWriter out(out_dir);
    const auto sweep = maxdisc::convergence_sweep(config);
    for (const auto& report : sweep.reports) {
        std::printf("ln T %.6g: sup distance %.6g (stderr at sup %.6g)\n",
                    std::log(report.horizon), report.sup_distance,
                    maxdisc::stderr_at_sup(report));
    }
    out.write_json("sweep.json", maxdisc::sweep_to_json(sweep));
    out.write("sweep.csv", maxdisc::sweep_csv(sweep));
    out.finish_manifest(maxdisc::config_hash(doc), config.master_seed);
    std::printf("VERDICT: %s\n", sweep.pass ? "PASS" : "FAIL");
    return sweep.pass ? kExitOk : kExitVerdict;
}

int cmd_limits_eval(const std::string& config_path, const std::vector<double>& xs,
                    const std::vector<double>& ys) {
    const auto doc = maxdisc::load_config_document(config_path);
    const auto config = maxdisc::parse_config(doc);
    const auto model = maxdisc::build_model(config.components, config.r_cross,
                                            config.allow_singular_latent);
    const auto grid = maxdisc::classify_grid(config.grid_rule, config.min_alpha());

    maxdisc::LimitSpec spec;
    spec.model = &model;
    maxdisc::PickandsConstants constants;
    switch (grid.regime) {
        case maxdisc::GridRegime::Sparse: spec.regime = maxdisc::LimitRegime::Sparse; break;
        case maxdisc::GridRegime::Dense: spec.regime = maxdisc::LimitRegime::Dense; break;
        case maxdisc::GridRegime::Pickands: {
            spec.regime = maxdisc::LimitRegime::Pickands;
            const auto& comp = model.component(0);
            constants = maxdisc::make_pickands_constants(
                comp.alpha, grid.pickands_d * std::pow(comp.c, 1.0 / comp.alpha),
                config.pickands_lambda, config.pickands_reps,
                maxdisc::derive_seed(config.master_seed, 77, 0));
            spec.h_alpha = constants.h_alpha;
            spec.h_d_alpha = constants.h_d_alpha;
            spec.h_table = &constants.table;
            break;
        }
    }

    std::printf("%10s %10s %12s %12s\n", "x", "y", "value", "error");
    for (double x : xs) {
        for (double y : ys) {
            const std::vector<double> xv(model.dim(), x), yv(model.dim(), y);
            const auto value = maxdisc::limit_cdf(spec, xv, yv);
            std::printf("%10.6g %10.6g %12.6g %12.6g\n", x, y, value.value,
                        value.error);
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Max-discretisation verification laboratory"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "./out";

    auto* model_cmd = app.add_subcommand("model", "Model utilities");
    model_cmd->require_subcommand(1);
    auto* model_check = model_cmd->add_subcommand("check", "Validate a config");
    model_check->add_option("config", config_path, "config JSON file")->required();

    auto* simulate = app.add_subcommand("simulate", "Sample paths and self-check");
    simulate->add_option("config", config_path, "config JSON file")->required();
    bool dump_paths = false;
    simulate->add_flag("--dump-paths", dump_paths, "write binary path dump");
    simulate->add_option("--out-dir", out_dir, "output directory");

    auto* pickands = app.add_subcommand("pickands", "Estimate Pickands-type constants");
    double alpha = 1.0, d = 0.0, lambda = 32.0, mesh_h = 0.0;
    std::size_t reps = 20000;
    std::uint64_t seed = 1;
    bool table = false;
    pickands->add_option("--alpha", alpha, "regularity exponent in (0,2]")->required();
    pickands->add_option("--d", d, "grid spacing (0 = continuum constant)");
    pickands->add_option("--lambda", lambda, "window half-width");
    pickands->add_option("--mesh", mesh_h, "fine mesh step");
    pickands->add_option("--reps", reps, "replications");
    pickands->add_option("--seed", seed, "master seed");
    pickands->add_flag("--table", table, "build the joint H^{x,y} lattice CSV");
    pickands->add_option("--out-dir", out_dir, "output directory");

    auto* verify = app.add_subcommand("verify", "Run one verification experiment");
    std::string regime_arg;
    verify->add_option("regime", regime_arg, "sparse|pickands|dense|corollary")
        ->required()
        ->check(CLI::IsMember({"sparse", "pickands", "dense", "corollary"}));
    verify->add_option("config", config_path, "config JSON file")->required();
    verify->add_option("--out-dir", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "Convergence sweep over a T ladder");
    sweep->add_option("config", config_path, "config JSON file")->required();
    sweep->add_option("--out-dir", out_dir, "output directory");

    auto* limits = app.add_subcommand("limits", "Limit distribution utilities");
    limits->require_subcommand(1);
    auto* limits_eval = limits->add_subcommand("eval", "Evaluate the limit CDF");
    std::vector<double> xs, ys;
    limits_eval->add_option("config", config_path, "config JSON file")->required();
    limits_eval->add_option("--x", xs, "x arguments")->required()->expected(-1);
    limits_eval->add_option("--y", ys, "y arguments")->required()->expected(-1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*model_check) return cmd_model_check(config_path);
        if (*simulate) return cmd_simulate(config_path, out_dir, dump_paths);
        if (*pickands)
            return cmd_pickands(alpha, d, lambda, mesh_h, reps, seed, table, out_dir);
        if (*verify) return cmd_verify(regime_arg, config_path, out_dir);
        if (*sweep) return cmd_sweep(config_path, out_dir);
        if (*limits_eval) return cmd_limits_eval(config_path, xs, ys);
        std::fprintf(stderr, "error: unknown subcommand\n");
        return kExitValidation;
    } catch (const maxdisc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitValidation;
    } catch (const maxdisc::Error& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kExitRuntime;
    }
}
