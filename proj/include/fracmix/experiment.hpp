#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "fracmix/mesh_domain.hpp"
#include "fracmix/nonlinear_solvers.hpp"

namespace fracmix {

/// Everything a CLI run needs; serializes to JSON and back without loss.
struct ExperimentConfig {
    DomainSpec domain = DomainSpec::interval(1.0, 101);
    PartitionRule rule = PartitionRule::GrowFromLeft;
    std::vector<double> alphas{1.0};          // first entry is used by single-configuration commands
    ProblemParams problem{0.5, 0.5, 2.0, 0.75};
    std::vector<double> lambdas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double bifurcation_r = 1.5;               // superlinear exponent of the q = 1 diagram
    int bifurcation_points = 30;
    double relative_resolution = 1e-3;        // threshold bracket width / lambda_1^s
    double lambda_fraction = 0.25;            // alpha sweep: lambda = fraction * Lambda_lower(alpha)
    double monotone_tolerance = 1e-10;
    double newton_tolerance = 1e-10;
    std::string output_dir = "fracmix-out";
    std::uint64_t seed = 20240611;
    bool inject_fault = false;                // verify: perturb one eigenvalue (negative control)

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

ExperimentConfig default_config();
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitSolver = 2, kExitVerification = 3 };

struct RunContext {
    std::filesystem::path out_dir;
    int jobs = 1;
    bool verbose = false;
    std::ostream* log = nullptr;  // progress and verbose margins; null silences
};

struct CommandResult {
    int exit_code = kExitOk;
    std::vector<std::filesystem::path> files;
    std::string summary;
};

CommandResult cmd_solve(const ExperimentConfig& config, const RunContext& ctx);
CommandResult cmd_branch(const ExperimentConfig& config, const RunContext& ctx);
CommandResult cmd_lambda_star(const ExperimentConfig& config, const RunContext& ctx);
CommandResult cmd_alpha_sweep(const ExperimentConfig& config, const RunContext& ctx);

struct VerifyCheck {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool upper = true;  // pass iff value <= threshold (else value >= threshold)
    bool pass = false;
    double margin() const { return upper ? threshold - value : value - threshold; }
};

/// Invariant suite over the configured domain; exit code 3 when any check fails.
std::vector<VerifyCheck> run_verify_checks(const ExperimentConfig& config);
CommandResult cmd_verify(const ExperimentConfig& config, const RunContext& ctx);

/// Metadata block embedded in every output file.
nlohmann::json output_meta(const ExperimentConfig& config, const std::string& command);

}  // namespace fracmix
