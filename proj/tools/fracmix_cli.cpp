#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fracmix/error.hpp"
#include "fracmix/experiment.hpp"
#include "fracmix/io.hpp"

using namespace fracmix;

namespace {

struct Options {
    std::string config;
    std::string out;
    int jobs = 1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double tol = 0.0;
    bool verbose = false;
    bool inject_fault = false;
    bool print_config = false;
};

ExperimentConfig resolve_config(const Options& o, CLI::App& app)
{
    ExperimentConfig c = o.config.empty() ? default_config() : load_config(o.config);
    if (!o.out.empty()) c.output_dir = o.out;
    if (app.count("--seed")) c.seed = o.seed;
    if (app.count("--tol")) {
        if (!(o.tol > 0.0)) throw ValidationError("--tol: must be positive");
        c.monotone_tolerance = o.tol;
        c.newton_tolerance = o.tol;
    }
    if (o.inject_fault) c.inject_fault = true;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mixed-boundary spectral fractional Laplacian: concave-convex solver and checks"};
    app.set_version_flag("--version", std::string("fracmix ") + kToolVersion);
    app.require_subcommand(0, 1);

    Options o;
    app.add_option("--config", o.config, "JSON experiment config (defaults built in)");
    app.add_option("--out", o.out, "output directory (overrides output_dir)");
    app.add_option("--jobs", o.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--seed", o.seed, "seed for randomized probes");
    app.add_option("--tol", o.tol, "solver tolerance for monotone iteration and Newton");
    app.add_flag("-v,--verbose", o.verbose, "print per-check values and margins");
    app.add_flag("--print-config", o.print_config, "echo the resolved config as JSON");

    auto* solve = app.add_subcommand("solve", "minimal and mountain-pass solutions at one (lambda, alpha)");
    auto* branch = app.add_subcommand("branch", "minimal/mountain-pass branch and the q = 1 bifurcation diagram");
    auto* lstar = app.add_subcommand("lambda-star", "bracket the existence threshold with certificates");
    auto* sweep = app.add_subcommand("alpha-sweep", "trend tables over a nested boundary family");
    auto* verify = app.add_subcommand("verify", "run the invariant suite");
    verify->add_flag("--inject-fault", o.inject_fault, "perturb one eigenvalue (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        const ExperimentConfig config = resolve_config(o, app);
        if (o.print_config) std::cout << to_json(config).dump(2) << '\n';
        if (app.get_subcommands().empty()) {
            if (o.print_config) return kExitOk;
            std::cerr << app.help();
            return kExitValidation;
        }
        RunContext ctx;
        ctx.out_dir = config.output_dir;
        ctx.jobs = o.jobs;
        ctx.verbose = o.verbose;
        ctx.log = &std::cout;

        CommandResult r;
        if (*solve) r = cmd_solve(config, ctx);
        else if (*branch) r = cmd_branch(config, ctx);
        else if (*lstar) r = cmd_lambda_star(config, ctx);
        else if (*sweep) r = cmd_alpha_sweep(config, ctx);
        else if (*verify) r = cmd_verify(config, ctx);
        for (const auto& f : r.files) std::cout << "wrote " << f.string() << '\n';
        std::cout << r.summary << '\n';
        return r.exit_code;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSolver;
    }
}
