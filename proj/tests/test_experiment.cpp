#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "fracmix/error.hpp"
#include "fracmix/experiment.hpp"
#include "fracmix/io.hpp"

using namespace fracmix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("fracmix_test_" + name);
    fs::remove_all(p);
    return p;
}

RunContext ctx_for(const fs::path& dir)
{
    RunContext ctx;
    ctx.out_dir = dir;
    return ctx;
}

std::string first_line(const fs::path& p)
{
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST_CASE("config round-trips through JSON bit-exactly")
{
    ExperimentConfig c = default_config();
    c.domain = DomainSpec::rectangle(1.0, 0.7, 9, 7);
    c.rule = PartitionRule::GrowFromCorner;
    c.alphas = {0.1 + 1e-17, 1.0 / 3.0, 2.0};
    c.problem.lambda = 0.1 * 3.0;
    c.lambdas = {1.0 / 7.0, 0.2};
    c.seed = 0xFFFFFFFFFFFFFFFFull;
    const std::string text = to_json(c).dump();
    const ExperimentConfig back = config_from_json(nlohmann::json::parse(text));
    CHECK(to_json(back).dump() == text);
    CHECK(back.alphas == c.alphas);
    CHECK(back.problem.lambda == c.problem.lambda);
    CHECK(back.seed == c.seed);
}

TEST_CASE("validation errors name the offending field")
{
    ExperimentConfig c = default_config();
    c.alphas = {0.0};
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("partition.alphas[0]"), ValidationError);
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("|Sigma_D| > 0"), ValidationError);

    ExperimentConfig d = default_config();
    d.domain = DomainSpec::rectangle(1.0, 1.0, 9, 9);
    d.rule = PartitionRule::GrowFromCorner;
    d.problem.r = 8.0;
    CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("problem.r"), ValidationError);

    ExperimentConfig e = default_config();
    e.alphas = {1.0, 0.5};
    CHECK_THROWS_WITH_AS(e.validate(), doctest::Contains("nested"), ValidationError);

    nlohmann::json j = to_json(default_config());
    j["problem"]["q"] = "half";
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("problem.q"), ValidationError);
}

TEST_CASE("solve writes records with metadata")
{
    ExperimentConfig c = default_config();
    const fs::path dir = scratch("solve");
    const CommandResult r = cmd_solve(c, ctx_for(dir));
    CHECK(r.exit_code == kExitOk);
    const nlohmann::json j = nlohmann::json::parse(read_file(dir / "solution.json"));
    CHECK(j.at("mountain_pass").at("status") == "found");
    CHECK(j.at("minimal").at("kind") == "minimal");
    CHECK(j.at("meta").at("version") == kToolVersion);
    const std::string hash = j.at("meta").at("config_hash");
    for (const auto& f : r.files) {
        if (f.extension() == ".csv") CHECK(first_line(f).find(hash) != std::string::npos);
    }
}

TEST_CASE("branch: single lambda gives one row, empty grid is rejected")
{
    ExperimentConfig c = default_config();
    c.lambdas = {0.4};
    c.bifurcation_points = 5;
    const fs::path dir = scratch("branch");
    const CommandResult r = cmd_branch(c, ctx_for(dir));
    CHECK(r.exit_code == kExitOk);
    std::ifstream in(dir / "branch_minimal.csv");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 3);  // banner, header, one row
    c.lambdas.clear();
    CHECK_THROWS_AS(cmd_branch(c, ctx_for(dir)), ValidationError);
}

TEST_CASE("alpha sweep rejects a non-nested family and accepts a singleton")
{
    ExperimentConfig c = default_config();
    c.domain = DomainSpec::rectangle(1.0, 1.0, 9, 9);
    c.rule = PartitionRule::GrowFromCorner;
    c.alphas = {1.0, 0.5};
    CHECK_THROWS_AS(cmd_alpha_sweep(c, ctx_for(scratch("sweep_bad"))), ValidationError);
    c.alphas = {1.0};
    const fs::path dir = scratch("sweep_one");
    const CommandResult r = cmd_alpha_sweep(c, ctx_for(dir));
    CHECK(r.exit_code == kExitOk);
    std::ifstream in(dir / "alpha_sweep.csv");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 3);
}

TEST_CASE("verify passes on defaults, is deterministic and catches an injected fault")
{
    const ExperimentConfig c = default_config();
    const fs::path a = scratch("verify_a");
    const fs::path b = scratch("verify_b");
    const CommandResult ra = cmd_verify(c, ctx_for(a));
    const CommandResult rb = cmd_verify(c, ctx_for(b));
    CHECK(ra.exit_code == kExitOk);
    CHECK(read_file(a / "verify.json") == read_file(b / "verify.json"));
    for (const auto& chk : run_verify_checks(c)) {
        INFO(chk.name << " value " << chk.value);
        CHECK(chk.pass);
    }

    ExperimentConfig faulty = c;
    faulty.inject_fault = true;
    const CommandResult rf = cmd_verify(faulty, ctx_for(scratch("verify_fault")));
    CHECK(rf.exit_code == kExitVerification);
    bool detected = false;
    for (const auto& chk : run_verify_checks(faulty)) {
        if (!chk.pass && (chk.name == "eigen.pair_residual" || chk.name == "operator.s1_reduction")) detected = true;
    }
    CHECK(detected);
}

TEST_CASE("io helpers")
{
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(csv_row({1.0, 2.5}) == "1,2.5");
    CHECK(fnv1a("") == 14695981039346656037ull);
    CHECK(config_hash(nlohmann::json{{"a", 1}}) == config_hash(nlohmann::json{{"a", 1}}));
    CHECK(config_hash(nlohmann::json{{"a", 1}}) != config_hash(nlohmann::json{{"a", 2}}));
}
