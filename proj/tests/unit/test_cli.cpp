#include "jointmix/cli.hpp"
#include "jointmix/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <iostream>
#include <sstream>

using namespace jointmix;
using namespace test_support;
namespace fs = std::filesystem;

namespace {

const fs::path fixtures = JOINTMIX_FIXTURES;

struct Run {
  int code = 0;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "jointmix");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream err;
  std::ostringstream out;
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  return {code, err.str()};
}

}  // namespace

TEST_CASE("fit on the 10-subject fixture writes every artifact") {
  const auto dir = temp_dir("cli_fixture");
  for (const char* groups : {"1", "2"}) {
    const auto out = dir / groups;
    const Run r = run({"fit", (fixtures / "ordinal.csv").string(), (fixtures / "survival.csv").string(),
                       "--groups", groups, "--max-iter", "20000", "--out", out.string()});
    CHECK(r.code == exit_success);
    for (const char* name : {"fit.json", "estimates.csv", "info_matrix.csv", "posterior.csv",
                             "hazard.csv", "loglik_trace.csv"}) {
      CHECK(fs::exists(out / name));
    }
  }
}

TEST_CASE("unknown subjects are an input error naming the IDs") {
  const auto dir = temp_dir("cli_ids");
  std::string ord = slurp(fixtures / "ordinal.csv") + "42,1,1,1\n";
  io::write_text(dir / "ordinal.csv", ord);
  const Run r = run({"fit", (dir / "ordinal.csv").string(), (fixtures / "survival.csv").string(),
                     "--out", (dir / "out").string()});
  CHECK(r.code == exit_input_error);
  CHECK(r.err.find("42") != std::string::npos);
}

TEST_CASE("iteration cap exits with non-convergence and a partial trace") {
  const auto dir = temp_dir("cli_cap");
  const Run r = run({"fit", (fixtures / "ordinal.csv").string(), (fixtures / "survival.csv").string(),
                     "--max-iter", "1", "--restarts", "1", "--out", dir.string()});
  CHECK(r.code == exit_not_converged);
  CHECK(slurp(dir / "loglik_trace.csv").find("\n1,") != std::string::npos);
}

TEST_CASE("argument and file errors") {
  CHECK(run({}).code == exit_input_error);
  CHECK(run({"fit", "--bogus"}).code == exit_input_error);
  CHECK(run({"fit", "nope.csv", "nope2.csv"}).code == exit_input_error);
  CHECK(run({"fit", "--groups", "x"}).code == exit_input_error);
  CHECK(run({"fit", (fixtures / "ordinal.csv").string(), (fixtures / "survival.csv").string(),
             "--max-iter", "0"})
            .code == exit_input_error);
  const auto dir = temp_dir("cli_check_err");
  const Run r = run({"check", (fixtures / "ordinal.csv").string(), (fixtures / "survival.csv").string(),
                     "--out", dir.string()});
  CHECK(r.code == exit_input_error);
  CHECK(r.err.find("--params") != std::string::npos);
  CHECK(run({"check", (fixtures / "ordinal.csv").string(), (fixtures / "survival.csv").string(),
             "--params", (dir / "absent.json").string()})
            .code == exit_input_error);
}

TEST_CASE("simulate is reproducible and its output is accepted by fit") {
  const auto dir = temp_dir("cli_sim");
  io::write_json(dir / "design.json", {{"n", 60}, {"seed", 9}});
  for (const char* name : {"a", "b"}) {
    CHECK(run({"simulate", (dir / "design.json").string(), "--out", (dir / name).string()}).code ==
          exit_success);
  }
  for (const char* file : {"ordinal.csv", "survival.csv", "labels.csv", "design.json"}) {
    CHECK(slurp(dir / "a" / file) == slurp(dir / "b" / file));
  }
  run({"simulate", (dir / "design.json").string(), "--seed", "10", "--out", (dir / "c").string()});
  CHECK(slurp(dir / "a" / "survival.csv") != slurp(dir / "c" / "survival.csv"));

  const Run fit = run({"fit", (dir / "a" / "ordinal.csv").string(),
                       (dir / "a" / "survival.csv").string(), "--max-iter", "20000", "--out",
                       (dir / "fit").string()});
  CHECK(fit.code != exit_input_error);
  CHECK(fs::exists(dir / "fit" / "fit.json"));
}

TEST_CASE("config file supplies defaults that flags override") {
  const auto dir = temp_dir("cli_config");
  io::write_json(dir / "config.json",
                 {{"groups", 2}, {"max_iter", 1}, {"restarts", 1}, {"out", (dir / "from_config").string()},
                  {"ordinal", (fixtures / "ordinal.csv").string()},
                  {"survival", (fixtures / "survival.csv").string()}});
  CHECK(run({"fit", "--config", (dir / "config.json").string()}).code == exit_not_converged);
  CHECK(fs::exists(dir / "from_config" / "fit.json"));
  CHECK(run({"fit", "--config", (dir / "config.json").string(), "--max-iter", "20000", "--out",
             (dir / "flags").string()})
            .code == exit_success);
  const io::json fit = io::read_json(dir / "flags" / "fit.json");
  CHECK(fit.at("n_iter").get<int>() > 1);
}

TEST_CASE("check writes one record per diagnostic") {
  const auto dir = temp_dir("cli_check");
  io::write_json(dir / "design.json", {{"n", 200}, {"seed", 4}});
  run({"simulate", (dir / "design.json").string(), "--out", (dir / "sim").string()});
  ModelParams p = default_design().truth;
  p.theta = Eigen::VectorXd::Zero(1);
  p.pi = Eigen::VectorXd::Ones(1);
  p.survival.delta0 = 0.0;
  io::write_json(dir / "params.json", io::to_json(p));
  const Run r = run({"check", (dir / "sim" / "ordinal.csv").string(),
                     (dir / "sim" / "survival.csv").string(), "--params",
                     (dir / "params.json").string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == exit_success);
  const io::json checks = io::read_json(dir / "out" / "checks.json").at("checks");
  REQUIRE(checks.size() == 4);
  CHECK(checks[0].at("name") == "information_identity");
  CHECK(checks[0].contains("relative_frobenius_gap"));
  CHECK(checks[1].at("directions").size() == 6);
  CHECK(checks[2].at("name") == "efficient_score_equivalence");
  CHECK(checks[2].at("passed").get<bool>());
  CHECK(checks[3].at("name") == "contraction");
  CHECK(checks[3].at("passed").get<bool>());
}

TEST_CASE("mc writes a report and flags widespread failures") {
  const auto dir = temp_dir("cli_mc");
  io::write_json(dir / "design.json", {{"n", 100}, {"seed", 2}});
  const Run ok = run({"mc", (dir / "design.json").string(), "--replications", "0", "--out",
                      (dir / "zero").string()});
  CHECK(ok.code == exit_success);
  const io::json report = io::read_json(dir / "zero" / "mc_report.json");
  CHECK(report.at("failures") == 0);
  const Run bad = run({"mc", (dir / "design.json").string(), "--replications", "2", "--max-iter",
                       "1", "--out", (dir / "bad").string()});
  CHECK(bad.code == exit_not_converged);
}
