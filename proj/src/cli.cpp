#include "jointmix/cli.hpp"

#include "jointmix/em_engine.hpp"
#include "jointmix/errors.hpp"
#include "jointmix/inference.hpp"
#include "jointmix/io.hpp"
#include "jointmix/profile_model.hpp"
#include "jointmix/simulation.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

namespace jointmix {

namespace {

namespace fs = std::filesystem;
using io::json;

constexpr double kIdentityGapLimit = 0.05;
constexpr double kOrthogonalityZLimit = 3.0;
constexpr double kEquivalenceLimit = 1e-8;

// Flags shared by every subcommand. Unset flags fall back to the config file.
struct CommonFlags {
  std::optional<int> groups;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::optional<int> restarts;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::optional<int> threads;
  bool verbose = false;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--groups", f.groups, "number of latent groups R");
  cmd.add_option("--tol", f.tol, "relative log-likelihood tolerance");
  cmd.add_option("--max-iter", f.max_iter, "maximum EM iterations per restart");
  cmd.add_option("--restarts", f.restarts, "number of EM restarts");
  cmd.add_option("--seed", f.seed, "random seed");
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_option("--config", f.config, "JSON config file; flags override its keys");
  cmd.add_option("--threads", f.threads, "worker threads");
  cmd.add_flag("-v,--verbose", f.verbose, "print a summary to stderr");
}

// Resolved settings: config file first, then flags.
struct Settings {
  json file = json::object();
  EMConfig em;
  std::optional<int> groups;
  fs::path out;
  bool verbose = false;

  template <typename T>
  std::optional<T> get(const char* key) const {
    if (!file.contains(key)) return std::nullopt;
    try {
      return file.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InputError(std::string("config key '") + key + "': " + e.what());
    }
  }
};

Settings resolve(const CommonFlags& f, EMConfig base, const std::string& default_out) {
  Settings s;
  if (f.config) {
    s.file = io::read_json(*f.config);
    if (!s.file.is_object()) throw InputError(*f.config + ": config must be a JSON object");
  }
  json em = s.file.contains("fit") ? s.file.at("fit") : json::object();
  for (const char* key : {"tol_loglik", "tol_param", "tol_score", "max_iter", "n_restarts", "seed",
                          "threads", "self_check", "information"}) {
    if (s.file.contains(key)) em[key] = s.file.at(key);
  }
  if (s.file.contains("tol")) em["tol_loglik"] = s.file.at("tol");
  if (s.file.contains("restarts")) em["n_restarts"] = s.file.at("restarts");
  if (f.tol) em["tol_loglik"] = *f.tol;
  if (f.max_iter) em["max_iter"] = *f.max_iter;
  if (f.restarts) em["n_restarts"] = *f.restarts;
  if (f.seed) em["seed"] = *f.seed;
  if (f.threads) em["threads"] = *f.threads;
  s.em = io::config_from_json(em, base);

  s.groups = f.groups ? f.groups : s.get<int>("groups");
  s.out = f.out ? *f.out : s.get<std::string>("out").value_or(default_out);
  s.verbose = f.verbose || s.get<bool>("verbose").value_or(false);
  return s;
}

std::string require_path(const std::string& flag, const Settings& s, const char* key) {
  if (!flag.empty()) return flag;
  if (auto p = s.get<std::string>(key)) return *p;
  throw InputError(std::string("missing ") + key + " file");
}

Dataset load_dataset(const std::string& ordinal, const std::string& survival, const Settings& s) {
  return io::read_dataset(require_path(ordinal, s, "ordinal"), require_path(survival, s, "survival"),
                          s.get<int>("levels"), s.get<int>("items"));
}

SimDesign load_design(const std::string& path, const Settings& s, const CommonFlags& f) {
  SimDesign design = default_design();
  if (!path.empty()) {
    design = io::design_from_json(io::read_json(path));
  } else if (s.file.contains("design")) {
    design = io::design_from_json(s.file.at("design"));
  }
  if (f.seed) {
    design.seed = *f.seed;
  } else if (auto seed = s.get<std::uint64_t>("seed")) {
    design.seed = *seed;
  }
  if (s.groups && *s.groups != design.groups) {
    throw InputError("--groups does not match the design");
  }
  return design;
}

ModelParams load_params(const fs::path& path) {
  const json j = io::read_json(path);
  // accept either a bare parameter document or a fit result
  return io::params_from_json(j.contains("params") ? j.at("params") : j);
}

int cmd_fit(const std::string& ordinal, const std::string& survival, const std::string& init_path,
            const CommonFlags& f) {
  const Settings s = resolve(f, {}, "fit_out");
  const Dataset data = load_dataset(ordinal, survival, s);
  std::optional<ModelParams> init;
  const std::string init_file = init_path.empty() ? s.get<std::string>("init").value_or("") : init_path;
  if (!init_file.empty()) init = load_params(init_file);
  const int groups = s.groups.value_or(init ? init->groups() : 2);

  const FitResult fit = em_fit(data, groups, s.em, init);
  io::write_fit(s.out, data, fit);
  if (s.verbose) {
    std::cerr << "converged=" << fit.converged << " iterations=" << fit.n_iter
              << " loglik=" << (fit.loglik_trace.empty() ? 0.0 : fit.loglik_trace.back())
              << " score=" << fit.score_norm << '\n';
    if (!fit.diagnostic.empty()) std::cerr << fit.diagnostic << '\n';
  }
  if (!fit.converged) {
    std::cerr << "fit did not converge";
    if (!fit.diagnostic.empty()) std::cerr << ": " << fit.diagnostic;
    std::cerr << '\n';
    return exit_not_converged;
  }
  return exit_success;
}

int cmd_simulate(const std::string& design_path, const CommonFlags& f) {
  const Settings s = resolve(f, {}, "sim_out");
  const SimDesign design = load_design(design_path, s, f);
  const SimulatedData sim = generate_dataset(design);
  fs::create_directories(s.out);
  io::write_dataset(sim.data, s.out / "ordinal.csv", s.out / "survival.csv");
  std::string labels = "subject_id,group\n";
  for (std::size_t i = 0; i < sim.labels.size(); ++i) {
    labels += sim.data.subjects[i].id + "," + std::to_string(sim.labels[i] + 1) + "\n";
  }
  io::write_text(s.out / "labels.csv", labels);
  json meta = io::to_json(design);
  meta["censored_fraction"] = sim.censored_fraction;
  meta["warnings"] = sim.warnings;
  io::write_json(s.out / "design.json", meta);
  for (const auto& w : sim.warnings) std::cerr << "warning: " << w << '\n';
  if (s.verbose) {
    std::cerr << "subjects=" << design.n << " censored=" << sim.censored_fraction << '\n';
  }
  return exit_success;
}

int cmd_mc(const std::string& design_path, std::optional<int> replications, bool random_init,
           const CommonFlags& f) {
  EMConfig base;
  base.max_iter = 20000;
  base.n_restarts = 1;
  const Settings s = resolve(f, base, "mc_out");
  const SimDesign design = load_design(design_path, s, f);
  MCOptions options;
  options.fit = s.em;
  options.init_at_truth = !random_init && s.get<bool>("init_at_truth").value_or(true);
  const int reps = replications.value_or(s.get<int>("replications").value_or(100));

  const MCReport report = mc_normality(design, reps, options);
  io::write_mc(s.out, report);
  if (s.verbose) {
    std::cerr << "replications=" << report.replications << " failures=" << report.failures << '\n';
    for (const auto& p : report.parameters) {
      std::cerr << p.name << " coverage=" << p.coverage << " sd/se=" << p.sd_se_ratio << '\n';
    }
  }
  if (report.failure_flag) {
    std::cerr << "more than 10% of replications failed (" << report.failures << " of "
              << report.replications << ")\n";
    return exit_not_converged;
  }
  return exit_success;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

// Runs one check; numeric failures become a failed record with the message.
template <typename F>
json run_check(const char* name, F&& body) {
  json record = {{"name", name}};
  try {
    body(record);
  } catch (const NumericError& e) {
    record["passed"] = false;
    record["error"] = e.what();
  }
  return record;
}

int cmd_check(const std::string& ordinal, const std::string& survival,
              const std::string& params_path, const CommonFlags& f) {
  const Settings s = resolve(f, {}, "check_out");
  const std::string path =
      params_path.empty() ? s.get<std::string>("params").value_or("") : params_path;
  if (path.empty()) throw InputError("check needs a parameter file (--params)");
  const ModelParams params = load_params(path);
  const Dataset data = load_dataset(ordinal, survival, s);
  if (s.groups && *s.groups != params.groups()) {
    throw InputError("--groups does not match the parameter file");
  }
  validate(params, data.levels, data.items);
  const ProfileModel model(data, params.groups());

  json checks = json::array();
  checks.push_back(run_check("information_identity", [&](json& rec) {
    const IdentityReport rep = info_identity_check(model, params);
    rec["relative_frobenius_gap"] = rep.relative_frobenius_gap;
    rec["limit"] = kIdentityGapLimit;
    rec["passed"] = rep.relative_frobenius_gap < kIdentityGapLimit;
  }));
  checks.push_back(run_check("orthogonality", [&](json& rec) {
    const auto stats = orthogonality_check(model, params, default_directions(data));
    json dirs = json::array();
    double worst = 0.0;
    for (const auto& st : stats) {
      dirs.push_back({{"direction", st.name},
                      {"mean", vector_json(st.mean)},
                      {"std_error", vector_json(st.std_error)},
                      {"max_abs_z", st.max_abs_z}});
      worst = std::max(worst, st.max_abs_z);
    }
    rec["directions"] = dirs;
    rec["max_abs_z"] = worst;
    rec["limit"] = kOrthogonalityZLimit;
    rec["passed"] = worst <= kOrthogonalityZLimit;
  }));
  const auto nuisance = [&] { return profile_nuisance(model, params); };
  std::optional<NuisanceProfile> profile;
  checks.push_back(run_check("efficient_score_equivalence", [&](json& rec) {
    profile = nuisance();
    const EquivalenceReport rep = efficient_score_equivalence(model, params, profile->posterior);
    rec["max_gap"] = rep.max_gap;
    rec["worst_subject"] = data.subjects[rep.worst_subject].id;
    rec["limit"] = kEquivalenceLimit;
    rec["passed"] = rep.max_gap <= kEquivalenceLimit;
  }));
  checks.push_back(run_check("contraction", [&](json& rec) {
    if (!profile) profile = nuisance();
    const ContractionReport rep = contraction_check(model, params, profile->hazard);
    rec["max_lhs"] = rep.max_lhs;
    rec["bound"] = rep.bound;
    rec["passed"] = rep.satisfied;
  }));

  fs::create_directories(s.out);
  io::write_json(s.out / "checks.json", {{"checks", checks}});
  if (s.verbose) {
    for (const auto& c : checks) {
      std::cerr << c.at("name").get<std::string>() << ": "
                << (c.at("passed").get<bool>() ? "pass" : "fail") << '\n';
    }
  }
  return exit_success;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Joint ordinal/survival mixture model"};
  app.require_subcommand(1);

  CommonFlags fit_flags;
  std::string fit_ordinal;
  std::string fit_survival;
  std::string fit_init;
  auto* fit = app.add_subcommand("fit", "fit the model to ordinal and survival CSV files");
  fit->add_option("ordinal", fit_ordinal, "ordinal responses CSV");
  fit->add_option("survival", fit_survival, "survival CSV");
  fit->add_option("--init", fit_init, "starting parameters (JSON)");
  add_common(*fit, fit_flags);

  CommonFlags sim_flags;
  std::string sim_design;
  auto* sim = app.add_subcommand("simulate", "generate a dataset from a design");
  sim->add_option("design", sim_design, "design JSON (default design if omitted)");
  add_common(*sim, sim_flags);

  CommonFlags mc_flags;
  std::string mc_design;
  std::optional<int> mc_reps;
  bool mc_random_init = false;
  auto* mc = app.add_subcommand("mc", "Monte Carlo coverage study");
  mc->add_option("design", mc_design, "design JSON (default design if omitted)");
  mc->add_option("--replications", mc_reps, "number of replications");
  mc->add_flag("--random-init", mc_random_init, "start fits away from the generating values");
  add_common(*mc, mc_flags);

  CommonFlags check_flags;
  std::string check_ordinal;
  std::string check_survival;
  std::string check_params;
  auto* check = app.add_subcommand("check", "numerical diagnostics at given parameters");
  check->add_option("ordinal", check_ordinal, "ordinal responses CSV");
  check->add_option("survival", check_survival, "survival CSV");
  check->add_option("--params", check_params, "parameter JSON or fit.json");
  add_common(*check, check_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_input_error;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_ordinal, fit_survival, fit_init, fit_flags);
    if (sim->parsed()) return cmd_simulate(sim_design, sim_flags);
    if (mc->parsed()) return cmd_mc(mc_design, mc_reps, mc_random_init, mc_flags);
    if (check->parsed()) return cmd_check(check_ordinal, check_survival, check_params, check_flags);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return exit_input_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return exit_numeric_failure;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return exit_input_error;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return exit_numeric_failure;
  }
  return exit_input_error;
}

}  // namespace jointmix
