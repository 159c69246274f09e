#include "jointmix/io.hpp"

#include "jointmix/errors.hpp"
#include "jointmix/ordinal_model.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace jointmix::io {

namespace {

namespace fs = std::filesystem;

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line;  // 1-based line of each row

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return c;
    }
    throw InputError(source + ": missing column '" + name + "'");
  }
};

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable table;
  table.source = path.string();
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    auto cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError(table.source + ":" + std::to_string(number) + ": expected " +
                       std::to_string(table.header.size()) + " fields, found " +
                       std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line.push_back(number);
  }
  if (table.header.empty()) throw InputError(table.source + ": file is empty");
  return table;
}

template <typename T>
T parse_cell(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& text = table.rows[row][col];
  T value{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw InputError(table.source + ":" + std::to_string(table.line[row]) + ": column '" +
                     table.header[col] + "': cannot parse '" + text + "'");
  }
  return value;
}

std::string row_error(const CsvTable& table, std::size_t row, const std::string& what) {
  return table.source + ":" + std::to_string(table.line[row]) + ": " + what;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::VectorXd vector_from(const json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing key '") + key + "'");
  const auto values = j.at(key).get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(vector_json(m.row(r).transpose()));
  }
  return rows;
}

void open_out(std::ofstream& out, const fs::path& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Dataset read_dataset(const fs::path& ordinal_csv, const fs::path& survival_csv,
                     std::optional<int> levels, std::optional<int> items) {
  const CsvTable surv = read_csv(survival_csv);
  const CsvTable ord = read_csv(ordinal_csv);

  Dataset data;
  std::unordered_map<std::string, std::size_t> position;
  {
    const auto id = surv.column("subject_id");
    const auto time = surv.column("time");
    const auto event = surv.column("event");
    const auto cov = surv.column("covariate");
    for (std::size_t r = 0; r < surv.rows.size(); ++r) {
      Subject s;
      s.id = surv.rows[r][id];
      if (s.id.empty()) throw InputError(row_error(surv, r, "empty subject_id"));
      if (!position.emplace(s.id, data.subjects.size()).second) {
        throw InputError(row_error(surv, r, "duplicate subject_id '" + s.id + "'"));
      }
      s.survival.time = parse_cell<double>(surv, r, time);
      s.survival.event = parse_cell<int>(surv, r, event);
      s.survival.covariate = parse_cell<double>(surv, r, cov);
      try {
        validate(s.survival);
      } catch (const InputError& e) {
        throw InputError(row_error(surv, r, e.what()));
      }
      data.subjects.push_back(std::move(s));
    }
  }

  int max_level = 0;
  int max_item = 0;
  {
    const auto id = ord.column("subject_id");
    const auto time = ord.column("time_index");
    const auto item = ord.column("item");
    const auto level = ord.column("level");
    std::vector<std::string> unknown;
    std::set<std::string> reported;
    for (std::size_t r = 0; r < ord.rows.size(); ++r) {
      const auto& sid = ord.rows[r][id];
      const auto it = position.find(sid);
      if (it == position.end()) {
        if (reported.insert(sid).second) unknown.push_back(sid);
        continue;
      }
      OrdinalCell cell;
      cell.time = parse_cell<int>(ord, r, time);
      cell.item = parse_cell<int>(ord, r, item) - 1;
      cell.level = parse_cell<int>(ord, r, level) - 1;
      if (cell.item < 0) throw InputError(row_error(ord, r, "item must be at least 1"));
      if (cell.level < 0) throw InputError(row_error(ord, r, "level must be at least 1"));
      max_item = std::max(max_item, cell.item + 1);
      max_level = std::max(max_level, cell.level + 1);
      data.subjects[it->second].responses.cells.push_back(cell);
    }
    if (!unknown.empty()) {
      throw InputError("subjects in " + ord.source + " missing from " + surv.source + ": " +
                       join_ids(unknown));
    }
  }

  data.levels = levels.value_or(max_level);
  data.items = items.value_or(max_item);
  if (data.levels < max_level || data.items < max_item) {
    throw InputError("responses exceed the configured number of levels or items");
  }
  validate(data);
  return data;
}

void write_dataset(const Dataset& data, const fs::path& ordinal_csv, const fs::path& survival_csv) {
  std::ofstream ord;
  open_out(ord, ordinal_csv);
  ord << "subject_id,time_index,item,level\n";
  std::ofstream surv;
  open_out(surv, survival_csv);
  surv << "subject_id,time,event,covariate\n";
  for (const auto& s : data.subjects) {
    for (const auto& c : s.responses.cells) {
      ord << s.id << ',' << c.time << ',' << c.item + 1 << ',' << c.level + 1 << '\n';
    }
    surv << s.id << ',' << format_double(s.survival.time) << ',' << s.survival.event << ','
         << format_double(s.survival.covariate) << '\n';
  }
}

json to_json(const ModelParams& p) {
  return {{"theta", vector_json(p.theta)},
          {"pi", vector_json(p.pi)},
          {"ordinal",
           {{"a", vector_json(p.ordinal.a)},
            {"phi", vector_json(p.ordinal.phi)},
            {"b", vector_json(p.ordinal.b)}}},
          {"survival", {{"delta0", p.survival.delta0}, {"delta1", p.survival.delta1}}}};
}

ModelParams params_from_json(const json& j) {
  try {
    ModelParams p;
    p.theta = vector_from(j, "theta");
    p.pi = vector_from(j, "pi");
    const auto& ord = j.at("ordinal");
    p.ordinal.a = vector_from(ord, "a");
    p.ordinal.phi = vector_from(ord, "phi");
    p.ordinal.b = vector_from(ord, "b");
    const auto& surv = j.at("survival");
    p.survival.delta0 = surv.at("delta0").get<double>();
    p.survival.delta1 = surv.at("delta1").get<double>();
    return p;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed parameters: ") + e.what());
  }
}

json to_json(const SimDesign& d) {
  json cens;
  switch (d.censoring.kind) {
    case Censoring::Kind::none:
      cens = {{"kind", "none"}};
      break;
    case Censoring::Kind::uniform:
      cens = {{"kind", "uniform"}, {"c_max", d.censoring.parameter}};
      break;
    case Censoring::Kind::exponential:
      cens = {{"kind", "exponential"}, {"rate", d.censoring.parameter}};
      break;
  }
  json cov = d.covariate.kind == CovariateDist::Kind::normal
                 ? json{{"kind", "normal"}}
                 : json{{"kind", "two_point"}, {"p", d.covariate.p}};
  return {{"n", d.n},
          {"groups", d.groups},
          {"levels", d.levels},
          {"items", d.items},
          {"times", d.times},
          {"seed", d.seed},
          {"truth", to_json(d.truth)},
          {"baseline", {{"rates", d.baseline.rates}, {"cuts", d.baseline.cuts}}},
          {"censoring", cens},
          {"covariate", cov},
          {"missing_prob", d.missing_prob}};
}

SimDesign design_from_json(const json& j) {
  try {
    SimDesign d = default_design();
    if (j.contains("truth")) {
      d.truth = params_from_json(j.at("truth"));
      d.groups = static_cast<int>(d.truth.theta.size());
      d.levels = static_cast<int>(d.truth.ordinal.a.size());
      d.items = static_cast<int>(d.truth.ordinal.b.size());
    }
    d.n = j.value("n", d.n);
    d.groups = j.value("groups", d.groups);
    d.levels = j.value("levels", d.levels);
    d.items = j.value("items", d.items);
    d.times = j.value("times", d.times);
    d.seed = j.value("seed", d.seed);
    d.missing_prob = j.value("missing_prob", d.missing_prob);
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      if (b.contains("rate")) {
        d.baseline = BaselineHazard::constant(b.at("rate").get<double>());
      } else {
        d.baseline.rates = b.at("rates").get<std::vector<double>>();
        d.baseline.cuts = b.value("cuts", std::vector<double>{});
      }
    }
    if (j.contains("covariate")) {
      const auto& c = j.at("covariate");
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "normal") {
        d.covariate.kind = CovariateDist::Kind::normal;
      } else if (kind == "two_point") {
        d.covariate.kind = CovariateDist::Kind::two_point;
        d.covariate.p = c.value("p", 0.5);
      } else {
        throw InputError("unknown covariate kind '" + kind + "'");
      }
    }
    bool tune = false;
    double target = 0.0;
    if (j.contains("censoring")) {
      const auto& c = j.at("censoring");
      const auto kind = c.at("kind").get<std::string>();
      if (kind == "none") {
        d.censoring.kind = Censoring::Kind::none;
      } else if (kind == "uniform") {
        d.censoring.kind = Censoring::Kind::uniform;
        if (c.contains("target_fraction")) {
          tune = true;
          target = c.at("target_fraction").get<double>();
        } else {
          d.censoring.parameter = c.at("c_max").get<double>();
        }
      } else if (kind == "exponential") {
        d.censoring.kind = Censoring::Kind::exponential;
        d.censoring.parameter = c.at("rate").get<double>();
      } else {
        throw InputError("unknown censoring kind '" + kind + "'");
      }
    } else if (j.contains("truth") || j.contains("baseline") || j.contains("covariate")) {
      // keep the default 25% target for a modified design
      tune = true;
      target = 0.25;
    }
    if (tune) d.censoring.parameter = tune_uniform_censoring(d, target);
    validate(d);
    return d;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed design: ") + e.what());
  }
}

json to_json(const EMConfig& c) {
  return {{"tol_loglik", c.tol_loglik},
          {"tol_param", c.tol_param},
          {"tol_score", c.tol_score},
          {"max_iter", c.max_iter},
          {"n_restarts", c.n_restarts},
          {"seed", c.seed},
          {"threads", c.threads},
          {"self_check", c.self_check},
          {"information",
           c.information == InformationMethod::reprofiled ? "reprofiled" : "outer_product"}};
}

EMConfig config_from_json(const json& j, EMConfig c) {
  try {
    c.tol_loglik = j.value("tol_loglik", c.tol_loglik);
    c.tol_param = j.value("tol_param", c.tol_param);
    c.tol_score = j.value("tol_score", c.tol_score);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.n_restarts = j.value("n_restarts", c.n_restarts);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.self_check = j.value("self_check", c.self_check);
    if (j.contains("information")) {
      const auto method = j.at("information").get<std::string>();
      if (method == "reprofiled") {
        c.information = InformationMethod::reprofiled;
      } else if (method == "outer_product") {
        c.information = InformationMethod::outer_product;
      } else {
        throw InputError("unknown information method '" + method + "'");
      }
    }
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed config: ") + e.what());
  }
}

json to_json(const FitResult& fit) {
  json estimates = json::array();
  for (std::size_t k = 0; k < fit.parameter_names.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    json row = {{"name", fit.parameter_names[k]}};
    row["estimate"] = idx < fit.estimates.size() ? json(fit.estimates[idx]) : json(nullptr);
    row["std_error"] = idx < fit.std_errors.size() ? json(fit.std_errors[idx]) : json(nullptr);
    estimates.push_back(row);
  }
  return {{"converged", fit.converged},
          {"n_iter", fit.n_iter},
          {"restart", fit.restart},
          {"failed_restarts", fit.failed_restarts},
          {"loglik", fit.loglik_trace.empty() ? json(nullptr) : json(fit.loglik_trace.back())},
          {"score_norm", fit.score_norm},
          {"singular_information", fit.singular_information},
          {"condition_number", fit.condition_number},
          {"diagnostic", fit.diagnostic},
          {"params", to_json(fit.params)},
          {"estimates", estimates},
          {"info_matrix", matrix_json(fit.info_matrix)},
          {"hazard", {{"times", fit.hazard.times}, {"jumps", fit.hazard.jumps}}},
          {"loglik_trace", fit.loglik_trace}};
}

json to_json(const MCReport& report) {
  json params = json::array();
  for (const auto& p : report.parameters) {
    params.push_back({{"name", p.name},
                      {"truth", p.truth},
                      {"mean", p.mean},
                      {"sd", p.sd},
                      {"mean_se", p.mean_se},
                      {"sd_se_ratio", p.sd_se_ratio},
                      {"coverage", p.coverage}});
  }
  json seeds = json::array();
  for (const auto& r : report.records) seeds.push_back(r.seed);
  return {{"replications", report.replications},
          {"failures", report.failures},
          {"successes", report.replications - report.failures},
          {"failure_flag", report.failure_flag},
          {"seed", report.seed},
          {"parameters", params},
          {"replication_seeds", seeds}};
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out;
  open_out(out, path);
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_fit(const fs::path& dir, const Dataset& data, const FitResult& fit) {
  fs::create_directories(dir);
  write_json(dir / "fit.json", to_json(fit));

  std::ofstream est;
  open_out(est, dir / "estimates.csv");
  est << "parameter,estimate,std_error\n";
  for (std::size_t k = 0; k < fit.parameter_names.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    est << fit.parameter_names[k] << ','
        << (idx < fit.estimates.size() ? format_double(fit.estimates[idx]) : "") << ','
        << (idx < fit.std_errors.size() ? format_double(fit.std_errors[idx]) : "") << '\n';
  }

  std::ofstream info;
  open_out(info, dir / "info_matrix.csv");
  info << "parameter";
  for (const auto& name : fit.parameter_names) info << ',' << name;
  info << '\n';
  for (Eigen::Index r = 0; r < fit.info_matrix.rows(); ++r) {
    info << fit.parameter_names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < fit.info_matrix.cols(); ++c) {
      info << ',' << format_double(fit.info_matrix(r, c));
    }
    info << '\n';
  }

  std::ofstream post;
  open_out(post, dir / "posterior.csv");
  post << "subject_id";
  for (Eigen::Index r = 0; r < fit.posterior.groups(); ++r) post << ",group" << r + 1;
  post << '\n';
  for (Eigen::Index i = 0; i < fit.posterior.subjects(); ++i) {
    post << data.subjects[static_cast<std::size_t>(i)].id;
    for (Eigen::Index r = 0; r < fit.posterior.groups(); ++r) {
      post << ',' << format_double(fit.posterior.gamma(i, r));
    }
    post << '\n';
  }

  std::ofstream haz;
  open_out(haz, dir / "hazard.csv");
  haz << "time,jump,cumulative\n";
  double cum = 0.0;
  for (std::size_t k = 0; k < fit.hazard.times.size(); ++k) {
    cum += fit.hazard.jumps[k];
    haz << format_double(fit.hazard.times[k]) << ',' << format_double(fit.hazard.jumps[k]) << ','
        << format_double(cum) << '\n';
  }

  std::ofstream trace;
  open_out(trace, dir / "loglik_trace.csv");
  trace << "iteration,loglik\n";
  for (std::size_t k = 0; k < fit.loglik_trace.size(); ++k) {
    trace << k << ',' << format_double(fit.loglik_trace[k]) << '\n';
  }
}

void write_mc(const fs::path& dir, const MCReport& report) {
  fs::create_directories(dir);
  write_json(dir / "mc_report.json", to_json(report));

  std::ofstream sum;
  open_out(sum, dir / "mc_summary.csv");
  sum << "parameter,truth,mean,sd,mean_se,sd_se_ratio,coverage\n";
  for (const auto& p : report.parameters) {
    sum << p.name << ',' << format_double(p.truth) << ',' << format_double(p.mean) << ','
        << format_double(p.sd) << ',' << format_double(p.mean_se) << ','
        << format_double(p.sd_se_ratio) << ',' << format_double(p.coverage) << '\n';
  }

  std::ofstream reps;
  open_out(reps, dir / "mc_replications.csv");
  std::size_t p = 0;
  for (const auto& r : report.records) p = std::max<std::size_t>(p, static_cast<std::size_t>(r.estimates.size()));
  reps << "replication,seed,success,converged,n_iter,loglik,censored_fraction";
  for (const auto& s : report.parameters) reps << ",est_" << s.name;
  for (const auto& s : report.parameters) reps << ",se_" << s.name;
  reps << ",message\n";
  const auto width = report.parameters.empty() ? p : report.parameters.size();
  for (const auto& r : report.records) {
    reps << r.index << ',' << r.seed << ',' << r.success << ',' << r.converged << ',' << r.n_iter
         << ',' << format_double(r.loglik) << ',' << format_double(r.censored_fraction);
    for (std::size_t k = 0; k < width; ++k) {
      const auto idx = static_cast<Eigen::Index>(k);
      reps << ',' << (idx < r.estimates.size() ? format_double(r.estimates[idx]) : "");
    }
    for (std::size_t k = 0; k < width; ++k) {
      const auto idx = static_cast<Eigen::Index>(k);
      reps << ',' << (idx < r.std_errors.size() ? format_double(r.std_errors[idx]) : "");
    }
    std::string msg = r.message;
    for (char& ch : msg) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    reps << ',' << msg << '\n';
  }
}

}  // namespace jointmix::io
