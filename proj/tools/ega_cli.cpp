// Command-line front end: fit, compare, simulate, generate.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ega/baselines.hpp"
#include "ega/ega.hpp"
#include "ega/io.hpp"
#include "ega/simstudy.hpp"

using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kInput = 2, kData = 3, kConvergence = 4 };

struct Common {
  double gamma = 0.5;
  int steps = 4;
  int n_lambda = 100;
  int kmax = 10;
  int pa_iter = 20;
  std::uint64_t seed = 1;
  std::string eigen = "factor";
  std::string fit_correlation = "pearson";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--gamma", c.gamma, "EBIC hyperparameter")->check(CLI::NonNegativeNumber);
  cmd->add_option("--steps", c.steps, "walktrap random-walk length")->check(CLI::PositiveNumber);
  cmd->add_option("--n-lambda", c.n_lambda, "glasso path length")->check(CLI::Range(2, 100000));
  cmd->add_option("--kmax", c.kmax, "largest factor count tried")->check(CLI::PositiveNumber);
  cmd->add_option("--pa-iter", c.pa_iter, "parallel-analysis null datasets")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--eigen", c.eigen, "eigenvalues for PA and Kaiser")
      ->check(CLI::IsMember({"factor", "component"}));
  cmd->add_option("--fit-correlation", c.fit_correlation, "correlation read by VSS, MAP, BIC, EBIC")
      ->check(CLI::IsMember({"pearson", "tetrachoric"}));
}

ega::EigenKind eigen_kind(const std::string& s) {
  return s == "component" ? ega::EigenKind::component : ega::EigenKind::factor;
}

ega::CorrelationKind correlation_kind(const std::string& s) {
  return s == "tetrachoric" ? ega::CorrelationKind::tetrachoric : ega::CorrelationKind::pearson;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const std::vector<double>& xs) {
  json out = json::array();
  for (double x : xs) out.push_back(number_or_null(x));
  return out;
}

/// Everything needed to run retention methods on one dataset.
struct Prepared {
  ega::DataTable table;
  bool binary = false;
  ega::CorrelationMatrix r;      // tetrachoric for binary data, else Pearson
  ega::CorrelationMatrix fit_r;  // input to VSS, MAP, BIC, EBIC
  int n = 0;
};

Prepared prepare(const std::string& path, const std::string& correlation, const Common& c) {
  Prepared p;
  p.table = ega::read_csv_file(path);
  p.n = static_cast<int>(p.table.values.rows());
  if (p.table.values.cols() < 2) throw ega::InputError("need at least two item columns");
  std::string constant;
  for (Eigen::Index j = 0; j < p.table.values.cols(); ++j)
    if ((p.table.values.col(j).array() == p.table.values(0, j)).all())
      constant += (constant.empty() ? "" : ", ") + p.table.header[static_cast<std::size_t>(j)];
  if (!constant.empty()) throw ega::DataError("constant column(s): " + constant);
  p.binary = correlation == "tetrachoric" || (correlation == "auto" && ega::is_binary(p.table.values));
  if (p.binary && !ega::is_binary(p.table.values))
    throw ega::InputError("--correlation tetrachoric requires 0/1 data");
  p.r = p.binary ? ega::tetrachoric_matrix(ega::BinaryMatrix(p.table.values.cast<std::uint8_t>()))
                 : ega::pearson_matrix(p.table.values);
  p.fit_r = (p.binary && c.fit_correlation == "pearson") ? ega::pearson_matrix(p.table.values) : p.r;
  return p;
}

ega::RetentionEstimate run_method(ega::Method m, const Prepared& p, const Common& c) {
  using namespace ega;
  switch (m) {
    case Method::vss: return vss_select(p.fit_r, p.n, c.kmax);
    case Method::map: return map_select(p.fit_r, c.kmax);
    case Method::bic: return information_select(p.fit_r, p.n, {c.kmax, c.gamma}).first;
    case Method::ebic: return information_select(p.fit_r, p.n, {c.kmax, c.gamma}).second;
    case Method::kaiser: return kaiser_rule(p.r, eigen_kind(c.eigen), p.n);
    case Method::pa:
      if (!p.binary) throw InputError("parallel analysis needs binary data");
      return parallel_analysis(BinaryMatrix(p.table.values.cast<std::uint8_t>()), p.r,
                               {c.pa_iter, c.seed, eigen_kind(c.eigen)});
    case Method::ega: break;
  }
  throw InputError("run_method: ega is not a retention rule");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ega::InputError("cannot write '" + path + "'");
  out << text;
}

std::string item_name(const Prepared& p, int i) { return p.table.header[static_cast<std::size_t>(i)]; }

int cmd_fit(const std::string& path, const std::string& method_name, const std::string& correlation,
            const std::string& prefix, const Common& c) {
  const auto method = ega::parse_method(method_name);
  if (!method) throw ega::InputError("unknown method '" + method_name + "'");
  const Prepared p = prepare(path, correlation, c);
  json out;
  out["method"] = method_name;
  out["n"] = p.n;
  out["p"] = p.table.values.cols();
  const bool fit_based = *method == ega::Method::vss || *method == ega::Method::map ||
                         *method == ega::Method::bic || *method == ega::Method::ebic;
  out["correlation"] = ega::to_string((fit_based ? p.fit_r : p.r).kind);
  std::string edges;
  if (*method == ega::Method::ega) {
    const auto res = ega::ega_from_correlation(p.r, p.n, {c.gamma, c.steps, c.n_lambda});
    out["ndim"] = res.ndim;
    json dims = json::array();
    for (const auto& [item, dim] : res.dim_variables)
      dims.push_back({{"item", item_name(p, item)}, {"dimension", dim}});
    out["dim_variables"] = dims;
    out["selected_lambda"] = res.network.selected_lambda;
    out["ebic"] = res.network.ebic;
    out["modularity"] = res.communities.modularity;
    std::ostringstream e;
    e << "item_i,item_j,weight\n";
    for (const auto& [i, j] : res.network.edges)
      e << ega::csv_field(item_name(p, i)) << ',' << ega::csv_field(item_name(p, j)) << ','
        << ega::format_number(res.network.weights(i, j)) << '\n';
    edges = e.str();
  } else {
    const auto est = run_method(*method, p, c);
    out["k_hat"] = est.k_hat;
    json stats = json::object();
    for (const auto& [name, values] : est.statistics) stats[name] = vector_json(values);
    out["statistics"] = stats;
    if (*method == ega::Method::pa) out["seed"] = c.seed;
  }
  const std::string text = out.dump(2) + "\n";
  if (prefix.empty()) {
    std::cout << text;
  } else {
    write_file(prefix + ".json", text);
    if (!edges.empty()) write_file(prefix + "_edges.csv", edges);
  }
  return kOk;
}

int cmd_compare(const std::string& path, const std::string& correlation, const std::string& prefix,
                const Common& c) {
  const Prepared p = prepare(path, correlation, c);
  json summary;
  summary["n"] = p.n;
  summary["p"] = p.table.values.cols();
  json k_hat = json::object();
  json failures = json::object();
  std::map<std::string, std::vector<double>> columns;
  for (ega::Method m : ega::kAllMethods) {
    const std::string name = ega::to_string(m);
    try {
      if (m == ega::Method::ega) {
        k_hat[name] = ega::ega_from_correlation(p.r, p.n, {c.gamma, c.steps, c.n_lambda}).ndim;
        continue;
      }
      if (m == ega::Method::bic || m == ega::Method::ebic) {
        const auto info = ega::information_select(p.fit_r, p.n, {c.kmax, c.gamma});
        const auto& est = m == ega::Method::bic ? info.first : info.second;
        k_hat[name] = est.k_hat;
        columns[name] = est.statistics.at(name);
        continue;
      }
      const auto est = run_method(m, p, c);
      k_hat[name] = est.k_hat;
      if (m == ega::Method::pa) {
        columns["observed"] = est.statistics.at("observed");
        columns["reference"] = est.statistics.at("reference");
      } else if (m != ega::Method::kaiser) {
        columns[name] = est.statistics.at(name);
      }
    } catch (const ega::Error& e) {
      k_hat[name] = nullptr;
      failures[name] = e.what();
    }
  }
  summary["k_hat"] = k_hat;
  summary["failures"] = failures;

  const std::vector<std::string> order{"vss", "map", "bic", "ebic", "observed", "reference"};
  std::ostringstream table;
  table << "k";
  for (const auto& col : order) table << ',' << col;
  table << '\n';
  for (int k = 1; k <= c.kmax; ++k) {
    table << k;
    for (const auto& col : order) {
      const auto it = columns.find(col);
      const bool present = it != columns.end() && static_cast<int>(it->second.size()) >= k;
      table << ',' << (present ? ega::format_number(it->second[k - 1]) : "");
    }
    table << '\n';
  }
  json stats = json::object();
  for (const auto& col : order)
    if (columns.count(col)) {
      auto v = columns[col];
      if (static_cast<int>(v.size()) > c.kmax) v.resize(c.kmax);
      stats[col] = vector_json(v);
    }
  summary["statistics"] = stats;

  if (prefix.empty()) {
    std::cout << table.str();
    for (const auto& [name, k] : k_hat.items()) std::cout << "# " << name << " k_hat = " << k.dump() << '\n';
  } else {
    write_file(prefix + ".csv", table.str());
    write_file(prefix + ".json", summary.dump(2) + "\n");
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config;
  std::string grid;
  std::vector<int> factors{2}, items{5}, sizes{1000};
  std::vector<double> corrs{0.0};
  int reps = 10;
  std::string methods = "vss,map,bic,ebic,kaiser,pa,ega";
  std::string group_by = "n_factors,items_per_factor,n,corr";
  std::string prefix = "simulation";
  int threads = 0;
};

template <typename T>
T field(const json& obj, const std::string& key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ega::InputError("config: " + where + "." + key + " has the wrong type");
  }
}

void apply_config(const std::string& path, SimulateArgs& a, Common& c) {
  std::ifstream in(path);
  if (!in) throw ega::InputError("cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ega::InputError(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) throw ega::InputError("config: top level must be an object");
  static const std::set<std::string> known{"grid", "factors", "items", "n", "corr", "reps", "seed",
                                           "methods", "gamma", "n_lambda", "steps", "kmax", "pa_iter",
                                           "eigen", "fit_correlation", "group_by", "output", "threads"};
  for (const auto& [key, value] : cfg.items())
    if (!known.count(key)) throw ega::InputError("config: unknown field config." + key);
  a.grid = field<std::string>(cfg, "grid", "config", a.grid);
  a.factors = field<std::vector<int>>(cfg, "factors", "config", a.factors);
  a.items = field<std::vector<int>>(cfg, "items", "config", a.items);
  a.sizes = field<std::vector<int>>(cfg, "n", "config", a.sizes);
  a.corrs = field<std::vector<double>>(cfg, "corr", "config", a.corrs);
  a.reps = field<int>(cfg, "reps", "config", a.reps);
  c.seed = field<std::uint64_t>(cfg, "seed", "config", c.seed);
  if (cfg.contains("methods")) {
    const auto list = field<std::vector<std::string>>(cfg, "methods", "config", {});
    a.methods.clear();
    for (const auto& m : list) a.methods += (a.methods.empty() ? "" : ",") + m;
  }
  c.gamma = field<double>(cfg, "gamma", "config", c.gamma);
  c.n_lambda = field<int>(cfg, "n_lambda", "config", c.n_lambda);
  c.steps = field<int>(cfg, "steps", "config", c.steps);
  c.kmax = field<int>(cfg, "kmax", "config", c.kmax);
  c.pa_iter = field<int>(cfg, "pa_iter", "config", c.pa_iter);
  c.eigen = field<std::string>(cfg, "eigen", "config", c.eigen);
  c.fit_correlation = field<std::string>(cfg, "fit_correlation", "config", c.fit_correlation);
  a.group_by = field<std::string>(cfg, "group_by", "config", a.group_by);
  a.prefix = field<std::string>(cfg, "output", "config", a.prefix);
  a.threads = field<int>(cfg, "threads", "config", a.threads);

  if (a.reps < 1) throw ega::InputError("config: config.reps must be >= 1");
  if (c.gamma < 0) throw ega::InputError("config: config.gamma must be >= 0");
  if (c.eigen != "factor" && c.eigen != "component")
    throw ega::InputError("config: config.eigen must be 'factor' or 'component'");
  if (c.fit_correlation != "pearson" && c.fit_correlation != "tetrachoric")
    throw ega::InputError("config: config.fit_correlation must be 'pearson' or 'tetrachoric'");
  if (!a.grid.empty() && a.grid != "full" && a.grid != "paper") throw ega::InputError("config: config.grid must be 'full'");
  for (std::size_t i = 0; i < a.sizes.size(); ++i)
    if (a.sizes[i] < 3) throw ega::InputError("config: config.n[" + std::to_string(i) + "] must be >= 3");
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

int cmd_simulate(SimulateArgs a, Common c) {
  if (!a.config.empty()) apply_config(a.config, a, c);
  ega::StudyOptions opt;
  opt.methods.clear();
  for (const auto& name : split(a.methods)) {
    const auto m = ega::parse_method(name);
    if (!m) throw ega::InputError("unknown method '" + name + "'");
    opt.methods.push_back(*m);
  }
  if (opt.methods.empty()) throw ega::InputError("no methods requested");
  opt.reps = a.reps;
  opt.base_seed = c.seed;
  opt.gamma = c.gamma;
  opt.steps = c.steps;
  opt.n_lambda = c.n_lambda;
  opt.kmax = c.kmax;
  opt.pa_iter = c.pa_iter;
  opt.eigen_kind = eigen_kind(c.eigen);
  opt.fit_correlation = correlation_kind(c.fit_correlation);
  opt.threads = a.threads;
  if (opt.threads < 1) {
    const char* env = std::getenv("EGA_THREADS");
    opt.threads = env ? std::max(1, std::atoi(env)) : 1;
  }

  std::vector<ega::SimulationCondition> conditions;
  if (a.grid == "full" || a.grid == "paper") {
    conditions = ega::condition_grid();
  } else {
    for (int f : a.factors)
      for (int i : a.items)
        for (int n : a.sizes)
          for (double r : a.corrs) conditions.push_back({f, i, n, r});
  }
  for (const auto& cond : conditions) cond.spec().validate();

  ega::Grouping grouping{false, false, false, false};
  for (const auto& g : split(a.group_by)) {
    if (g == "n_factors") grouping.n_factors = true;
    else if (g == "items_per_factor") grouping.items_per_factor = true;
    else if (g == "n") grouping.sample_size = true;
    else if (g == "corr") grouping.factor_corr = true;
    else throw ega::InputError("unknown --group-by field '" + g + "'");
  }

  const auto start = std::chrono::steady_clock::now();
  const auto records = ega::run_study(conditions, opt);
  const auto rows = ega::aggregate(records, grouping);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream csv;
  csv << "n_factors,items_per_factor,n,corr,method,n_reps,acc_mean,acc_sd,mbe_mean,mbe_sd,mae_mean,mae_sd,"
         "failures\n";
  auto opt_int = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& row : rows) {
    csv << opt_int(row.key.n_factors) << ',' << opt_int(row.key.items_per_factor) << ','
        << opt_int(row.key.sample_size) << ','
        << (row.key.factor_corr ? ega::format_number(*row.key.factor_corr) : "") << ','
        << ega::to_string(row.method) << ',' << row.n_reps << ',' << ega::format_number(row.acc_mean) << ','
        << ega::format_number(row.acc_sd) << ',' << ega::format_number(row.mbe_mean) << ','
        << ega::format_number(row.mbe_sd) << ',' << ega::format_number(row.mae_mean) << ','
        << ega::format_number(row.mae_sd) << ',' << row.failures << '\n';
  }

  json manifest;
  manifest["seed"] = c.seed;
  manifest["seed_scheme"] = "base_seed + condition_index * 1000000 + rep_index";
  manifest["reps"] = a.reps;
  json conds = json::array();
  for (const auto& cond : conditions) {
    const int g = ega::grid_index(cond);
    conds.push_back({{"n_factors", cond.n_factors},
                     {"items_per_factor", cond.items_per_factor},
                     {"n", cond.sample_size},
                     {"corr", cond.factor_corr},
                     {"grid_index", g >= 0 ? json(g) : json(nullptr)}});
  }
  manifest["conditions"] = conds;
  json methods = json::array();
  for (auto m : opt.methods) methods.push_back(ega::to_string(m));
  manifest["methods"] = methods;
  manifest["parameters"] = {{"gamma", c.gamma},     {"n_lambda", c.n_lambda}, {"steps", c.steps},
                            {"kmax", c.kmax},       {"pa_iter", c.pa_iter},   {"eigen", c.eigen},
                            {"fit_correlation", c.fit_correlation},          {"group_by", a.group_by}};
  manifest["threads"] = opt.threads;
  manifest["wall_time_seconds"] = wall;
  manifest["summary_csv"] = a.prefix + ".csv";

  write_file(a.prefix + ".csv", csv.str());
  write_file(a.prefix + "_manifest.json", manifest.dump(2) + "\n");
  return kOk;
}

int cmd_generate(int factors, int items, int n, double corr, std::uint64_t seed, const std::string& out) {
  const ega::SimulationCondition cond{factors, items, n, corr};
  const auto data = ega::dichotomize(ega::sample_dataset(ega::build_implied_sigma(cond.spec()), n, seed));
  ega::DataTable table;
  for (int j = 0; j < cond.spec().n_items(); ++j) table.header.push_back("x" + std::to_string(j + 1));
  table.values = data.values.cast<double>();
  std::ostringstream text;
  ega::write_csv(text, table);
  if (out.empty())
    std::cout << text.str();
  else
    write_file(out, text.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exploratory graph analysis and factor-retention methods"};
  app.require_subcommand(1);

  Common common;
  std::string path, method = "ega", correlation = "auto", prefix;

  auto* fit = app.add_subcommand("fit", "estimate dimensionality of a CSV dataset");
  fit->add_option("csv", path, "rows = observations, columns = items, header required")->required();
  fit->add_option("--method", method, "ega, vss, map, bic, ebic, kaiser or pa")
      ->check(CLI::IsMember({"ega", "vss", "map", "bic", "ebic", "kaiser", "pa"}));
  fit->add_option("--correlation", correlation, "auto, pearson or tetrachoric")
      ->check(CLI::IsMember({"auto", "pearson", "tetrachoric"}));
  fit->add_option("--out", prefix, "write <prefix>.json (and <prefix>_edges.csv) instead of stdout");
  add_common(fit, common);

  auto* compare = app.add_subcommand("compare", "per-k statistics of every method");
  compare->add_option("csv", path)->required();
  compare->add_option("--correlation", correlation)->check(CLI::IsMember({"auto", "pearson", "tetrachoric"}));
  compare->add_option("--out", prefix, "write <prefix>.csv and <prefix>.json instead of stdout");
  add_common(compare, common);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study over factor-model conditions");
  simulate->add_option("--config", sim.config, "JSON run configuration");
  simulate->add_option("--grid", sim.grid, "'full' for the 64-condition design")->check(CLI::IsMember({"full", "paper"}));
  simulate->add_option("--factors", sim.factors)->delimiter(',');
  simulate->add_option("--items", sim.items)->delimiter(',');
  simulate->add_option("--n", sim.sizes)->delimiter(',')->check(CLI::Range(3, 100000000));
  simulate->add_option("--corr", sim.corrs)->delimiter(',');
  simulate->add_option("--reps", sim.reps)->check(CLI::PositiveNumber);
  simulate->add_option("--methods", sim.methods, "comma-separated subset");
  simulate->add_option("--group-by", sim.group_by, "subset of n_factors,items_per_factor,n,corr");
  simulate->add_option("--out", sim.prefix, "writes <prefix>.csv and <prefix>_manifest.json");
  simulate->add_option("--threads", sim.threads, "worker threads (default $EGA_THREADS or 1)");
  add_common(simulate, common);

  int g_factors = 2, g_items = 5, g_n = 500;
  double g_corr = 0.0;
  std::string g_out;
  auto* generate = app.add_subcommand("generate", "write one simulated binary dataset");
  generate->add_option("--factors", g_factors)->check(CLI::PositiveNumber);
  generate->add_option("--items", g_items)->check(CLI::PositiveNumber);
  generate->add_option("--n", g_n)->check(CLI::PositiveNumber);
  generate->add_option("--corr", g_corr);
  generate->add_option("--seed", common.seed);
  generate->add_option("--out", g_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*fit) return cmd_fit(path, method, correlation, prefix, common);
    if (*compare) return cmd_compare(path, correlation, prefix, common);
    if (*simulate) return cmd_simulate(sim, common);
    if (*generate) return cmd_generate(g_factors, g_items, g_n, g_corr, common.seed, g_out);
  } catch (const ega::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const ega::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ega::ConvergenceError& e) {
    std::cerr << "not converged: " << e.what() << '\n';
    return kConvergence;
  }
  return kInput;
}
