// nngp_impute: impute CSVs, run synthetic benchmarks, pool estimates and
// check the kernel against its Monte-Carlo oracle.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nngp/csv.hpp"
#include "nngp/nngp.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

using namespace nngp;

// ---------------------------------------------------------------- helpers

json read_json_arg(const std::string& arg) {
  try {
    if (!arg.empty() && arg.front() == '{') return json::parse(arg);
    std::ifstream in(arg);
    if (!in) throw csv::io_error("cannot open config '" + arg + "'");
    return json::parse(in);
  } catch (const json::exception& e) {
    throw csv::io_error(std::string("invalid JSON config: ") + e.what());
  }
}

// Non-finite values become null.
json number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw csv::io_error(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) throw csv::io_error(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw csv::io_error(what + ": unknown key '" + key + "'");
  }
}

unsigned resolve_threads(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  return threads_from_env();
}

Index column_ref(const std::string& ref, const Dataset& d) {
  if (!ref.empty() && std::all_of(ref.begin(), ref.end(), [](char c) { return std::isdigit(c); })) {
    const Index j = std::stoll(ref) - 1;
    if (j < 0 || j >= d.cols()) throw validation_error("column " + ref + " out of range");
    return j;
  }
  for (std::size_t j = 0; j < d.column_names.size(); ++j)
    if (d.column_names[j] == ref) return static_cast<Index>(j);
  throw validation_error("no column named '" + ref + "'");
}

json network_json(const NetworkConfig& n) {
  return {{"depth", n.depth},
          {"activation", to_string(n.activation)},
          {"weight_variance", n.weight_variance},
          {"bias_variance", n.bias_variance}};
}

const char* to_string(InitMethod m) {
  switch (m) {
    case InitMethod::MiNngp1: return "mi-nngp1";
    case InitMethod::ColumnMean: return "colmean";
    case InitMethod::Provided: return "provided";
  }
  return "?";
}

InitMethod init_from_string(const std::string& s) {
  if (s == "mi-nngp1") return InitMethod::MiNngp1;
  if (s == "colmean") return InitMethod::ColumnMean;
  throw validation_error("unknown init method '" + s + "' (mi-nngp1, colmean)");
}

const char* to_string(Distribution d) {
  switch (d) {
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Exponential: return "exponential";
    case Distribution::StdNormal: return "std-normal";
  }
  return "?";
}

Distribution distribution_from_string(const std::string& s) {
  if (s == "gaussian") return Distribution::Gaussian;
  if (s == "exponential") return Distribution::Exponential;
  if (s == "std-normal") return Distribution::StdNormal;
  throw csv::io_error("unknown distribution '" + s + "'");
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "mcar") return Mechanism::MCAR;
  if (s == "mar") return Mechanism::MAR;
  if (s == "mnar") return Mechanism::MNAR;
  throw csv::io_error("unknown mechanism '" + s + "'");
}

json range_json(const ColumnRange& r) { return json::array({r.first, r.last}); }

ColumnRange range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw csv::io_error("column range must be [first, last]");
  return {j[0].get<Index>(), j[1].get<Index>()};
}

json synth_json(const SynthConfig& c) {
  json j{{"n", c.n},
         {"p", c.p},
         {"rho", c.rho},
         {"noise", {{"dist", to_string(c.noise.kind)}, {"param", c.noise.param}}},
         {"first_col", {{"dist", to_string(c.first_col.kind)}, {"param", c.first_col.param}}},
         {"sigma1", c.sigma1},
         {"q", c.q},
         {"a", c.a},
         {"mechanism", to_string(c.mechanism)},
         {"mcar_rate", c.mcar_rate},
         {"binary_append", c.binary_append},
         {"rearrangement", c.rearrangement == Rearrangement::Fifths ? "fifths" : "tenths"}};
  const auto b = c.masked_blocks();
  j["blocks"] = json::array({range_json(b[0]), range_json(b[1])});
  if (c.mar_drivers) j["mar_drivers"] = range_json(*c.mar_drivers);
  return j;
}

NoiseSpec noise_from_json(const json& j, NoiseSpec base) {
  check_keys(j, {"dist", "param"}, "noise spec");
  if (j.contains("dist")) base.kind = distribution_from_string(j["dist"].get<std::string>());
  take(j, "param", base.param);
  return base;
}

SynthConfig synth_from_json(const json& j) {
  check_keys(j,
             {"preset", "n", "p", "rho", "noise", "first_col", "sigma1", "q", "a", "mechanism", "mcar_rate",
              "binary_append", "rearrangement", "blocks", "mar_drivers"},
             "scenario config");
  SynthConfig c;
  if (j.contains("preset")) {
    const auto name = j["preset"].get<std::string>();
    const auto p = preset(name);
    if (!p) throw csv::io_error("unknown scenario preset '" + name + "'");
    c = *p;
  }
  try {
    take(j, "n", c.n);
    take(j, "p", c.p);
    take(j, "rho", c.rho);
    if (j.contains("noise")) c.noise = noise_from_json(j["noise"], c.noise);
    if (j.contains("first_col")) c.first_col = noise_from_json(j["first_col"], c.first_col);
    take(j, "sigma1", c.sigma1);
    take(j, "q", c.q);
    take(j, "a", c.a);
    if (j.contains("mechanism")) c.mechanism = mechanism_from_string(j["mechanism"].get<std::string>());
    take(j, "mcar_rate", c.mcar_rate);
    take(j, "binary_append", c.binary_append);
    if (j.contains("rearrangement")) {
      const auto r = j["rearrangement"].get<std::string>();
      if (r != "fifths" && r != "tenths") throw csv::io_error("rearrangement must be fifths or tenths");
      c.rearrangement = r == "fifths" ? Rearrangement::Fifths : Rearrangement::Tenths;
    }
    if (j.contains("blocks")) {
      const auto& b = j["blocks"];
      if (!b.is_array() || b.size() != 2) throw csv::io_error("blocks must hold two column ranges");
      c.blocks = std::array<ColumnRange, 2>{range_from_json(b[0]), range_from_json(b[1])};
    }
    if (j.contains("mar_drivers")) c.mar_drivers = range_from_json(j["mar_drivers"]);
  } catch (const json::exception& e) {
    throw csv::io_error(std::string("scenario config: ") + e.what());
  }
  return c;
}

json provenance(const std::string& command, std::uint64_t seed, unsigned threads, json config) {
  return {{"tool", "nngp_impute"},
          {"version", kVersion},
          {"command", command},
          {"seed", seed},
          {"threads", threads},
          {"config", std::move(config)}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw csv::io_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- impute

struct ImputeArgs {
  std::string input;
  std::string out_dir;
  std::string config;
  std::string method = "mi-nngp2";
  std::string init = "mi-nngp1";
  std::string activation = "relu";
  int m = 10;
  int burn_in = 2;
  int thinning = 1;
  int depth = 3;
  double weight_variance = 1.0;
  double bias_variance = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;
  int threads = 0;
  bool header = false;
  bool sort_rows = false;
  bool center = false;
  std::vector<std::string> binary_cols;
};

int cmd_impute(const ImputeArgs& a, const CLI::App& sub) {
  // Config file first, explicit flags override it.
  ImputationConfig cfg;
  std::string method = a.method;
  std::string init = a.init;
  if (!a.config.empty()) {
    const json j = read_json_arg(a.config);
    check_keys(j,
               {"method", "m", "burn_in", "thinning", "seed", "depth", "activation", "weight_variance",
                "bias_variance", "noise", "center", "init"},
               "impute config");
    take(j, "method", method);
    take(j, "m", cfg.m_imputations);
    take(j, "burn_in", cfg.burn_in);
    take(j, "thinning", cfg.thinning);
    take(j, "seed", cfg.seed);
    take(j, "depth", cfg.network.depth);
    if (j.contains("activation")) cfg.network.activation = activation_from_string(j["activation"].get<std::string>());
    take(j, "weight_variance", cfg.network.weight_variance);
    take(j, "bias_variance", cfg.network.bias_variance);
    take(j, "noise", cfg.observation_noise);
    take(j, "center", cfg.center_columns);
    take(j, "init", init);
  }
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--method")) method = a.method;
  if (given("--init")) init = a.init;
  if (given("--m") || a.config.empty()) cfg.m_imputations = a.m;
  if (given("--burn-in") || a.config.empty()) cfg.burn_in = a.burn_in;
  if (given("--thinning") || a.config.empty()) cfg.thinning = a.thinning;
  if (given("--seed") || a.config.empty()) cfg.seed = a.seed;
  if (given("--depth") || a.config.empty()) cfg.network.depth = a.depth;
  if (given("--activation") || a.config.empty()) cfg.network.activation = activation_from_string(a.activation);
  if (given("--weight-variance") || a.config.empty()) cfg.network.weight_variance = a.weight_variance;
  if (given("--bias-variance") || a.config.empty()) cfg.network.bias_variance = a.bias_variance;
  if (given("--noise") || a.config.empty()) cfg.observation_noise = a.noise;
  if (a.center) cfg.center_columns = true;
  cfg.init_method = init_from_string(init);
  cfg.threads = resolve_threads(a.threads);
  const ImputationMethod im = imputation_method_from_string(method);
  cfg.validate();

  Dataset data = csv::read(a.input, a.header);
  if (data.rows() == 0 || data.cols() == 0) throw csv::io_error(a.input + ": no data rows");
  for (const auto& ref : a.binary_cols)
    data.column_kinds[static_cast<std::size_t>(column_ref(ref, data))] = ColumnKind::Binary;
  data.validate();
  for (Index i = 0; i < data.rows(); ++i)
    if (!data.mask.row(i).any())
      throw validation_error("row " + std::to_string(i + 1) + " has no observed values");

  PatternPartition partition = detect_patterns(data);
  IndexList order;
  if (!rows_grouped_by_pattern(partition)) {
    if (!a.sort_rows)
      throw structure_error(
          "rows sharing a missingness pattern are not contiguous; rerun with --sort-rows to group them "
          "(output keeps the original row order)");
    order = pattern_row_order(partition);
    data = select_rows(data, order);
    partition = detect_patterns(data);
  }

  const auto [encoded, encoding] = encode_binary(data);
  const ImputedSet set = impute(encoded, im, cfg);

  const fs::path input(a.input);
  const fs::path dir = a.out_dir.empty() ? input.parent_path() : fs::path(a.out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = (dir / input.stem()).string();
  std::vector<std::string> outputs;
  for (std::size_t m = 0; m < set.imputations.size(); ++m) {
    Eigen::MatrixXd x = decode_binary(set.imputations[m], encoding);
    if (!order.empty()) {
      Eigen::MatrixXd restored(x.rows(), x.cols());
      for (std::size_t t = 0; t < order.size(); ++t) restored.row(order[t]) = x.row(static_cast<Index>(t));
      x = std::move(restored);
    }
    const std::string path = stem + ".imp" + std::to_string(m + 1) + ".csv";
    csv::write(path, x, data.column_names);
    outputs.push_back(path);
  }

  json patterns = json::array();
  for (std::size_t q = 0; q < partition.k(); ++q) {
    IndexList mis;
    for (Index j : partition.mis_cols[q]) mis.push_back(j + 1);
    patterns.push_back({{"pattern", q + 1}, {"rows", partition.rows[q].size()}, {"missing_columns", mis}});
  }
  json seconds = json::object();
  for (const auto& [q, s] : set.diagnostics.pattern_seconds) seconds[std::to_string(q + 1)] = s;
  json config{{"method", method},
              {"m", cfg.m_imputations},
              {"burn_in", cfg.burn_in},
              {"thinning", cfg.thinning},
              {"init", to_string(cfg.init_method)},
              {"network", network_json(cfg.network)},
              {"observation_noise", cfg.observation_noise},
              {"center_columns", cfg.center_columns},
              {"jitter_steps", cfg.jitter.relative_steps},
              {"input", a.input},
              {"header", a.header},
              {"sort_rows", a.sort_rows},
              {"binary_columns", a.binary_cols}};
  json diag{{"provenance", provenance("impute", cfg.seed, cfg.threads, config)},
            {"rows", data.rows()},
            {"columns", data.cols()},
            {"missing_cells", (data.mask.array() == false).count()},
            {"rows_reordered", !order.empty()},
            {"patterns", patterns},
            {"jitter_events", set.diagnostics.jitter_events},
            {"max_jitter", set.diagnostics.max_jitter},
            {"clamped_variances", set.diagnostics.clamped_variances},
            {"bootstrap_retries", set.diagnostics.bootstrap_retries},
            {"pattern_seconds", seconds},
            {"total_seconds", set.diagnostics.total_seconds},
            {"outputs", outputs}};
  write_json(stem + ".diag.json", diag);
  std::cerr << "wrote " << outputs.size() << " imputation(s) and " << stem << ".diag.json\n";
  return 0;
}

// ---------------------------------------------------------------- benchmark

struct BenchArgs {
  std::string scenario;
  std::vector<std::string> methods;
  std::string out;
  int mc = 20;
  std::uint64_t seed = 0;
  int threads = 0;
  int m = 10;
  int burn_in = 10;
  int bs_burn_in = 2;
  Index coefficient = 1;
  double confidence = 0.95;
};

int cmd_benchmark(const BenchArgs& a) {
  SynthConfig config;
  std::string scenario_name = a.scenario;
  if (const auto p = preset(a.scenario)) {
    config = *p;
  } else if (a.scenario.front() == '{' || fs::exists(a.scenario)) {
    config = synth_from_json(read_json_arg(a.scenario));
    scenario_name = "custom";
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += " " + n;
    throw csv::io_error("unknown scenario '" + a.scenario + "'; presets:" + names);
  }
  BenchmarkOptions options;
  if (!a.methods.empty()) {
    options.methods.clear();
    for (const auto& m : a.methods) options.methods.push_back(bench_method_from_string(m));
  }
  options.mc = a.mc;
  options.seed = a.seed;
  options.threads = resolve_threads(a.threads);
  options.m_imputations = a.m;
  options.burn_in = a.burn_in;
  options.bootstrap_burn_in = a.bs_burn_in;
  options.coefficient = a.coefficient;
  options.confidence_level = a.confidence;
  config.validate();

  const auto rows = run_benchmark(config, options);
  const bool discrete = config.binary_append;

  std::ostringstream table;
  table << "scenario,method,style,Time(s),Imp MSE,Bias,CR,SE,SD" << (discrete ? ",Imp accu" : "") << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    table << scenario_name << ',' << to_string(r.method) << ',' << style_of(r.method) << ','
          << csv::format_number(m.wall_seconds_per_imputation) << ','
          << (m.imp_mse ? csv::format_number(*m.imp_mse) : "") << ',' << csv::format_number(m.bias) << ','
          << csv::format_number(m.coverage_rate) << ',' << csv::format_number(m.mean_se) << ','
          << csv::format_number(m.sd_across_mc);
    if (discrete) table << ',' << (m.imp_accuracy ? csv::format_number(*m.imp_accuracy) : "");
    table << '\n';
  }
  json methods = json::array();
  for (auto m : options.methods) methods.push_back(to_string(m));
  json resolved{{"scenario", scenario_name},
                {"synth", synth_json(config)},
                {"mc", options.mc},
                {"methods", methods},
                {"m", options.m_imputations},
                {"burn_in", options.burn_in},
                {"bootstrap_burn_in", options.bootstrap_burn_in},
                {"thinning", options.thinning},
                {"network", network_json(options.network)},
                {"coefficient", options.coefficient},
                {"confidence_level", options.confidence_level}};
  const json prov = provenance("benchmark", options.seed, options.threads, resolved);
  if (a.out.empty()) {
    std::cout << table.str();
    std::cerr << "provenance: " << prov.dump() << '\n';
  } else {
    std::ofstream out(a.out);
    if (!out) throw csv::io_error("cannot write '" + a.out + "'");
    out << table.str();
    write_json(a.out + ".provenance.json", prov);
  }
  return 0;
}

// ---------------------------------------------------------------- pool

struct PoolArgs {
  std::vector<std::string> files;
  std::string response;
  std::vector<std::string> predictors;
  std::string out;
  bool header = false;
  bool no_intercept = false;
  double confidence = 0.95;
};

int cmd_pool(const PoolArgs& a) {
  std::vector<Dataset> sets;
  for (const auto& f : a.files) {
    sets.push_back(csv::read(f, a.header));
    const Dataset& d = sets.back();
    if (d.rows() == 0) throw csv::io_error(f + ": no data rows");
    if (!d.mask.all()) throw validation_error(f + ": imputed file still has missing cells");
    const Dataset& first = sets.front();
    if (d.rows() != first.rows() || d.cols() != first.cols())
      throw dimension_error(f + ": shape " + std::to_string(d.rows()) + "x" + std::to_string(d.cols()) +
                            " differs from " + a.files.front() + " (" + std::to_string(first.rows()) + "x" +
                            std::to_string(first.cols()) + ")");
  }
  RegressionSpec spec;
  spec.response_col = column_ref(a.response, sets.front());
  for (const auto& p : a.predictors) spec.predictor_cols.push_back(column_ref(p, sets.front()));
  spec.intercept = !a.no_intercept;
  std::vector<OlsFit> fits;
  for (const auto& d : sets) fits.push_back(fit_regression(d.values, spec));
  const PooledEstimate pooled = rubin_pool(fits, sets.front().rows(), a.confidence);

  std::vector<std::string> names;
  if (spec.intercept) names.push_back("(intercept)");
  for (std::size_t k = 0; k < a.predictors.size(); ++k) names.push_back(a.predictors[k]);
  json coefs = json::array();
  for (std::size_t k = 0; k < pooled.coefficients.size(); ++k) {
    const auto& c = pooled.coefficients[k];
    coefs.push_back({{"term", names[k]},
                     {"estimate", c.estimate},
                     {"within_variance", c.within_variance},
                     {"between_variance", c.between_variance},
                     {"total_variance", c.total_variance},
                     {"std_error", c.std_error},
                     {"dof", number(c.dof)},
                     {"dof_infinite", std::isinf(c.dof)},
                     {"ci_low", c.ci_low},
                     {"ci_high", c.ci_high}});
  }
  json config{{"files", a.files},
              {"response", a.response},
              {"predictors", a.predictors},
              {"intercept", spec.intercept},
              {"header", a.header}};
  json result{{"provenance", provenance("pool", 0, 1, config)},
              {"m", pooled.m},
              {"n", sets.front().rows()},
              {"confidence_level", pooled.confidence_level},
              {"single_fit", pooled.single_fit},
              {"zero_between_variance", pooled.zero_between},
              {"coefficients", coefs}};
  if (pooled.zero_between)
    std::cerr << "warning: between-imputation variance is zero for every coefficient (identical imputations?)\n";
  if (a.out.empty())
    std::cout << result.dump(2) << '\n';
  else
    write_json(a.out, result);
  return 0;
}

// ---------------------------------------------------------------- kernel-check

struct KernelCheckArgs {
  int cases = 50;
  int min_pass = 48;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
  double z = 4.0;
};

int cmd_kernel_check(const KernelCheckArgs& a) {
  std::mt19937_64 gen(a.seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> dim(2, 20);
  int passed = 0;
  for (int c = 0; c < a.cases; ++c) {
    NetworkConfig net;
    net.depth = 1 + c % 3;
    const int d = dim(gen);
    std::vector<double> x(static_cast<std::size_t>(d)), xp(static_cast<std::size_t>(d));
    for (auto& v : x) v = normal(gen);
    for (auto& v : xp) v = normal(gen);
    const double analytic = kernel_value(x, xp, net);
    const auto mc = mc_oracle_kernel(x, xp, net, a.samples, a.seed * 1000 + static_cast<std::uint64_t>(c));
    const double score = std::abs(analytic - mc.estimate) / mc.std_error;
    const bool ok = score <= a.z;
    passed += ok;
    std::printf("case %2d depth %d dim %2d analytic %.10f oracle %.10f se %.2e z %.2f %s\n", c + 1, net.depth, d,
                analytic, mc.estimate, mc.std_error, score, ok ? "ok" : "miss");
  }
  const bool oracle_ok = passed >= a.min_pass;
  std::printf("%s oracle agreement: %d/%d within %.1f SE (need %d)\n", oracle_ok ? "PASS" : "FAIL", passed, a.cases,
              a.z, a.min_pass);

  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    std::vector<double> x(static_cast<std::size_t>(dim(gen)));
    for (auto& v : x) v = normal(gen);
    NetworkConfig net;
    net.depth = 1;
    const double base = base_kernel(x, x, net);
    for (int l = 1; l <= 3; ++l) {
      net.depth = l;
      worst = std::max(worst, std::abs(kernel_value(x, x, net) - base / std::pow(2.0, l)));
    }
  }
  const bool halving_ok = worst <= 1e-12;
  std::printf("%s diagonal halving: max deviation %.3e (tolerance 1e-12)\n", halving_ok ? "PASS" : "FAIL", worst);
  return oracle_ok && halving_ok ? 0 : 5;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple imputation with neural network Gaussian process kernels"};
  app.set_version_flag("--version", std::string(nngp::kVersion));
  app.require_subcommand(1);

  ImputeArgs ia;
  auto* imp = app.add_subcommand("impute", "Impute a CSV and write <stem>.imp<m>.csv plus <stem>.diag.json");
  imp->add_option("input", ia.input, "Input CSV (empty field or NA marks a missing cell)")->required();
  imp->add_option("--method", ia.method, "mi-nngp1, mi-nngp1-bs, mi-nngp2, mi-nngp2-bs or colmean")
      ->capture_default_str();
  imp->add_option("--m", ia.m, "Number of imputations")->capture_default_str();
  imp->add_option("--burn-in", ia.burn_in, "MI-NNGP2 burn-in cycles")->capture_default_str();
  imp->add_option("--thinning", ia.thinning, "MI-NNGP2 cycles between kept imputations")->capture_default_str();
  imp->add_option("--init", ia.init, "MI-NNGP2 initialization: mi-nngp1 or colmean")->capture_default_str();
  imp->add_option("--depth", ia.depth, "Network depth")->capture_default_str();
  imp->add_option("--activation", ia.activation, "relu or erf")->capture_default_str();
  imp->add_option("--weight-variance", ia.weight_variance)->capture_default_str();
  imp->add_option("--bias-variance", ia.bias_variance)->capture_default_str();
  imp->add_option("--noise", ia.noise, "Observation noise variance added to the observed block")
      ->capture_default_str();
  imp->add_flag("--center", ia.center, "Center columns on observed means before building kernels");
  imp->add_option("--binary-cols", ia.binary_cols, "0/1 columns (1-based index or header name)")
      ->delimiter(',')
      ->allow_extra_args(false);
  imp->add_option("--seed", ia.seed)->capture_default_str();
  imp->add_option("--threads", ia.threads, "Worker threads (default: NNGP_IMPUTE_THREADS or 1)");
  imp->add_flag("--header", ia.header, "First line is a header");
  imp->add_flag("--sort-rows", ia.sort_rows, "Group rows by missingness pattern; output keeps input order");
  imp->add_option("--out-dir", ia.out_dir, "Output directory (default: next to the input)");
  imp->add_option("--config", ia.config, "JSON file or inline object; flags override its values");

  BenchArgs ba;
  auto* bench = app.add_subcommand("benchmark", "Monte-Carlo benchmark on a synthetic scenario");
  bench->add_option("scenario", ba.scenario, "Preset name, JSON file or inline JSON scenario")->required();
  bench->add_option("--mc", ba.mc, "Monte-Carlo replicates")->capture_default_str();
  bench->add_option("--methods", ba.methods,
                    "Subset of mi-nngp1, mi-nngp1-bs, mi-nngp2, mi-nngp2-bs, colmean, complete-case, complete-data")
      ->delimiter(',')
      ->allow_extra_args(false);
  bench->add_option("--m", ba.m, "Imputations per method")->capture_default_str();
  bench->add_option("--burn-in", ba.burn_in, "MI-NNGP2 burn-in")->capture_default_str();
  bench->add_option("--bs-burn-in", ba.bs_burn_in, "Burn-in of each MI-NNGP2-BS track")->capture_default_str();
  bench->add_option("--coefficient", ba.coefficient, "Reported coefficient (1 = first predictor)")
      ->capture_default_str();
  bench->add_option("--confidence", ba.confidence)->capture_default_str();
  bench->add_option("--seed", ba.seed)->capture_default_str();
  bench->add_option("--threads", ba.threads, "Worker threads (default: NNGP_IMPUTE_THREADS or 1)");
  bench->add_option("--out", ba.out, "Write the metrics CSV here (and <out>.provenance.json)");

  PoolArgs pa;
  auto* pool = app.add_subcommand("pool", "Fit OLS on each imputed CSV and pool with Rubin's rules");
  pool->add_option("files", pa.files, "Imputed CSVs")->required();
  pool->add_option("--response", pa.response, "Response column (1-based index or header name)")->required();
  pool->add_option("--predictors", pa.predictors, "Predictor columns")
      ->required()
      ->delimiter(',')
      ->allow_extra_args(false);
  pool->add_flag("--header", pa.header, "Files start with a header line");
  pool->add_flag("--no-intercept", pa.no_intercept);
  pool->add_option("--confidence", pa.confidence)->capture_default_str();
  pool->add_option("--out", pa.out, "Write JSON here instead of stdout");
  int pool_threads = 0;
  std::uint64_t pool_seed = 0;
  pool->add_option("--threads", pool_threads, "Accepted for uniformity; pooling is single-threaded");
  pool->add_option("--seed", pool_seed, "Accepted for uniformity; pooling is deterministic");

  KernelCheckArgs ka;
  auto* kc = app.add_subcommand("kernel-check", "Compare the analytic kernel with its Monte-Carlo oracle");
  kc->add_option("--cases", ka.cases)->capture_default_str();
  kc->add_option("--min-pass", ka.min_pass)->capture_default_str();
  kc->add_option("--samples", ka.samples)->capture_default_str();
  kc->add_option("--z", ka.z, "Allowed deviation in oracle standard errors")->capture_default_str();
  kc->add_option("--seed", ka.seed)->capture_default_str();
  int kc_threads = 0;
  kc->add_option("--threads", kc_threads, "Accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*imp) return cmd_impute(ia, *imp);
    if (*bench) return cmd_benchmark(ba);
    if (*pool) return cmd_pool(pa);
    if (*kc) return cmd_kernel_check(ka);
  } catch (const nngp::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
