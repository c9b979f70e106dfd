#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "c2st/c2st.hpp"
#include "c2st/causal.hpp"
#include "c2st/experiments.hpp"
#include "c2st/io.hpp"
#include "c2st/serialize.hpp"
#include "c2st/two_sample.hpp"

namespace c2st::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kEnvelopeSchema = "c2st.envelope/1";

enum ExitCode : int {
  kOk = 0,
  kReplayMismatch = 1,
  kUsage = 2,
  kFileError = 3,
  kDataError = 4,
  kRuntimeError = 5,
};

/// Invalid flag values or combinations.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline Json make_envelope(const std::string& command, const Json& config, const Json& outcome,
                          double wall_time_s) {
  return {{"schema", kEnvelopeSchema}, {"tool_version", kToolVersion}, {"command", command},
          {"config", config},          {"outcome", outcome},          {"wall_time_s", wall_time_s}};
}

inline TestKind require_test_kind(const std::string& name) {
  const auto kind = parse_test_kind(name);
  if (!kind) {
    throw UsageError("unknown test '" + name + "' (choose c2st-nn, c2st-knn, mmd, ks, kuiper, wmw)");
  }
  return *kind;
}

inline bool is_c2st(TestKind k) { return k == TestKind::C2stNn || k == TestKind::C2stKnn; }

// ---------------------------------------------------------------------------
// test

inline TailMethod parse_tail(const std::string& s) {
  if (s == "auto") return TailMethod::Auto;
  if (s == "asymptotic") return TailMethod::Asymptotic;
  if (s == "exact") return TailMethod::Exact;
  throw UsageError("--tail must be auto, asymptotic or exact");
}

inline const char* tail_name(TailMethod t) {
  switch (t) {
    case TailMethod::Auto: return "auto";
    case TailMethod::Asymptotic: return "asymptotic";
    case TailMethod::Exact: return "exact";
  }
  return "auto";
}

inline TestSettings settings_from_config(const Json& c) {
  TestSettings s;
  s.alpha = c.at("alpha").get<double>();
  s.c2st.alpha = s.alpha;
  s.c2st.train_fraction = c.at("split").get<double>();
  s.c2st.two_sided = c.at("two_sided").get<bool>();
  s.c2st.pvalue_method = c.at("pvalue_method").get<std::string>() == "exact-binomial"
                             ? PValueMethod::ExactBinomial
                             : PValueMethod::Gaussian;
  s.c2st.stratified = c.at("stratified").get<bool>();
  s.c2st.mlp = mlp_hyperparams_from_json(c.at("mlp"));
  if (!c.at("knn_k").is_null()) s.c2st.knn_k = c.at("knn_k").get<std::size_t>();
  if (!c.at("bandwidth").is_null()) s.kernel.bandwidth = c.at("bandwidth").get<double>();
  s.tail = parse_tail(c.at("tail").get<std::string>());
  return s;
}

struct TestRun {
  Json outcome;
  std::optional<C2stOutcome> c2st;
};

/// Runs the test described by a resolved configuration.
inline TestRun execute_test(const Json& config) {
  const TestKind kind = require_test_kind(config.at("test").get<std::string>());
  const Sample x = read_data_file(config.at("x").get<std::string>());
  const Sample y = read_data_file(config.at("y").get<std::string>());
  if (is_univariate_only(kind) && (x.cols() != 1 || y.cols() != 1)) {
    throw UsageError("--test " + std::string(to_string(kind)) +
                     " needs one-column data; got " + std::to_string(x.cols()) + " and " +
                     std::to_string(y.cols()) + " columns");
  }
  if (x.cols() != y.cols()) {
    throw ShapeError("--x has " + std::to_string(x.cols()) + " columns but --y has " +
                     std::to_string(y.cols()));
  }
  const auto settings = settings_from_config(config);
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const Rng rng(seed);

  TestRun run;
  if (is_c2st(kind)) {
    C2stConfig cfg = settings.c2st;
    cfg.classifier = kind == TestKind::C2stNn ? ClassifierKind::NeuralNet
                                              : ClassifierKind::NearestNeighbours;
    cfg.seed = seed;
    auto out = c2st_run(rng, x, y, cfg);
    run.outcome = to_json(out.as_test_outcome());
    run.outcome["n_te"] = out.n_te;
    run.outcome["n_tr"] = out.n_tr;
    run.outcome["classifier"] = std::string(to_string(out.classifier));
    if (config.value("examples", false)) {
      run.outcome["examples"] = Json::array();
      for (const auto& r : out.examples) run.outcome["examples"].push_back(to_json(r));
    }
    run.c2st = std::move(out);
  } else {
    run.outcome = to_json(run_test(kind, rng, x, y, settings));
  }
  run.outcome["seed"] = seed;
  return run;
}

struct TestFlags {
  std::string x, y, test = "c2st-nn";
  std::optional<std::uint64_t> seed;
  double alpha = 0.05;
  double split = 0.5;
  bool two_sided = false;
  bool exact_pvalue = false;
  bool no_stratify = false;
  std::size_t epochs = 100;
  std::size_t hidden = 20;
  std::size_t batch = 128;
  double learning_rate = 1e-3;
  std::optional<std::size_t> knn_k;
  std::optional<double> bandwidth;
  std::string tail = "auto";
  bool examples = false;
};

inline void add_test_flags(CLI::App* cmd, TestFlags& f, bool data_required) {
  auto* x = cmd->add_option("--x", f.x, "First sample: delimiter-separated numeric file");
  auto* y = cmd->add_option("--y", f.y, "Second sample: delimiter-separated numeric file");
  if (data_required) {
    x->required();
    y->required();
  }
  cmd->add_option("--test", f.test, "c2st-nn | c2st-knn | mmd | ks | kuiper | wmw")
      ->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed (drawn from entropy and echoed when omitted)");
  cmd->add_option("--alpha", f.alpha, "Significance level")->capture_default_str();
  cmd->add_option("--split", f.split, "C2ST training fraction of the pooled rows")
      ->capture_default_str();
  cmd->add_flag("--two-sided", f.two_sided, "C2ST: two-sided p-value");
  cmd->add_flag("--exact-pvalue", f.exact_pvalue, "C2ST: exact Binomial(n_te, 1/2) tail");
  cmd->add_flag("--no-stratify", f.no_stratify, "C2ST: cut one shuffled list instead of per label");
  cmd->add_option("--epochs", f.epochs, "C2ST-NN epochs")->capture_default_str();
  cmd->add_option("--hidden", f.hidden, "C2ST-NN hidden units")->capture_default_str();
  cmd->add_option("--batch-size", f.batch, "C2ST-NN mini-batch size")->capture_default_str();
  cmd->add_option("--learning-rate", f.learning_rate, "C2ST-NN Adam step")->capture_default_str();
  cmd->add_option("--knn-k", f.knn_k, "C2ST-KNN neighbours (default floor(sqrt(n_train)))");
  cmd->add_option("--bandwidth", f.bandwidth, "MMD Gaussian bandwidth (default median heuristic)");
  cmd->add_option("--tail", f.tail, "KS/Kuiper/WMW p-value: auto | asymptotic | exact")
      ->capture_default_str();
  cmd->add_flag("--examples", f.examples, "C2ST: include per-example records in the outcome");
}

inline Json resolve_test_config(const TestFlags& f) {
  const TestKind kind = require_test_kind(f.test);
  if (!is_c2st(kind) && (f.two_sided || f.exact_pvalue || f.no_stratify || f.examples)) {
    throw UsageError("--two-sided, --exact-pvalue, --no-stratify and --examples apply to C2ST only");
  }
  if (kind != TestKind::C2stKnn && f.knn_k) throw UsageError("--knn-k applies to c2st-knn only");
  if (kind != TestKind::Mmd && f.bandwidth) throw UsageError("--bandwidth applies to mmd only");
  if (!(f.alpha >= 0.0 && f.alpha <= 1.0)) throw UsageError("--alpha must lie in [0, 1]");
  if (!(f.split > 0.0 && f.split < 1.0)) throw UsageError("--split must lie in (0, 1)");
  parse_tail(f.tail);
  MlpHyperparams hp;
  hp.epochs = f.epochs;
  hp.hidden = f.hidden;
  hp.batch_size = f.batch;
  hp.adam.step = f.learning_rate;
  if (hp.hidden == 0 || hp.batch_size == 0) throw UsageError("--hidden and --batch-size must be >= 1");
  return {{"test", std::string(to_string(kind))},
          {"x", f.x},
          {"y", f.y},
          {"seed", f.seed ? *f.seed : entropy_seed()},
          {"alpha", f.alpha},
          {"split", f.split},
          {"two_sided", f.two_sided},
          {"pvalue_method", f.exact_pvalue ? "exact-binomial" : "gaussian"},
          {"stratified", !f.no_stratify},
          {"mlp", to_json(hp)},
          {"knn_k", f.knn_k ? Json(*f.knn_k) : Json(nullptr)},
          {"bandwidth", f.bandwidth ? Json(*f.bandwidth) : Json(nullptr)},
          {"tail", f.tail},
          {"examples", f.examples}};
}

inline std::string test_summary(const Json& config, const Json& outcome) {
  std::string s;
  s += "test       " + outcome.at("test").get<std::string>() + "\n";
  s += "statistic  " + fixed(outcome.at("statistic").get<double>(), 6) + "\n";
  s += "p-value    " + fixed(outcome.at("p_value").get<double>(), 6) + "\n";
  s += std::string("decision   ") + (outcome.at("reject").get<bool>() ? "reject H0" : "accept H0") +
       " at alpha " + fixed(outcome.at("alpha").get<double>(), 4) + "\n";
  if (outcome.contains("n_te")) {
    s += "n_te       " + std::to_string(outcome.at("n_te").get<std::size_t>()) + "\n";
  }
  s += "seed       " + std::to_string(config.at("seed").get<std::uint64_t>()) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// power

inline Json execute_power(const Json& config) {
  PowerQuery q{config.at("alpha").get<double>(), config.at("n_te").get<std::size_t>(),
               config.at("epsilon").get<double>()};
  return {{"power", c2st_power(q)}};
}

// ---------------------------------------------------------------------------
// bench

struct BenchFlags {
  std::string experiment = "type1";
  std::vector<std::size_t> n;
  std::vector<double> nu, delta, gamma;
  std::optional<std::size_t> fixed_n;
  std::optional<double> fixed_nu, fixed_delta, fixed_gamma;
  bool full_product = false;
  std::size_t trials = 100;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tests;
  double alpha = 0.05;
  bool identity_permutation = false;
  std::size_t workers = 0;
  std::string out = ".";
};

inline Json resolve_bench_config(const BenchFlags& f) {
  const auto experiment = parse_experiment(f.experiment);
  if (!experiment) throw UsageError("--experiment must be type1, gauss-student or sinusoid");
  TrialGrid g = TrialGrid::defaults(*experiment);
  if (!f.n.empty()) g.n_values = f.n;
  if (!f.nu.empty()) g.nu_values = f.nu;
  if (!f.delta.empty()) g.delta_values = f.delta;
  if (!f.gamma.empty()) g.gamma_values = f.gamma;
  if (f.fixed_n) g.fixed.n = *f.fixed_n;
  if (f.fixed_nu) g.fixed.nu = *f.fixed_nu;
  if (f.fixed_delta) g.fixed.delta = *f.fixed_delta;
  if (f.fixed_gamma) g.fixed.gamma = *f.fixed_gamma;
  if (!f.tests.empty()) {
    g.tests.clear();
    for (const auto& t : f.tests) g.tests.push_back(require_test_kind(t));
  }
  g.full_product = f.full_product;
  g.trials = f.trials;
  g.alpha = f.alpha;
  g.identity_permutation = f.identity_permutation;
  try {
    validate(g);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Json tests = Json::array();
  for (auto t : g.tests) tests.push_back(std::string(to_string(t)));
  return {{"experiment", std::string(to_string(g.experiment))},
          {"n", g.n_values},
          {"nu", g.nu_values},
          {"delta", g.delta_values},
          {"gamma", g.gamma_values},
          {"fixed", {{"n", g.fixed.n}, {"nu", g.fixed.nu}, {"delta", g.fixed.delta}, {"gamma", g.fixed.gamma}}},
          {"full_product", g.full_product},
          {"trials", g.trials},
          {"seed", f.seed ? *f.seed : entropy_seed()},
          {"tests", tests},
          {"alpha", g.alpha},
          {"identity_permutation", g.identity_permutation},
          {"workers", f.workers},
          {"out", f.out}};
}

inline TrialGrid grid_from_config(const Json& c) {
  const auto experiment = parse_experiment(c.at("experiment").get<std::string>());
  if (!experiment) throw UsageError("unknown experiment in configuration");
  TrialGrid g;
  g.experiment = *experiment;
  g.n_values = c.at("n").get<std::vector<std::size_t>>();
  g.nu_values = c.at("nu").get<std::vector<double>>();
  g.delta_values = c.at("delta").get<std::vector<double>>();
  g.gamma_values = c.at("gamma").get<std::vector<double>>();
  const auto& fx = c.at("fixed");
  g.fixed = {fx.at("n").get<std::size_t>(), fx.at("nu").get<double>(), fx.at("delta").get<double>(),
             fx.at("gamma").get<double>()};
  g.full_product = c.at("full_product").get<bool>();
  g.trials = c.at("trials").get<std::size_t>();
  g.base_seed = c.at("seed").get<std::uint64_t>();
  for (const auto& t : c.at("tests")) g.tests.push_back(require_test_kind(t.get<std::string>()));
  g.alpha = c.at("alpha").get<double>();
  g.identity_permutation = c.at("identity_permutation").get<bool>();
  g.workers = c.at("workers").get<std::size_t>();
  return g;
}

struct BenchRun {
  Json outcome;
  ErrorTable table;
};

/// Runs the grid and writes <experiment>.tsv and <experiment>.json into the
/// output directory.
inline BenchRun execute_bench(const Json& config) {
  const TrialGrid g = grid_from_config(config);
  BenchRun run;
  run.table = run_grid(g);
  const std::filesystem::path dir = config.at("out").get<std::string>();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FileError("cannot create directory " + dir.string());
  const std::string stem(to_string(g.experiment));
  const auto tsv = dir / (stem + ".tsv");
  const auto json = dir / (stem + ".json");
  const Json table = to_json(run.table);
  write_file_atomic(tsv, to_tsv(run.table));
  write_file_atomic(json, table.dump(2) + "\n");
  run.outcome = {{"table", table}, {"files", {tsv.string(), json.string()}}};
  return run;
}

// ---------------------------------------------------------------------------
// causal

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "X->Y" || s == "x->y" || s == "->") return Direction::XtoY;
  if (s == "Y->X" || s == "y->x" || s == "<-") return Direction::YtoX;
  return std::nullopt;
}

/// Lines "<file name> <X->Y | Y->X>"; blank lines and '#' comments skipped.
inline std::map<std::string, Direction> read_truth_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  std::map<std::string, Direction> truth;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? text.size() : nl + 1;
    ++line_no;
    const auto fields = detail::split_fields(detail::trim(line));
    if (fields.empty() || fields[0].front() == '#') continue;
    const auto dir = fields.size() == 2 ? parse_direction(fields[1]) : std::nullopt;
    if (!dir) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected '<file> X->Y' or '<file> Y->X'");
    }
    truth[std::string(fields[0])] = *dir;
  }
  return truth;
}

inline std::vector<std::filesystem::path> pair_files(const std::filesystem::path& target,
                                                     const std::optional<std::filesystem::path>& truth) {
  std::error_code ec;
  if (!std::filesystem::exists(target, ec)) throw FileError("cannot open " + target.string());
  if (!std::filesystem::is_directory(target, ec)) return {target};
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(target)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (truth && std::filesystem::equivalent(entry.path(), *truth, ec)) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline Json execute_causal(const Json& config) {
  CausalConfig cfg;
  cfg.ensemble = config.at("ensemble").get<std::size_t>();
  cfg.cgan.iterations = config.at("iterations").get<std::size_t>();
  cfg.cgan.hidden = config.at("hidden").get<std::size_t>();
  cfg.cgan.batch_size = config.at("batch_size").get<std::size_t>();
  cfg.scoring = require_test_kind(config.at("scoring").get<std::string>());
  cfg.workers = config.at("workers").get<std::size_t>();
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();

  std::optional<std::filesystem::path> truth_path;
  std::map<std::string, Direction> truth;
  if (!config.at("truth").is_null()) {
    truth_path = config.at("truth").get<std::string>();
    truth = read_truth_file(*truth_path);
  }
  Json records = Json::array();
  std::size_t judged = 0;
  std::size_t correct = 0;
  for (const auto& file : pair_files(config.at("pairs").get<std::string>(), truth_path)) {
    const auto name = file.filename().string();
    const std::uint64_t file_seed = derive_seed(seed, fnv1a(name));
    Json rec = {{"file", name}, {"seed", file_seed}};
    try {
      const Sample pairs = read_data_file(file);
      if (pairs.cols() != 2) {
        throw ShapeError(file.string() + ": expected two columns, found " +
                         std::to_string(pairs.cols()));
      }
      const auto verdict = cause_effect(Rng(file_seed), pairs, cfg);
      rec["verdict"] = to_json(verdict);
      if (const auto it = truth.find(name); it != truth.end()) {
        rec["truth"] = std::string(to_string(it->second));
        rec["correct"] = it->second == verdict.direction;
        ++judged;
        correct += it->second == verdict.direction ? 1 : 0;
      }
    } catch (const std::exception& e) {
      rec["error"] = e.what();
    }
    records.push_back(std::move(rec));
  }
  Json outcome = {{"records", records}};
  if (truth_path) {
    outcome["summary"] = {{"judged", judged},
                          {"correct", correct},
                          {"accuracy", judged ? Json(static_cast<double>(correct) /
                                                     static_cast<double>(judged))
                                              : Json(nullptr)}};
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// interpret

inline std::string ranking_csv(const std::vector<ExampleRecord>& ranked) {
  std::string out = "rank,source,row,label,probability,confidence\n";
  char buf[128];
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    std::snprintf(buf, sizeof buf, "%zu,%s,%zu,%d,%.17g,%.17g\n", i + 1,
                  r.source == 0 ? "x" : "y", r.row, static_cast<int>(r.label), r.probability,
                  r.confidence());
    out += buf;
  }
  return out;
}

/// Examples of one source that the classifier most confidently assigns to
/// that source, most confident first.
inline std::vector<ExampleRecord> most_confident(const std::vector<ExampleRecord>& ranked,
                                                 int source, std::size_t top) {
  std::vector<ExampleRecord> out;
  for (const auto& r : ranked) {
    if (out.size() == top) break;
    const bool agrees = (r.label == 1) == (r.probability > 0.5);
    if (r.source == source && agrees) out.push_back(r);
  }
  return out;
}

inline std::string column_header(std::size_t d, std::string_view first = {}) {
  std::string h(first);
  for (std::size_t j = 0; j < d; ++j) {
    if (!h.empty()) h += ',';
    h += "z" + std::to_string(j + 1);
  }
  return h;
}

/// Writes the interpretation files into `dir`; returns their paths.
inline Json write_interpretation(const InterpretReport& report, const std::filesystem::path& dir,
                                 std::size_t top) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FileError("cannot create directory " + dir.string());
  Json files = Json::array();
  const auto put = [&](const std::string& name, const std::string& content) {
    write_file_atomic(dir / name, content);
    files.push_back((dir / name).string());
  };
  put("ranking.csv", ranking_csv(report.ranked));
  put("most_confident_x.csv", ranking_csv(most_confident(report.ranked, 0, top)));
  put("most_confident_y.csv", ranking_csv(most_confident(report.ranked, 1, top)));
  if (report.features) {
    const auto& f = *report.features;
    const std::size_t d = f.first_layer.cols();
    put("features.csv", format_csv(f.first_layer, column_header(d)));
    std::string summary = column_header(d, "feature,unit") + "\n";
    const auto row = [&](const char* name, const std::string& unit, const std::vector<double>& v) {
      summary += std::string(name) + "," + unit;
      char buf[32];
      for (double x : v) {
        std::snprintf(buf, sizeof buf, ",%.17g", x);
        summary += buf;
      }
      summary += "\n";
    };
    row("positive", std::to_string(f.positive_unit), f.positive);
    row("negative", std::to_string(f.negative_unit), f.negative);
    row("discriminative", "-", f.discriminative);
    put("feature_summary.csv", summary);
  }
  return files;
}

// ---------------------------------------------------------------------------
// driver

inline void emit(std::ostream& out, const Json& envelope) { out << envelope.dump(2) << "\n"; }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Re-executes the command recorded in an envelope and compares outcomes.
inline Json replay_envelope(const Json& envelope) {
  if (envelope.value("schema", "") != kEnvelopeSchema) {
    throw ParseError("not a result envelope (schema " + envelope.value("schema", "?") + ")");
  }
  const auto command = envelope.at("command").get<std::string>();
  const auto& config = envelope.at("config");
  Json outcome;
  if (command == "test") {
    outcome = execute_test(config).outcome;
  } else if (command == "power") {
    outcome = execute_power(config);
  } else if (command == "bench") {
    outcome = execute_bench(config).outcome;
  } else if (command == "causal") {
    outcome = execute_causal(config);
  } else {
    throw ParseError("envelope command '" + command + "' cannot be replayed");
  }
  return {{"command", command}, {"identical", outcome == envelope.at("outcome")}, {"outcome", outcome}};
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Classifier two-sample tests, baselines, experiments and cause-effect discovery"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  TestFlags test_flags;
  bool test_table = false;
  std::string test_out;
  std::string save_model;
  auto* test = app.add_subcommand("test", "Run one two-sample test on two data files");
  add_test_flags(test, test_flags, true);
  test->add_flag("--table", test_table, "Human-readable summary instead of the JSON envelope");
  test->add_flag("--json", "Structured envelope on standard output (default)");
  test->add_option("--out", test_out, "Also write the envelope to DIR/envelope.json");
  test->add_option("--save-model", save_model, "C2ST: write the trained classifier and held-out records");

  double power_alpha = 0.05;
  std::size_t power_n = 0;
  double power_eps = 0.0;
  bool power_json = false;
  auto* power = app.add_subcommand("power", "Approximate C2ST power for an effect size");
  power->add_option("--alpha", power_alpha, "Significance level")->capture_default_str();
  power->add_option("--n-te", power_n, "Test-set size")->required();
  power->add_option("--epsilon", power_eps, "Effect size in (0, 1/2)")->required();
  power->add_flag("--json", power_json, "Print the envelope instead of the bare value");

  BenchFlags bench_flags;
  bool bench_table = false;
  auto* bench = app.add_subcommand("bench", "Run a synthetic error-rate experiment");
  bench->add_option("--experiment", bench_flags.experiment, "type1 | gauss-student | sinusoid")
      ->capture_default_str();
  bench->add_option("--n", bench_flags.n, "Sample sizes (comma-separated)")->delimiter(',');
  bench->add_option("--nu", bench_flags.nu, "Student-t degrees of freedom")->delimiter(',');
  bench->add_option("--delta", bench_flags.delta, "Sinusoid frequencies")->delimiter(',');
  bench->add_option("--gamma", bench_flags.gamma, "Sinusoid noise levels")->delimiter(',');
  bench->add_option("--fixed-n", bench_flags.fixed_n, "n held while other axes vary (2000)");
  bench->add_option("--fixed-nu", bench_flags.fixed_nu, "nu held while n varies (3)");
  bench->add_option("--fixed-delta", bench_flags.fixed_delta, "delta held fixed (1)");
  bench->add_option("--fixed-gamma", bench_flags.fixed_gamma, "gamma held fixed (0.25)");
  bench->add_flag("--full-product", bench_flags.full_product, "Cartesian product of all axes");
  bench->add_option("--trials", bench_flags.trials, "Trials per cell")->capture_default_str();
  bench->add_option("--seed", bench_flags.seed, "Base seed (drawn from entropy and echoed when omitted)");
  bench->add_option("--tests", bench_flags.tests, "Tests to run (comma-separated)")->delimiter(',');
  bench->add_option("--alpha", bench_flags.alpha, "Significance level")->capture_default_str();
  bench->add_flag("--identity-permutation", bench_flags.identity_permutation,
                  "Sinusoid: skip the permutation (both samples identical)");
  bench->add_option("--workers", bench_flags.workers, "Threads (0 = all cores)")->capture_default_str();
  bench->add_option("--out", bench_flags.out, "Directory for the table files")->capture_default_str();
  bench->add_flag("--table", bench_table, "Print the TSV table instead of the envelope");
  bench->add_flag("--json", "Structured envelope on standard output (default)");

  std::string causal_pairs;
  std::optional<std::string> causal_truth;
  std::size_t causal_ensemble = 10;
  CganHyperparams causal_hp;
  std::string causal_scoring = "c2st-knn";
  std::optional<std::uint64_t> causal_seed;
  std::size_t causal_workers = 0;
  std::string causal_out;
  bool causal_table = false;
  auto* causal = app.add_subcommand("causal", "Cause-effect direction for two-column pair files");
  causal->add_option("--pairs", causal_pairs, "Pair file or directory of pair files")->required();
  causal->add_option("--truth", causal_truth, "Lines '<file> X->Y|Y->X' for an accuracy summary");
  causal->add_option("--ensemble", causal_ensemble, "CGANs per direction")->capture_default_str();
  causal->add_option("--iterations", causal_hp.iterations, "Training iterations per CGAN")
      ->capture_default_str();
  causal->add_option("--hidden", causal_hp.hidden, "Hidden units per network")->capture_default_str();
  causal->add_option("--batch-size", causal_hp.batch_size, "Mini-batch size")->capture_default_str();
  causal->add_option("--scoring", causal_scoring, "c2st-knn | c2st-nn | mmd")->capture_default_str();
  causal->add_option("--seed", causal_seed, "Base seed (drawn from entropy and echoed when omitted)");
  causal->add_option("--workers", causal_workers, "Threads (0 = all cores)")->capture_default_str();
  causal->add_option("--out", causal_out, "Also write the envelope to DIR/causal.json");
  causal->add_flag("--table", causal_table, "One line per pair instead of the envelope");
  causal->add_flag("--json", "Structured envelope on standard output (default)");

  TestFlags interp_flags;
  std::string interp_model;
  std::string interp_out = "interpret";
  std::size_t interp_top = 10;
  auto* interp = app.add_subcommand("interpret", "Rank held-out examples and export network features");
  add_test_flags(interp, interp_flags, false);
  interp->add_option("--model", interp_model, "File written by 'test --save-model'");
  interp->add_option("--out", interp_out, "Output directory")->capture_default_str();
  interp->add_option("--top", interp_top, "Examples per most-confident file")->capture_default_str();

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in an envelope and compare");
  replay->add_option("envelope", replay_path, "Envelope JSON file")->required();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsage;
    }
    const auto t0 = std::chrono::steady_clock::now();

    if (*test) {
      const Json config = resolve_test_config(test_flags);
      if (!save_model.empty() && !is_c2st(require_test_kind(test_flags.test))) {
        throw UsageError("--save-model needs a C2ST test (c2st-nn or c2st-knn)");
      }
      const auto run = execute_test(config);
      const Json envelope = make_envelope("test", config, run.outcome, seconds_since(t0));
      if (!save_model.empty()) write_file_atomic(save_model, interpretation_bundle(*run.c2st).dump() + "\n");
      if (!test_out.empty()) {
        std::filesystem::create_directories(test_out);
        write_file_atomic(std::filesystem::path(test_out) / "envelope.json", envelope.dump(2) + "\n");
      }
      if (test_table) {
        out << test_summary(config, run.outcome);
      } else {
        emit(out, envelope);
      }
      return kOk;
    }

    if (*power) {
      if (!(power_alpha > 0.0 && power_alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
      if (power_n == 0) throw UsageError("--n-te must be >= 1");
      if (!(power_eps > 0.0 && power_eps < 0.5)) throw UsageError("--epsilon must lie in (0, 1/2)");
      const Json config = {{"alpha", power_alpha}, {"n_te", power_n}, {"epsilon", power_eps}};
      const Json outcome = execute_power(config);
      if (power_json) {
        emit(out, make_envelope("power", config, outcome, seconds_since(t0)));
      } else {
        out << fixed(outcome.at("power").get<double>(), 6) << "\n";
      }
      return kOk;
    }

    if (*bench) {
      const Json config = resolve_bench_config(bench_flags);
      const auto run = execute_bench(config);
      if (bench_table) {
        out << to_tsv(run.table);
      } else {
        emit(out, make_envelope("bench", config, run.outcome, seconds_since(t0)));
      }
      return kOk;
    }

    if (*causal) {
      const auto scoring = require_test_kind(causal_scoring);
      if (scoring != TestKind::C2stKnn && scoring != TestKind::C2stNn && scoring != TestKind::Mmd) {
        throw UsageError("--scoring must be c2st-knn, c2st-nn or mmd");
      }
      if (causal_ensemble == 0) throw UsageError("--ensemble must be >= 1");
      if (causal_hp.hidden == 0 || causal_hp.batch_size == 0) {
        throw UsageError("--hidden and --batch-size must be >= 1");
      }
      const Json config = {{"pairs", causal_pairs},
                           {"truth", causal_truth ? Json(*causal_truth) : Json(nullptr)},
                           {"ensemble", causal_ensemble},
                           {"iterations", causal_hp.iterations},
                           {"hidden", causal_hp.hidden},
                           {"batch_size", causal_hp.batch_size},
                           {"scoring", causal_scoring},
                           {"seed", causal_seed ? *causal_seed : entropy_seed()},
                           {"workers", causal_workers}};
      const Json outcome = execute_causal(config);
      const Json envelope = make_envelope("causal", config, outcome, seconds_since(t0));
      if (!causal_out.empty()) {
        std::filesystem::create_directories(causal_out);
        write_file_atomic(std::filesystem::path(causal_out) / "causal.json", envelope.dump(2) + "\n");
      }
      if (causal_table) {
        for (const auto& r : outcome.at("records")) {
          out << r.at("file").get<std::string>() << "\t";
          if (r.contains("error")) {
            out << "error: " << r.at("error").get<std::string>() << "\n";
            continue;
          }
          const auto& v = r.at("verdict");
          out << v.at("direction").get<std::string>() << "\tt_xy=" << fixed(v.at("t_xy").get<double>(), 6)
              << "\tt_yx=" << fixed(v.at("t_yx").get<double>(), 6);
          if (r.contains("truth")) out << "\ttruth=" << r.at("truth").get<std::string>();
          out << "\n";
        }
        if (outcome.contains("summary") && !outcome["summary"]["accuracy"].is_null()) {
          out << "accuracy " << fixed(outcome["summary"]["accuracy"].get<double>(), 4) << " ("
              << outcome["summary"]["correct"].get<std::size_t>() << "/"
              << outcome["summary"]["judged"].get<std::size_t>() << ")\n";
        }
      } else {
        emit(out, envelope);
      }
      return kOk;
    }

    if (*interp) {
      InterpretReport report;
      Json config;
      if (!interp_model.empty()) {
        if (!interp_flags.x.empty() || !interp_flags.y.empty()) {
          throw UsageError("give either --model or --x/--y, not both");
        }
        Json bundle;
        try {
          bundle = Json::parse(read_text_file(interp_model));
        } catch (const Json::parse_error& e) {
          throw ParseError(interp_model + ": " + e.what());
        }
        try {
          report = interpret_bundle(bundle_from_json(bundle));
        } catch (const std::exception& e) {
          throw UsageError(interp_model + ": " + e.what());
        }
        config = {{"model", interp_model}};
      } else {
        if (interp_flags.x.empty() || interp_flags.y.empty()) {
          throw UsageError("interpret needs --model or both --x and --y");
        }
        if (!is_c2st(require_test_kind(interp_flags.test))) {
          throw UsageError("interpret needs a C2ST classifier; " + interp_flags.test +
                           " trains none");
        }
        config = resolve_test_config(interp_flags);
        report = c2st_interpret(*execute_test(config).c2st);
      }
      config["out"] = interp_out;
      config["top"] = interp_top;
      const Json files = write_interpretation(report, interp_out, interp_top);
      emit(out, make_envelope("interpret", config, {{"files", files}}, seconds_since(t0)));
      return kOk;
    }

    if (*replay) {
      Json envelope;
      try {
        envelope = Json::parse(read_text_file(replay_path));
      } catch (const Json::parse_error& e) {
        throw ParseError(replay_path + ": " + e.what());
      }
      const Json result = replay_envelope(envelope);
      emit(out, result);
      return result.at("identical").get<bool>() ? kOk : kReplayMismatch;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FileError& e) {
    err << "error: " << e.what() << "\n";
    return kFileError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kFileError;
  } catch (const Json::exception& e) {
    err << "error: malformed record: " << e.what() << "\n";
    return kFileError;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const DegenerateDataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsage;
}

}  // namespace c2st::cli
