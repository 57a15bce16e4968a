#include "cli.hpp"

#include "sigmaforge/classifiers.hpp"
#include "sigmaforge/flowdata.hpp"
#include "sigmaforge/ganattack.hpp"
#include "sigmaforge/parallel.hpp"
#include "sigmaforge/random.hpp"
#include "sigmaforge/sigma.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigmaforge::cli {
namespace {

namespace fs = std::filesystem;

// Bad flag combinations found after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  bool synthetic = false;
  std::string csv;
  std::string data_dir;
  std::size_t n = 400;
  double separation = 3.0;
  double test_fraction = 0.1;
  std::string label_column = "Label";
  std::string aliases;
};

struct SizingOptions {
  int gan_attempts = 5;
  std::size_t max_noise = 10;
  int gan_epochs = 30;
  int surrogate_refit_epochs = 3;
  std::size_t reference_cap = 0;
  std::size_t population = 30;
  int generations = 500;
  int patience = 50;
  std::size_t archive_cap = 0;
};

struct Common {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out = "sigma-forge-out";
};

struct Prepared {
  DatasetSplit split;
  NormalizationParams norm;
  FunctionalMask mask;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

fs::path output_dir(const Common& common) {
  if (const char* env = std::getenv("SIGMA_FORGE_OUT"); env != nullptr && *env != '\0') return env;
  return common.out;
}

std::vector<AttackGroup> parse_groups(const std::vector<std::string>& names) {
  std::vector<AttackGroup> groups;
  for (const std::string& n : names) {
    if (n == "all") return {std::begin(kAllGroups), std::end(kAllGroups)};
    groups.push_back(parse_attack_group(n));
  }
  return groups;
}

std::vector<ClassifierVariant> parse_variants(const std::string& name) {
  if (name == "all") return {std::begin(kAllVariants), std::end(kAllVariants)};
  return {parse_classifier_variant(name)};
}

std::vector<Arm> parse_arms(const std::string& name) {
  if (name == "all") return {std::begin(kAllArms), std::end(kAllArms)};
  return {parse_arm(name)};
}

ColumnAliases read_aliases(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read aliases file '" + path + "'");
  return nlohmann::json::parse(in).get<ColumnAliases>();
}

// Synthesizes or loads, splits, then normalizes with train-set statistics.
Prepared build_dataset(const DataOptions& data, AttackGroup group, std::uint64_t seed) {
  const std::uint64_t data_seed = derive_seed(seed, "data");
  FeatureMatrix all;
  ColumnAliases aliases;
  if (data.synthetic) {
    all = synth_dataset(group, data.n, data.separation, data_seed);
  } else {
    const RawFlowTable table = drop_constant_columns(load_csv(data.csv, data.label_column));
    all = build_binary_dataset(table, group, data_seed);
    aliases = read_aliases(data.aliases);
  }
  Prepared p;
  p.split = split_train_test(all, data.test_fraction, derive_seed(data_seed, "split"));
  p.norm = fit_normalizer(p.split.train.features);
  p.norm.columns = all.columns;
  p.split.train.features = apply_normalizer(p.norm, p.split.train.features);
  p.split.test.features = apply_normalizer(p.norm, p.split.test.features);
  p.mask = functional_mask_for(group, all.columns, aliases);
  return p;
}

Prepared load_prepared(const fs::path& dir) {
  for (const char* f : {"train.csv", "test.csv", "mask.json"}) {
    if (!fs::exists(dir / f)) {
      throw std::runtime_error("prepared dataset incomplete: missing '" + (dir / f).string() +
                               "' (run `sigma-forge prepare` first)");
    }
  }
  Prepared p;
  p.split.train = read_feature_csv(dir / "train.csv");
  p.split.test = read_feature_csv(dir / "test.csv");
  std::ifstream mask_in(dir / "mask.json");
  p.mask = FunctionalMask::from_json(nlohmann::json::parse(mask_in));
  return p;
}

Prepared obtain_dataset(const DataOptions& data, const Common& common, AttackGroup group) {
  if (data.synthetic || !data.csv.empty()) return build_dataset(data, group, common.seed);
  const fs::path root = data.data_dir.empty() ? output_dir(common) : fs::path(data.data_dir);
  return load_prepared(root / std::string(to_string(group)));
}

void check_data_flags(const DataOptions& data) {
  if (data.synthetic && !data.csv.empty()) throw UsageError("--synthetic and --csv are mutually exclusive");
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw UsageError("--test-fraction must lie in (0,1)");
  }
}

void add_data_flags(CLI::App* cmd, DataOptions& data, bool with_dir) {
  cmd->add_flag("--synthetic", data.synthetic, "Use the synthetic flow generator instead of a CSV");
  cmd->add_option("--csv", data.csv, "CICIDS2017-style flow CSV")->check(CLI::ExistingFile);
  if (with_dir) cmd->add_option("--data", data.data_dir, "Directory written by `prepare` (default: --out)");
  cmd->add_option("--n", data.n, "Synthetic rows per class")->capture_default_str();
  cmd->add_option("--separation", data.separation, "Synthetic class separation")->capture_default_str();
  cmd->add_option("--test-fraction", data.test_fraction, "Share of rows held out for testing")
      ->capture_default_str();
  cmd->add_option("--label-column", data.label_column, "Label column of the CSV")->capture_default_str();
  cmd->add_option("--aliases", data.aliases, "JSON object mapping mask feature names to CSV column names")
      ->check(CLI::ExistingFile);
}

void add_common_flags(CLI::App* cmd, Common& common) {
  cmd->add_option("--seed", common.seed, "Master seed")->capture_default_str();
  cmd->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--out", common.out, "Output directory (SIGMA_FORGE_OUT overrides)")->capture_default_str();
}

void add_sizing_flags(CLI::App* cmd, SizingOptions& s) {
  cmd->add_option("--gan-attempts", s.gan_attempts, "Generator restarts per noise size")->capture_default_str();
  cmd->add_option("--max-noise", s.max_noise, "Largest generator noise size tried")->capture_default_str();
  cmd->add_option("--gan-epochs", s.gan_epochs, "Generator training epochs")->capture_default_str();
  cmd->add_option("--surrogate-refit-epochs", s.surrogate_refit_epochs, "Surrogate epochs per generator epoch")
      ->capture_default_str();
  cmd->add_option("--reference-cap", s.reference_cap, "Real rows per surrogate refit (0 = all)")
      ->capture_default_str();
  cmd->add_option("--population", s.population, "Hybrid population size")->capture_default_str();
  cmd->add_option("--generations", s.generations, "Hybrid generation cap")->capture_default_str();
  cmd->add_option("--patience", s.patience, "Hybrid generations without improvement before stopping")
      ->capture_default_str();
  cmd->add_option("--archive-cap", s.archive_cap, "Hybrid archive rows used per retraining (0 = all)")
      ->capture_default_str();
}

GanConfig gan_config(const SizingOptions& s, std::uint64_t seed) {
  GanConfig g;
  g.attempts = s.gan_attempts;
  g.max_noise_size = s.max_noise;
  g.train.epochs = s.gan_epochs;
  g.train.seed = derive_seed(seed, "gan");
  g.surrogate_refit_epochs = s.surrogate_refit_epochs;
  g.max_reference_rows = s.reference_cap;
  return g;
}

SigmaConfig sigma_config(const SizingOptions& s, std::uint64_t seed, int iters) {
  SigmaConfig cfg;
  cfg.gan = gan_config(s, seed);
  cfg.hybrid.population_size = s.population;
  cfg.hybrid.max_generations = s.generations;
  cfg.hybrid.patience = s.patience;
  cfg.hybrid.seed = derive_seed(seed, "meta");
  cfg.max_archive_rows = s.archive_cap;
  cfg.fixed_iterations = iters;
  cfg.seed = derive_seed(seed, "sigma");
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json gan_json(const GanConfig& g) {
  return {{"attempts", g.attempts},
          {"max_noise_size", g.max_noise_size},
          {"epochs", g.train.epochs},
          {"batch_size", g.train.batch_size},
          {"learning_rate", g.train.learning_rate},
          {"hidden", g.hidden},
          {"surrogate_refit_epochs", g.surrogate_refit_epochs},
          {"max_reference_rows", g.max_reference_rows},
          {"seed", g.train.seed}};
}

int cmd_prepare(const DataOptions& data, const Common& common, const std::string& group_name, std::ostream& out) {
  check_data_flags(data);
  if (!data.synthetic && data.csv.empty()) throw UsageError("prepare needs --synthetic or --csv");
  const AttackGroup group = parse_attack_group(group_name);
  const Prepared p = build_dataset(data, group, common.seed);
  const fs::path dir = output_dir(common) / std::string(to_string(group));
  fs::create_directories(dir);
  write_feature_csv(dir / "train.csv", p.split.train);
  write_feature_csv(dir / "test.csv", p.split.test);
  write_json(dir / "normalization.json", p.norm.to_json());
  write_json(dir / "mask.json", p.mask.to_json());
  out << "prepared " << to_string(group) << ": " << p.split.train.rows() << " train / " << p.split.test.rows()
      << " test rows -> " << dir.string() << '\n';
  return 0;
}

int cmd_run(const DataOptions& data, const Common& common, const SizingOptions& sizing, const std::string& group_name,
            const std::string& arm_name, const std::string& variant_name, int iters, bool save_archives,
            std::ostream& out) {
  check_data_flags(data);
  if (iters < 0) throw UsageError("--iters must be >= 0");
  const AttackGroup group = parse_attack_group(group_name);
  const std::vector<Arm> arms = parse_arms(arm_name);
  const std::vector<ClassifierVariant> variants = parse_variants(variant_name);
  SigmaConfig cfg = sigma_config(sizing, common.seed, iters);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Prepared p = obtain_dataset(data, common, group);
  const fs::path dir = output_dir(common);
  fs::create_directories(dir);
  const std::uint64_t classifier_seed = derive_seed(common.seed, "forest");

  std::vector<SigmaState> states;
  nlohmann::json runs = nlohmann::json::array();
  const auto t_start = std::chrono::steady_clock::now();
  for (ClassifierVariant v : variants) {
    const CompositeIds base = make_composite(v, {}, p.split.train, classifier_seed);
    for (Arm arm : arms) {
      SigmaConfig arm_cfg = cfg;
      if (save_archives && arm != Arm::GanOnly) {
        arm_cfg.on_archive = [&, arm, v](int it, const HybridResult& h) {
          write_archive_csv(dir / ("archive_" + std::string(to_string(arm)) + "_" + std::string(to_string(v)) +
                                   "_" + std::to_string(it) + ".csv"),
                            h, p.split.train.columns);
        };
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto result = run_arm(arm, base, p.split, p.mask, arm_cfg);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      nlohmann::json j = result.second.to_json();
      j["wall_seconds"] = secs;
      runs.push_back(std::move(j));
      out << to_string(arm) << '/' << to_string(v) << ": " << result.second.rounds.size() << " rounds, final score "
          << fmt(result.second.rounds.back().gan_score) << '\n';
      states.push_back(std::move(result.second));
    }
  }

  std::ofstream rounds(dir / "rounds.csv");
  rounds << "iteration,arm,variant,score\n";
  for (const SigmaState& s : states) {
    for (const RoundReport& r : s.rounds) {
      rounds << r.iteration << ',' << to_string(s.arm) << ',' << to_string(s.variant) << ',' << fmt(r.gan_score)
             << '\n';
    }
  }
  std::ofstream table(dir / "comparison.csv");
  table << "arm,variant,iterations,first_full,final_score,mean_score,max_drop_after_full,converged_at\n";
  for (const ArmComparison& c : compare_arms(states)) {
    table << to_string(c.arm) << ',' << to_string(c.variant) << ',' << c.iterations << ','
          << (c.first_full ? std::to_string(*c.first_full) : "") << ',' << fmt(c.final_score) << ','
          << fmt(c.mean_score) << ',' << fmt(c.max_drop_after_full) << ','
          << (c.converged_at ? std::to_string(*c.converged_at) : "") << '\n';
  }

  nlohmann::json manifest;
  manifest["command"] = "run";
  manifest["group"] = std::string(to_string(group));
  manifest["seed"] = common.seed;
  manifest["jobs"] = common.jobs;
  manifest["seeds"] = {{"data", derive_seed(common.seed, "data")},
                       {"gan", cfg.gan.train.seed},
                       {"meta", cfg.hybrid.seed},
                       {"forest", classifier_seed},
                       {"sigma", cfg.seed}};
  manifest["config"] = {{"gan", gan_json(cfg.gan)},
                        {"hybrid",
                         {{"population_size", cfg.hybrid.population_size},
                          {"selection_rate", cfg.hybrid.selection_rate},
                          {"mutation_rate", cfg.hybrid.mutation_rate},
                          {"max_generations", cfg.hybrid.max_generations},
                          {"patience", cfg.hybrid.patience}}},
                        {"fixed_iterations", cfg.fixed_iterations},
                        {"max_iterations", cfg.max_iterations},
                        {"max_archive_rows", cfg.max_archive_rows}};
  manifest["runs"] = std::move(runs);
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  write_json(dir / "manifest.json", manifest);
  return 0;
}

int cmd_rq1(const DataOptions& data, const Common& common, const SizingOptions& sizing,
            const std::vector<std::string>& group_names, const std::string& variant_name, std::ostream& out) {
  check_data_flags(data);
  const std::vector<AttackGroup> groups = parse_groups(group_names);
  const std::vector<ClassifierVariant> variants = parse_variants(variant_name);
  const GanConfig gcfg = gan_config(sizing, common.seed);
  try {
    gcfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = output_dir(common);
  fs::create_directories(dir);
  std::ofstream csv(dir / "rq1.csv");
  csv << "variant,group,normal,adversarial\n";
  const std::uint64_t classifier_seed = derive_seed(common.seed, "forest");
  for (AttackGroup group : groups) {
    const Prepared p = obtain_dataset(data, common, group);
    const Matrix train_attacks = p.split.train.select(1);
    const Matrix test_attacks = p.split.test.select(1);
    for (ClassifierVariant v : variants) {
      const CompositeIds ids = make_composite(v, {}, p.split.train, classifier_seed);
      const BatchScorer black_box = ids_scorer(ids);
      const double normal = detection_rate(black_box, test_attacks);
      const auto trained = train_generator(black_box, train_attacks, p.mask, gcfg, &p.split.train.features);
      const double adversarial =
          evasion_rate(black_box, trained.first, test_attacks, derive_seed(derive_seed(common.seed, "sigma"), "rq1"));
      csv << to_string(v) << ',' << to_string(group) << ',' << fmt(normal) << ',' << fmt(adversarial) << '\n';
      out << to_string(v) << '/' << to_string(group) << ": normal " << fmt(normal) << ", adversarial "
          << fmt(adversarial) << '\n';
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial attack generation and IDS hardening for network-flow classifiers", "sigma-forge"};
  app.require_subcommand(1);

  DataOptions data;
  Common common;
  SizingOptions sizing;
  std::string group = "dos";
  std::vector<std::string> groups{"dos"};
  std::string arm = "sigma";
  std::string variant = "all";
  int iters = 7;
  bool save_archives = false;

  const std::vector<std::string> group_names{"dos", "ddos", "bruteforce", "infiltration"};
  const std::vector<std::string> variant_names{"nn",  "rf",     "svm",           "nb",         "mlp",
                                               "neural-net", "random-forest", "linear-svm", "naive-bayes", "all"};

  CLI::App* prepare = app.add_subcommand("prepare", "Build normalized train/test files for one attack group");
  add_data_flags(prepare, data, false);
  add_common_flags(prepare, common);
  prepare->add_option("--group", group, "Attack group")->required()->check(CLI::IsMember(group_names));

  CLI::App* run = app.add_subcommand("run", "Run reinforcement arms and write round reports");
  add_data_flags(run, data, true);
  add_common_flags(run, common);
  add_sizing_flags(run, sizing);
  run->add_option("--group", group, "Attack group")->check(CLI::IsMember(group_names))->capture_default_str();
  run->add_option("--arm", arm, "sigma, gan-only, meta-only or all")
      ->check(CLI::IsMember({"sigma", "gan-only", "meta-only", "all"}))
      ->capture_default_str();
  run->add_option("--classifier", variant, "nn, rf, svm, nb or all")
      ->check(CLI::IsMember(variant_names))
      ->capture_default_str();
  run->add_option("--iters", iters, "Rounds per arm (0 = stop on the convergence counter)")->capture_default_str();
  run->add_flag("--save-archives", save_archives, "Write every hybrid archive as CSV");

  CLI::App* rq1 = app.add_subcommand("rq1", "Detection of dataset attacks vs generated attacks");
  add_data_flags(rq1, data, true);
  add_common_flags(rq1, common);
  add_sizing_flags(rq1, sizing);
  std::vector<std::string> group_choices = group_names;
  group_choices.push_back("all");
  rq1->add_option("--group", groups, "Attack groups (or all)")->check(CLI::IsMember(group_choices));
  rq1->add_option("--classifier", variant, "nn, rf, svm, nb or all")
      ->check(CLI::IsMember(variant_names))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "sigma-forge: " << e.what() << '\n';
    for (CLI::App* sub : app.get_subcommands()) err << sub->help();
    return 2;
  }

  try {
    set_max_jobs(common.jobs);
    if (prepare->parsed()) return cmd_prepare(data, common, group, out);
    if (run->parsed()) return cmd_run(data, common, sizing, group, arm, variant, iters, save_archives, out);
    return cmd_rq1(data, common, sizing, groups, variant, out);
  } catch (const UsageError& e) {
    err << "sigma-forge: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "sigma-forge: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sigmaforge::cli
