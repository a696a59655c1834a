#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mindisc/mindisc.hpp"
#include "run_config.hpp"

namespace mindisc::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kIoError = 3,
  kDiverged = 4,
  kMismatch = 5,
};

/// Raised inside command handlers to leave with a specific exit code.
struct Failure {
  int code;
  std::string message;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidParam:
    case ErrorKind::InvalidSpec:
      return kConfigError;
    case ErrorKind::FileNotFound:
    case ErrorKind::IoError:
    case ErrorKind::MalformedRow:
    case ErrorKind::NonFiniteValue:
    case ErrorKind::CorruptCheckpoint:
    case ErrorKind::VersionMismatch:
      return kIoError;
    case ErrorKind::NonFiniteLoss:
      return kDiverged;
    case ErrorKind::ShapeMismatch:
    case ErrorKind::LabelOutOfRange:
    case ErrorKind::UnlabeledDataset:
    case ErrorKind::EmptyDataset:
    case ErrorKind::DegenerateBatch:
    case ErrorKind::EmptyBatch:
      return kMismatch;
  }
  return kConfigError;
}

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Failure{kConfigError, std::string("missing ") + what + " path"};
  if (!std::filesystem::is_regular_file(path)) {
    throw Failure{kIoError, std::string(what) + " '" + path + "' does not exist"};
  }
}

/// Loads a dataset whose class ids must fit a model with `classes` outputs
/// and whose width must be `width`; any disagreement is a model/data mismatch.
inline Dataset load_for_model(const std::string& path, bool labeled, bool header,
                              std::size_t classes, std::size_t width) {
  Dataset d;
  try {
    d = load_csv(path, {labeled, header, 0});
  } catch (const Error& e) {
    throw Failure{exit_code_for(e.kind()), e.what()};
  }
  if (d.labels) {
    for (std::size_t i = 0; i < d.labels->size(); ++i) {
      if (static_cast<std::size_t>((*d.labels)[i]) >= classes) {
        throw Failure{kMismatch, "'" + path + "' row " + std::to_string(i + 1) + " has label " +
                                     std::to_string((*d.labels)[i]) + " but the model has " +
                                     std::to_string(classes) + " classes"};
      }
    }
  }
  d.num_classes = classes;
  if (d.size() > 0 && d.features.cols() != width) {
    throw Failure{kMismatch, "'" + path + "' has " + std::to_string(d.features.cols()) +
                                 " feature columns but the model expects " +
                                 std::to_string(width)};
  }
  return d;
}

inline void write_or_fail(const std::string& path, const std::string& content) {
  try {
    write_text_file(path, content);
  } catch (const Error& e) {
    throw Failure{kIoError, e.what()};
  }
}

inline Checkpoint read_checkpoint(const std::string& path) {
  require_file(path, "checkpoint");
  try {
    return load_checkpoint(path);
  } catch (const Error& e) {
    throw Failure{kIoError, e.what()};
  }
}

struct ConfigSources {
  std::string file;
  std::vector<std::string> overrides;
};

/// defaults < config file < MINDISC_SEED < --set
inline RunConfig build_config(const ConfigSources& src, const EnvLookup& env) {
  RunConfig cfg;
  try {
    if (!src.file.empty()) {
      if (!std::filesystem::is_regular_file(src.file)) {
        throw Failure{kIoError, "config file '" + src.file + "' does not exist"};
      }
      load_config_file(cfg, src.file);
    }
    if (auto seed = env("MINDISC_SEED")) {
      try {
        cfg.train.seed = mindisc::detail::parse_uint("MINDISC_SEED", *seed);
      } catch (const Error& e) {
        throw Failure{kConfigError, e.what()};
      }
    }
    for (const auto& o : src.overrides) apply_override(cfg, o);
  } catch (const Error& e) {
    throw Failure{exit_code_for(e.kind()), e.what()};
  }
  return cfg;
}

inline void validate_train_config(const TrainConfig& t) {
  try {
    t.validate();
  } catch (const Error& e) {
    throw Failure{kConfigError, e.what()};
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

struct TwoMoonsArgs {
  std::size_t n = 200;
  double noise = 0.15;
  double rotation = 0.0;
  std::uint64_t seed = 1;
  std::string out;
};

inline void cmd_generate_two_moons(const TwoMoonsArgs& a, std::ostream& out) {
  if (a.n < 2) throw Failure{kConfigError, "--n must be at least 2"};
  if (!(a.noise >= 0.0)) throw Failure{kConfigError, "--noise must be >= 0"};
  if (a.out.empty()) throw Failure{kConfigError, "--out is required"};
  Dataset d = gen_two_moons(a.n, a.noise, a.rotation, a.seed);
  detail::write_or_fail(a.out, to_csv(d));
  out << "wrote " << d.size() << " rows, " << d.num_classes << " classes to " << a.out << "\n";
}

struct GaussianArgs {
  std::size_t n = 500;
  std::size_t dim = 2;
  std::vector<double> shift{1.0};
  double cov_scale = 1.0;
  std::size_t classes = 2;
  std::uint64_t seed = 1;
  std::string out;
  std::string out_target;
};

inline void cmd_generate_gaussian(const GaussianArgs& a, std::ostream& out) {
  if (a.classes < 1) throw Failure{kConfigError, "--classes must be at least 1"};
  if (a.n < a.classes) throw Failure{kConfigError, "--n must be at least --classes"};
  if (a.dim < 1) throw Failure{kConfigError, "--dim must be at least 1"};
  if (!(a.cov_scale > 0.0)) throw Failure{kConfigError, "--cov-scale must be > 0"};
  if (a.out.empty() || a.out_target.empty()) {
    throw Failure{kConfigError, "--out and --out-target are required"};
  }
  std::vector<double> shift = a.shift;
  if (shift.size() == 1) shift.assign(a.dim, shift.front());
  if (shift.size() != a.dim) {
    throw Failure{kConfigError, "--shift needs 1 or --dim (" + std::to_string(a.dim) + ") values"};
  }
  auto pair = gen_gaussian_shift(a.n, a.dim, shift, a.cov_scale, a.classes, a.seed);
  detail::write_or_fail(a.out, to_csv(pair.source));
  detail::write_or_fail(a.out_target, to_csv(pair.target));
  out << "wrote " << a.n << " rows, " << a.classes << " classes to " << a.out << " and "
      << a.out_target << "\n";
}

inline void cmd_train(const detail::ConfigSources& src, const EnvLookup& env, std::ostream& out) {
  const RunConfig cfg = detail::build_config(src, env);
  detail::validate_train_config(cfg.train);
  if (cfg.checkpoint.empty()) throw Failure{kConfigError, "missing 'checkpoint' output path"};
  detail::require_file(cfg.source, "source");
  detail::require_file(cfg.target, "target");

  std::optional<Checkpoint> resume;
  if (!cfg.resume.empty()) {
    resume = detail::read_checkpoint(cfg.resume);
    if (!(resume->config == cfg.train)) {
      throw Failure{kConfigError, "resume checkpoint '" + cfg.resume +
                                      "' was trained with a different config"};
    }
  }

  const std::size_t classes = cfg.classes();
  if (classes != cfg.train.widths.back()) {
    throw Failure{kMismatch, "num_classes " + std::to_string(classes) +
                                 " does not match the last layer width " +
                                 std::to_string(cfg.train.widths.back())};
  }
  const std::size_t width = cfg.train.widths.front();
  const Dataset source = detail::load_for_model(cfg.source, true, cfg.header, classes, width);
  const Dataset target =
      detail::load_for_model(cfg.target, cfg.target_labeled, cfg.header, classes, width);

  std::vector<LossReport> history;
  Checkpoint result;
  try {
    Trainer trainer = resume ? Trainer(*resume, source.labeled(), target.unlabeled())
                             : Trainer(cfg.train, source.labeled(), target.unlabeled());
    history = trainer.run(cfg.max_steps == 0 ? trainer.planned_steps() : cfg.max_steps);
    result = trainer.checkpoint();
  } catch (const Error& e) {
    throw Failure{exit_code_for(e.kind()), e.what()};
  }

  try {
    save_checkpoint(result, cfg.checkpoint);
  } catch (const Error& e) {
    throw Failure{kIoError, e.what()};
  }
  if (!cfg.history.empty()) detail::write_or_fail(cfg.history, loss_history_csv(history));

  out << "trained " << history.size() << " steps (total " << result.step << ")";
  if (!history.empty()) out << "; final loss " << format_double(history.back().total);
  out << "\ncheckpoint: " << cfg.checkpoint << "\n";
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  bool header = false;
  std::size_t num_classes = 0;
};

inline void cmd_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ck = detail::read_checkpoint(a.checkpoint);
  detail::require_file(a.data, "data");
  const std::size_t classes = ck.network.num_classes();
  if (a.num_classes != 0 && a.num_classes != classes) {
    throw Failure{kMismatch, "--num-classes " + std::to_string(a.num_classes) +
                                 " but the checkpoint has " + std::to_string(classes) +
                                 " classes"};
  }
  const Dataset d =
      detail::load_for_model(a.data, true, a.header, classes, ck.network.input_dim());
  if (d.size() == 0) throw Failure{kMismatch, "'" + a.data + "' has no rows"};
  out << format_accuracy(accuracy(ck.network, d)) << "\n";
}

struct EmbedArgs {
  std::string checkpoint;
  std::string source;
  std::string target;
  std::string out;
  bool header = false;
  bool unlabeled = false;
};

inline void cmd_embed(const EmbedArgs& a, std::ostream& out) {
  const Checkpoint ck = detail::read_checkpoint(a.checkpoint);
  detail::require_file(a.source, "source");
  detail::require_file(a.target, "target");
  if (a.out.empty()) throw Failure{kConfigError, "--out is required"};
  const std::size_t classes = ck.network.num_classes();
  const std::size_t width = ck.network.input_dim();
  Dataset s = detail::load_for_model(a.source, !a.unlabeled, a.header, classes, width);
  Dataset t = detail::load_for_model(a.target, !a.unlabeled, a.header, classes, width);
  s.domain_name = std::filesystem::path(a.source).stem().string();
  t.domain_name = std::filesystem::path(a.target).stem().string();
  Embedding e;
  try {
    e = compute_embedding(ck.network, s, t);
  } catch (const Error& err) {
    throw Failure{exit_code_for(err.kind()), err.what()};
  }
  detail::write_or_fail(a.out, e.to_csv());
  out << "wrote " << e.coords.rows() << " embedded points to " << a.out << "\n";
}

/// Builtin two-moons suite: one fixed source and rotated targets.
inline std::vector<TransferTask> two_moons_sweep() {
  constexpr std::size_t kPoints = 500;
  constexpr double kNoise = 0.15;
  constexpr std::uint64_t kSourceSeed = 101;
  constexpr std::uint64_t kTargetSeed = 202;
  std::vector<TransferTask> tasks;
  for (double rotation : {15.0, 30.0, 45.0}) {
    TransferTask t;
    t.name = "R0->R" + std::to_string(static_cast<int>(rotation));
    t.source = gen_two_moons(kPoints, kNoise, 0.0, kSourceSeed);
    t.target = gen_two_moons(kPoints, kNoise, rotation, kTargetSeed);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

inline void cmd_benchmark(const detail::ConfigSources& src, const EnvLookup& env,
                          std::ostream& out) {
  const RunConfig cfg = detail::build_config(src, env);
  detail::validate_train_config(cfg.train);
  if (cfg.seeds == 0) throw Failure{kConfigError, "--seeds must be at least 1"};
  if (cfg.jobs == 0) throw Failure{kConfigError, "--jobs must be at least 1"};
  if (cfg.methods.empty()) throw Failure{kConfigError, "no methods listed"};

  std::vector<MethodSpec> methods;
  for (const auto& name : cfg.methods) {
    auto m = find_standard_method(name, cfg.train.lambda);
    if (!m) throw Failure{kConfigError, "unknown method '" + name + "'"};
    methods.push_back(*m);
  }

  const std::size_t classes = cfg.classes();
  const std::size_t width = cfg.train.widths.front();
  std::vector<TransferTask> tasks;
  if (!cfg.suite.empty()) {
    if (cfg.suite != "two-moons-sweep") {
      throw Failure{kConfigError, "unknown suite '" + cfg.suite + "'"};
    }
    if (width != 2 || classes != 2) {
      throw Failure{kMismatch, "suite two-moons-sweep needs 2 inputs and 2 classes"};
    }
    tasks = two_moons_sweep();
  }
  for (const auto& decl : cfg.tasks) {
    detail::require_file(decl.source, "task source");
    detail::require_file(decl.target, "task target");
    TransferTask t;
    t.name = decl.name;
    t.source = detail::load_for_model(decl.source, true, cfg.header, classes, width);
    t.target = detail::load_for_model(decl.target, true, cfg.header, classes, width);
    tasks.push_back(std::move(t));
  }
  if (tasks.empty()) throw Failure{kConfigError, "no tasks: set 'suite' or add 'task' lines"};
  if (classes != cfg.train.widths.back()) {
    throw Failure{kMismatch, "num_classes does not match the last layer width"};
  }

  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= cfg.seeds; ++s) seeds.push_back(s);

  BenchmarkTable table;
  try {
    table = run_benchmark(tasks, methods, seeds, cfg.train, cfg.jobs);
  } catch (const Error& e) {
    throw Failure{exit_code_for(e.kind()), e.what()};
  }
  const std::string csv = table.to_csv();
  if (cfg.out.empty()) {
    out << csv;
  } else {
    detail::write_or_fail(cfg.out, csv);
    for (const auto& m : table.means) {
      out << m.method << " mean accuracy " << format_double(m.accuracy) << " over " << m.count
          << " runs\n";
    }
    out << "table: " << cfg.out << "\n";
  }
}

// ---------------------------------------------------------------------------

/// Parses `argv` and runs one subcommand. All diagnostics go to `err` as a
/// single "error: ..." line.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                   const EnvLookup& env = process_env) {
  CLI::App app{"Joint CORAL + MMD + entropy domain adaptation on feature data", "mindisc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  generate->require_subcommand(1);
  TwoMoonsArgs moons;
  auto* gen_moons = generate->add_subcommand("two-moons", "Two interleaved half circles");
  gen_moons->add_option("--n", moons.n, "Number of points (>= 2)")->capture_default_str();
  gen_moons->add_option("--noise", moons.noise, "Gaussian noise std-dev")->capture_default_str();
  gen_moons->add_option("--rotation", moons.rotation, "Rotation about the origin, degrees")
      ->capture_default_str();
  gen_moons->add_option("--seed", moons.seed, "Generator seed")->capture_default_str();
  gen_moons->add_option("--out", moons.out, "Output CSV")->required();

  GaussianArgs gauss;
  auto* gen_gauss =
      generate->add_subcommand("gaussian-shift", "Class-conditional Gaussians with a shifted target");
  gen_gauss->add_option("--n", gauss.n, "Points per domain")->capture_default_str();
  gen_gauss->add_option("--dim", gauss.dim, "Feature dimension")->capture_default_str();
  gen_gauss->add_option("--shift", gauss.shift, "Target mean shift: one value or one per dim")
      ->delimiter(',')
      ->capture_default_str();
  gen_gauss->add_option("--cov-scale", gauss.cov_scale, "Target variance multiplier")
      ->capture_default_str();
  gen_gauss->add_option("--classes", gauss.classes, "Number of classes")->capture_default_str();
  gen_gauss->add_option("--seed", gauss.seed, "Generator seed")->capture_default_str();
  gen_gauss->add_option("--out", gauss.out, "Source CSV")->required();
  gen_gauss->add_option("--out-target", gauss.out_target, "Target CSV")->required();

  const std::string key_reference = config_key_reference();

  detail::ConfigSources train_src;
  auto* train_cmd = app.add_subcommand("train", "Train a network and write a checkpoint");
  train_cmd->add_option("--config", train_src.file, "Config file (key = value lines)");
  train_cmd->add_option("--set", train_src.overrides, "Override a config key: key=value")
      ->allow_extra_args(false);
  train_cmd->footer(key_reference + "MINDISC_SEED overrides the file's seed; --set overrides both.");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Print target accuracy of a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data, "Labeled CSV")->required();
  eval_cmd->add_flag("--header", eval.header, "Skip one header line")->capture_default_str();
  eval_cmd->add_option("--num-classes", eval.num_classes,
                       "Expected class count; 0 accepts the checkpoint's")
      ->capture_default_str();

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Export a 2-D PCA embedding of rep activations");
  embed_cmd->add_option("--checkpoint", embed.checkpoint, "Checkpoint file")->required();
  embed_cmd->add_option("--source", embed.source, "Source CSV")->required();
  embed_cmd->add_option("--target", embed.target, "Target CSV")->required();
  embed_cmd->add_option("--out", embed.out, "Embedding CSV")->required();
  embed_cmd->add_flag("--header", embed.header, "Skip one header line")->capture_default_str();
  embed_cmd->add_flag("--unlabeled", embed.unlabeled, "CSVs have no label column")
      ->capture_default_str();

  detail::ConfigSources bench_src;
  std::optional<std::string> suite, bench_out;
  std::optional<std::size_t> seeds, jobs;
  auto* bench_cmd = app.add_subcommand("benchmark", "Train every task x method x seed, tabulate");
  bench_cmd->add_option("--config", bench_src.file, "Config file (key = value lines)");
  bench_cmd->add_option("--set", bench_src.overrides, "Override a config key: key=value")
      ->allow_extra_args(false);
  bench_cmd->add_option("--suite", suite, "Builtin suite (two-moons-sweep); same as suite=");
  bench_cmd->add_option("--seeds", seeds, "Seeds 1..N (default 5); same as seeds=");
  bench_cmd->add_option("--jobs", jobs, "Worker threads (default 1); same as jobs=");
  bench_cmd->add_option("--out", bench_out, "Table CSV; same as out=");
  bench_cmd->footer(key_reference + "MINDISC_SEED overrides the file's seed; --set overrides both.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    // Shows the deepest selected subcommand's help.
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << msg << "\n";
    return kConfigError;
  }

  try {
    if (gen_moons->parsed()) {
      cmd_generate_two_moons(moons, out);
    } else if (gen_gauss->parsed()) {
      cmd_generate_gaussian(gauss, out);
    } else if (train_cmd->parsed()) {
      cmd_train(train_src, env, out);
    } else if (eval_cmd->parsed()) {
      cmd_eval(eval, out);
    } else if (embed_cmd->parsed()) {
      cmd_embed(embed, out);
    } else if (bench_cmd->parsed()) {
      if (suite) bench_src.overrides.push_back("suite=" + *suite);
      if (seeds) bench_src.overrides.push_back("seeds=" + std::to_string(*seeds));
      if (jobs) bench_src.overrides.push_back("jobs=" + std::to_string(*jobs));
      if (bench_out) bench_src.overrides.push_back("out=" + *bench_out);
      cmd_benchmark(bench_src, env, out);
    }
  } catch (const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

}  // namespace mindisc::cli
