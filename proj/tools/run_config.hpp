#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "mindisc/mindisc.hpp"

namespace mindisc::cli {

struct TaskDecl {
  std::string name;
  std::string source;
  std::string target;

  friend bool operator==(const TaskDecl&, const TaskDecl&) = default;
};

/// Everything a CLI run can be configured with. Text form is one
/// `key = value` per line; `task` may repeat, every other key is last-wins.
struct RunConfig {
  TrainConfig train;

  std::string source;
  std::string target;
  std::size_t num_classes = 0;  // 0: taken from the last entry of `layers`
  bool header = false;
  bool target_labeled = true;
  std::string checkpoint;
  std::string history;
  std::string resume;
  std::size_t max_steps = 0;  // 0: run the whole schedule

  std::string suite;
  std::vector<TaskDecl> tasks;
  std::vector<std::string> methods{"baseline", "coral", "mmd", "joint"};
  std::size_t seeds = 5;
  std::size_t jobs = 1;
  std::string out;

  std::size_t classes() const { return num_classes != 0 ? num_classes : train.widths.back(); }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct KeyDoc {
  std::string key;
  std::string help;
};

/// Run-level keys (TrainConfig keys come from train_config_keys()).
inline const std::vector<KeyDoc>& run_key_docs() {
  static const std::vector<KeyDoc> docs{
      {"source", "labeled source CSV"},
      {"target", "target CSV (its labels, if any, are never used for training)"},
      {"num_classes", "class count; 0 means the last layer width"},
      {"header", "skip one header line in every CSV"},
      {"target_labeled", "the target CSV carries a trailing label column"},
      {"checkpoint", "checkpoint file to write"},
      {"history", "per-step loss CSV to write"},
      {"resume", "checkpoint to continue training from"},
      {"max_steps", "stop after this many steps in this run; 0 means no cap"},
      {"suite", "builtin benchmark suite (two-moons-sweep)"},
      {"task", "benchmark task 'name,source.csv,target.csv'; may repeat"},
      {"methods", "benchmark methods, comma separated"},
      {"seeds", "benchmark seeds 1..N"},
      {"jobs", "benchmark worker threads"},
      {"out", "benchmark table CSV to write"},
  };
  return docs;
}

namespace detail {

inline std::string resolve_path(std::string_view value, const std::filesystem::path& base) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative()) p = base / p;
  return std::filesystem::absolute(p).lexically_normal().string();
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorKind::ConfigError,
              "key '" + std::string(key) + "': expected true/false, got '" + std::string(v) + "'");
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = mindisc::detail::trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace detail

/// Applies one key. Relative paths resolve against `base`.
inline void set_run_key(RunConfig& cfg, std::string_view key, std::string_view value,
                        const std::filesystem::path& base) {
  using mindisc::detail::parse_uint;
  if (set_train_key(cfg.train, key, value)) return;
  if (key == "source") cfg.source = detail::resolve_path(value, base);
  else if (key == "target") cfg.target = detail::resolve_path(value, base);
  else if (key == "num_classes") cfg.num_classes = parse_uint(key, value);
  else if (key == "header") cfg.header = detail::parse_bool(key, value);
  else if (key == "target_labeled") cfg.target_labeled = detail::parse_bool(key, value);
  else if (key == "checkpoint") cfg.checkpoint = detail::resolve_path(value, base);
  else if (key == "history") cfg.history = detail::resolve_path(value, base);
  else if (key == "resume") cfg.resume = detail::resolve_path(value, base);
  else if (key == "max_steps") cfg.max_steps = parse_uint(key, value);
  else if (key == "suite") cfg.suite = std::string(value);
  else if (key == "task") {
    const auto parts = detail::split_list(value);
    if (parts.size() != 3) {
      throw Error(ErrorKind::ConfigError, "key 'task': expected 'name,source.csv,target.csv'");
    }
    cfg.tasks.push_back(
        {parts[0], detail::resolve_path(parts[1], base), detail::resolve_path(parts[2], base)});
  } else if (key == "methods") {
    cfg.methods = detail::split_list(value);
  } else if (key == "seeds") cfg.seeds = parse_uint(key, value);
  else if (key == "jobs") cfg.jobs = parse_uint(key, value);
  else if (key == "out") cfg.out = detail::resolve_path(value, base);
  else throw Error(ErrorKind::ConfigError, "unknown config key '" + std::string(key) + "'");
}

/// Applies a whole config text in order.
inline void apply_config_text(RunConfig& cfg, std::string_view text,
                              const std::filesystem::path& base) {
  for (const auto& [key, value] : parse_key_values(text)) set_run_key(cfg, key, value, base);
}

inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open config '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto base = std::filesystem::absolute(path).parent_path();
  apply_config_text(cfg, text, base);
}

/// `key=value` from the command line; paths resolve against the working
/// directory.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorKind::ConfigError,
                "--set expects key=value, got '" + std::string(assignment) + "'");
  }
  set_run_key(cfg, mindisc::detail::trim(assignment.substr(0, eq)),
              mindisc::detail::trim(assignment.substr(eq + 1)), std::filesystem::current_path());
}

inline std::string to_text(const RunConfig& cfg) {
  std::string out = to_config_text(cfg.train);
  auto line = [&](const char* key, const std::string& value) {
    out += std::string(key) + " = " + value + "\n";
  };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  line("source", cfg.source);
  line("target", cfg.target);
  line("num_classes", std::to_string(cfg.num_classes));
  line("header", flag(cfg.header));
  line("target_labeled", flag(cfg.target_labeled));
  line("checkpoint", cfg.checkpoint);
  line("history", cfg.history);
  line("resume", cfg.resume);
  line("max_steps", std::to_string(cfg.max_steps));
  line("suite", cfg.suite);
  for (const auto& t : cfg.tasks) line("task", t.name + "," + t.source + "," + t.target);
  std::string methods;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    if (i > 0) methods += ',';
    methods += cfg.methods[i];
  }
  line("methods", methods);
  line("seeds", std::to_string(cfg.seeds));
  line("jobs", std::to_string(cfg.jobs));
  line("out", cfg.out);
  return out;
}

/// Reference listing of every key and its default, used in --help.
inline std::string config_key_reference() {
  const RunConfig defaults;
  std::string out = "Config keys (key = value, '#' comments; --set key=value overrides):\n";
  for (const auto& key : train_config_keys()) {
    out += "  " + key + " = " + get_train_key(defaults.train, key) + "\n";
  }
  const std::string text = to_text(defaults);
  for (const auto& doc : run_key_docs()) {
    std::string value;
    for (const auto& [k, v] : parse_key_values(text)) {
      if (k == doc.key) value = v;
    }
    out += "  " + doc.key + " = " + value + "    # " + doc.help + "\n";
  }
  return out;
}

}  // namespace mindisc::cli
