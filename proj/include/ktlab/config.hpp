#pragma once

// Run configuration: a TOML-style key = value file with optional [section]
// headers, overridable from the command line. Every known key has a default
// except `seed`, which must be given explicitly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ktlab/data.hpp"
#include "ktlab/error.hpp"
#include "ktlab/experiments.hpp"
#include "ktlab/lrp.hpp"
#include "ktlab/trainer.hpp"

namespace ktlab {

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", ""},
        {"jobs", "1"},
        {"paths.raw_dir", ""},
        {"paths.catalog", ""},
        {"paths.canonical", "data/canonical.csv"},
        {"paths.skill_map", ""},
        {"paths.checkpoint_dir", "checkpoints"},
        {"paths.report_dir", "reports"},
        {"model.hidden", "200"},
        {"model.init_scale", "1.0"},
        {"train.learning_rate", "0.001"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.999"},
        {"train.adam_epsilon", "1e-8"},
        {"train.batch_size", "32"},
        {"train.epochs", "5"},
        {"train.gradient_clip", "5.0"},
        {"train.output_dropout", "0"},
        {"train.window", "200"},
        {"split.train_ratio", "0.8"},
        {"lrp.epsilon", "0.001"},
        {"lrp.seed_mode", "logit"},
        {"lrp.bias_absorbs", "true"},
        {"experiment.random_replicates", "5"},
        {"experiment.checkpoint", "best"},
        {"synth.n_learners", "2000"},
        {"synth.skills", "10"},
        {"synth.min_len", "20"},
        {"synth.max_len", "100"},
        {"synth.p_init", "0.3"},
        {"synth.p_transit", "0.1"},
        {"synth.p_guess", "0.2"},
        {"synth.p_slip", "0.1"},
        {"explain.learner", ""},
        {"explain.limit", "10"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.contains(key)) throw InputError("config: unknown key '" + key + "'");
    values_[key] = value;
  }

  /// Applies "key=value".
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InputError("config: expected key=value, got '" + assignment + "'");
    set(std::string(detail::trim(assignment.substr(0, eq))), unquote(detail::trim(assignment.substr(eq + 1))));
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto body = detail::trim(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']') throw InputError(where(path.string(), lineno) + ": bad section header");
        section = std::string(detail::trim(body.substr(1, body.size() - 2)));
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw InputError(where(path.string(), lineno) + ": expected key = value");
      std::string key(detail::trim(body.substr(0, eq)));
      if (!section.empty()) key = section + "." + key;
      try {
        set(key, unquote(detail::trim(body.substr(eq + 1))));
      } catch (const InputError& e) {
        throw InputError(where(path.string(), lineno) + ": " + e.what());
      }
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InputError("config: unknown key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const auto& s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw InputError("config: " + key + " = '" + s + "' is not a number");
    }
  }

  std::uint64_t count(const std::string& key) const {
    const auto& s = str(key);
    const auto v = detail::parse_int<std::uint64_t>(s);
    if (!v) throw InputError("config: " + key + " = '" + s + "' is not a non-negative integer");
    return *v;
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw InputError("config: " + key + " = '" + s + "' is not a boolean");
  }

  std::uint64_t seed() const {
    if (str("seed").empty()) throw InputError("config: seed is required (set seed = N or pass --seed)");
    return count("seed");
  }

  std::size_t jobs() const { return std::max<std::size_t>(1, count("jobs")); }

  std::filesystem::path path(const std::string& key) const { return str(key); }

  std::filesystem::path skill_map_path() const {
    const auto& s = str("paths.skill_map");
    return s.empty() ? std::filesystem::path(str("paths.canonical") + ".skills.json") : std::filesystem::path(s);
  }

  TrainConfig train_config() const {
    TrainConfig c;
    c.learning_rate = real("train.learning_rate");
    c.beta1 = real("train.beta1");
    c.beta2 = real("train.beta2");
    c.adam_epsilon = real("train.adam_epsilon");
    c.batch_size = count("train.batch_size");
    c.epochs = count("train.epochs");
    c.gradient_clip = real("train.gradient_clip");
    c.output_dropout = real("train.output_dropout");
    c.seed = seed();
    c.jobs = jobs();
    c.validate();
    return c;
  }

  LrpConfig lrp_config() const {
    LrpConfig c;
    c.epsilon = real("lrp.epsilon");
    const auto& mode = str("lrp.seed_mode");
    if (mode == "logit") c.seed_mode = SeedMode::Logit;
    else if (mode == "probability") c.seed_mode = SeedMode::Probability;
    else throw InputError("config: lrp.seed_mode must be logit or probability");
    c.bias_absorbs = flag("lrp.bias_absorbs");
    if (!(c.epsilon >= 0.0)) throw InputError("config: lrp.epsilon must be >= 0");
    return c;
  }

  ExperimentConfig experiment_config() const {
    ExperimentConfig c;
    c.lrp = lrp_config();
    c.random_replicates = count("experiment.random_replicates");
    if (c.random_replicates == 0) throw InputError("config: experiment.random_replicates must be >= 1");
    c.seed = derive_seed(seed(), "deletion");
    c.jobs = jobs();
    return c;
  }

  BktSkillParams bkt_params() const {
    BktSkillParams p{real("synth.p_init"), real("synth.p_transit"), real("synth.p_guess"), real("synth.p_slip")};
    p.validate();
    return p;
  }

  /// Every effective setting except `jobs`, which must not affect outputs.
  nlohmann::json echo() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_)
      if (k != "jobs") j[k] = v;
    return j;
  }

 private:
  static std::string unquote(std::string_view v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\'')))
      v = v.substr(1, v.size() - 2);
    return std::string(v);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace ktlab
