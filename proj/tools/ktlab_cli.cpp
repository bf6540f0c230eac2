// ktlab command-line driver: ingest, synth, train, explain, experiments.
//
// Exit codes: 0 ok, 2 bad config or input, 3 selector matched nothing.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ktlab/ktlab.hpp"

namespace fs = std::filesystem;
using namespace ktlab;

namespace {

void log(const std::string& msg) { std::cerr << msg << '\n'; }

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  return buf;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

struct Corpus {
  SkillMap skills;
  std::vector<LearnerSequence> learners;
};

Corpus load_corpus(const RunConfig& cfg) {
  const auto canonical = cfg.path("paths.canonical");
  if (!fs::exists(canonical)) throw InputError("canonical file not found: " + canonical.string());
  const auto map_path = cfg.skill_map_path();
  if (!fs::exists(map_path)) throw InputError("skill map not found: " + map_path.string());
  Corpus c{SkillMap::load(map_path), to_sequences(group_by_learner(read_canonical(canonical)))};
  for (const auto& l : c.learners)
    for (const auto& s : l.steps)
      if (s.skill >= c.skills.size())
        throw InputError("learner " + l.learner_id + " uses skill " + std::to_string(s.skill) + " outside the skill map");
  return c;
}

LearnerSplit split_of(const RunConfig& cfg, const Corpus& c) {
  return split_learners(c.learners, cfg.real("split.train_ratio"), cfg.seed());
}

fs::path checkpoint_path(const RunConfig& cfg) {
  const auto& sel = cfg.str("experiment.checkpoint");
  if (sel.find('/') != std::string::npos || fs::path(sel).extension() == ".json") return sel;
  return cfg.path("paths.checkpoint_dir") / (sel + ".json");
}

Checkpoint load_matching_checkpoint(const RunConfig& cfg, const Corpus& c) {
  const auto path = checkpoint_path(cfg);
  if (!fs::exists(path)) throw InputError("checkpoint not found: " + path.string());
  auto ck = load_checkpoint(path);
  if (ck.skill_map_hash != c.skills.hash())
    throw InputError("checkpoint " + path.string() + " was trained on skill map " + ck.skill_map_hash +
                     " but the data uses " + c.skills.hash());
  if (ck.params.skills != c.skills.size()) throw InputError("checkpoint skill count does not match the skill map");
  return ck;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg) {
  const auto catalog_path = cfg.path("paths.catalog");
  if (catalog_path.empty() || !fs::exists(catalog_path))
    throw InputError("question catalog not found: '" + catalog_path.string() + "'");
  const auto raw = cfg.path("paths.raw_dir");
  const auto catalog = load_question_catalog(catalog_path);

  IngestStats stats;
  auto groups = group_by_learner(ingest_ednet_kt1(raw, catalog, stats, cfg.jobs()));
  stats.learners_seen = groups.size();
  const auto kept = filter_learners(std::move(groups), &stats);

  const auto canonical = cfg.path("paths.canonical");
  ensure_parent(canonical);
  write_canonical(canonical, flatten(kept));
  const auto map_path = cfg.skill_map_path();
  ensure_parent(map_path);
  catalog.skills.save(map_path);

  auto sj = stats.to_json();
  sj["excluded_untagged_questions"] = catalog.excluded_untagged;
  sj["skills"] = catalog.skills.size();
  write_json(cfg.path("paths.report_dir") / "ingest_stats.json", sj);
  std::cout << sj.dump(2) << '\n';
  log("ingest: " + std::to_string(kept.size()) + " learners written to " + canonical.string());
  return 0;
}

int cmd_synth(const RunConfig& cfg) {
  const auto M = cfg.count("synth.skills");
  const auto bkt = cfg.bkt_params();
  SeededRng rng(derive_seed(cfg.seed(), "synth"));
  const auto learners = synth_generate(rng, cfg.count("synth.n_learners"), M,
                                       {cfg.count("synth.min_len"), cfg.count("synth.max_len")},
                                       std::vector<BktSkillParams>(M, bkt));
  const auto canonical = cfg.path("paths.canonical");
  ensure_parent(canonical);
  write_canonical(canonical, to_records(learners));
  const auto map_path = cfg.skill_map_path();
  ensure_parent(map_path);
  SkillMap::identity(M).save(map_path);
  log("synth: " + std::to_string(learners.size()) + " learners, " + std::to_string(M) + " skills -> " +
      canonical.string());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto tc = cfg.train_config();
  const auto corpus = load_corpus(cfg);
  const auto split = split_of(cfg, corpus);
  const auto window = cfg.count("train.window");

  std::vector<LearnerSequence> train_windows, heldout_windows;
  for (const auto& l : split.train)
    for (auto& w : window_train(l, window)) train_windows.push_back(std::move(w));
  for (const auto& l : split.test)
    for (auto& w : window_train(l, window)) heldout_windows.push_back(std::move(w));
  if (train_windows.empty()) throw InputError("train: no training sequences after the split");
  const HeldOutData heldout{heldout_windows, make_eval_items(split.test)};
  log("train: " + std::to_string(split.train.size()) + " train learners (" + std::to_string(train_windows.size()) +
      " windows), " + std::to_string(split.test.size()) + " held-out learners");

  const auto H = cfg.count("model.hidden");
  const auto M = corpus.skills.size();
  SeededRng init_rng(derive_seed(cfg.seed(), "init"));
  SeededRng train_rng(derive_seed(cfg.seed(), "train"));
  const auto init = init_params(init_rng, H, M, cfg.real("model.init_scale"));

  const auto ck_dir = cfg.path("paths.checkpoint_dir");
  fs::create_directories(ck_dir);
  const auto map_hash = corpus.skills.hash();
  auto on_epoch = [&](std::size_t epoch, const DktParams& p, const std::vector<EpochMetrics>& hist) {
    save_checkpoint(ck_dir / ("epoch_" + std::to_string(epoch) + ".json"), {p, map_hash, {{"epoch", epoch}}});
    std::string line = "epoch " + std::to_string(epoch);
    for (const auto& h : hist)
      if (h.epoch == epoch)
        line += "  " + h.split + " acc=" + num(h.metrics.acc).substr(0, 6) +
                (h.metrics.auc ? " auc=" + num(*h.metrics.auc).substr(0, 6) : "");
    log(line);
  };
  const auto res = train(train_windows, init, tc, train_rng, &heldout, on_epoch);
  save_checkpoint(ck_dir / "best.json", {res.best_params, map_hash, {{"epoch", res.best_epoch}}});

  const auto metrics = cfg.path("paths.report_dir") / "metrics.csv";
  ensure_parent(metrics);
  std::ofstream out(metrics, std::ios::binary);
  if (!out) throw InputError("cannot write " + metrics.string());
  out << "epoch,split,acc,auc,loss\n";
  for (const auto& h : res.history)
    out << h.epoch << ',' << h.split << ',' << num(h.metrics.acc) << ','
        << (h.metrics.auc ? num(*h.metrics.auc) : "") << ',' << (h.metrics.loss ? num(*h.metrics.loss) : "") << '\n';
  log("train: best epoch " + std::to_string(res.best_epoch) + ", checkpoints in " + ck_dir.string());
  return 0;
}

int cmd_explain(const RunConfig& cfg) {
  const auto lrp = cfg.lrp_config();
  const auto corpus = load_corpus(cfg);
  const auto ck = load_matching_checkpoint(cfg, corpus);
  const auto& who = cfg.str("explain.learner");
  const auto limit = cfg.count("explain.limit");

  std::vector<EvalItem> chosen;
  for (auto& it : make_eval_items(split_of(cfg, corpus).test)) {
    if (!who.empty() && it.learner_id != who) continue;
    if (limit && chosen.size() >= limit) break;
    chosen.push_back(std::move(it));
  }
  if (chosen.empty())
    throw EmptySelection("explain: no held-out evaluation window" + (who.empty() ? "" : " for learner '" + who + "'"));

  const auto dir = cfg.path("paths.report_dir") / "explain";
  for (const auto& e : explain_items(ck.params, chosen, lrp, cfg.jobs()))
    write_json(dir / (e.item.learner_id + "_w" + std::to_string(e.item.window_index) + ".json"), explanation_json(e));
  log("explain: " + std::to_string(chosen.size()) + " reports in " + dir.string());
  return 0;
}

int cmd_experiments(const RunConfig& cfg) {
  const auto ec = cfg.experiment_config();
  const auto corpus = load_corpus(cfg);
  const auto ck = load_matching_checkpoint(cfg, corpus);
  const auto items = make_eval_items(split_of(cfg, corpus).test);
  const auto res = run_experiments(ck.params, items, ec);

  const auto s = cfg.seed();
  nlohmann::json extra;
  extra["config"] = cfg.echo();
  extra["seeds"] = {{"master", s},
                    {"split", derive_seed(s, "split")},
                    {"init", derive_seed(s, "init")},
                    {"train", derive_seed(s, "train")},
                    {"deletion", ec.seed}};
  extra["checkpoint"] = {{"path", checkpoint_path(cfg).string()},
                         {"hash", hex16(fnv1a64(checkpoint_to_json(ck).dump()))},
                         {"meta", ck.meta}};
  extra["skill_map_hash"] = corpus.skills.hash();
  emit_reports(cfg.path("paths.report_dir"), res, extra);

  const auto summary = summary_json(res);
  std::cout << summary.dump(2) << '\n';
  log("experiments: " + std::to_string(items.size()) + " windows, reports in " + cfg.str("paths.report_dir"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ktlab: knowledge tracing with relevance explanations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> assignments;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", assignments, "override a config key (key=value), repeatable");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--jobs", jobs, "worker threads; never changes outputs");

  auto* ingest = app.add_subcommand("ingest", "KT1 user files + question catalog -> canonical CSV");
  auto* synth = app.add_subcommand("synth", "generate a BKT corpus in canonical form");
  auto* trn = app.add_subcommand("train", "train the model, write checkpoints and metrics.csv");
  auto* expl = app.add_subcommand("explain", "relevance report per held-out evaluation window");
  auto* exps = app.add_subcommand("experiments", "consistency and deletion experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (seed) cfg.set("seed", std::to_string(*seed));
    if (jobs) cfg.set("jobs", std::to_string(*jobs));

    if (ingest->parsed()) return cmd_ingest(cfg);
    if (synth->parsed()) return cmd_synth(cfg);
    if (trn->parsed()) return cmd_train(cfg);
    if (expl->parsed()) return cmd_explain(cfg);
    if (exps->parsed()) return cmd_experiments(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const EmptySelection& e) {
    std::cerr << "nothing selected: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
