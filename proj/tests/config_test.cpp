#include "ktlab/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace ktlab {
namespace {

std::filesystem::path write_tmp(const std::string& name, const std::string& body) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << body;
  return p;
}

TEST(RunConfig, SeedIsMandatory) {
  RunConfig c;
  EXPECT_THROW(c.seed(), InputError);
  EXPECT_THROW(c.train_config(), InputError);
  c.set("seed", "17");
  EXPECT_EQ(c.seed(), 17u);
}

TEST(RunConfig, DefaultsMatchLibraryDefaults) {
  RunConfig c;
  c.set("seed", "1");
  const auto t = c.train_config();
  const TrainConfig d;
  EXPECT_EQ(t.learning_rate, d.learning_rate);
  EXPECT_EQ(t.batch_size, d.batch_size);
  EXPECT_EQ(t.epochs, d.epochs);
  EXPECT_EQ(t.gradient_clip, d.gradient_clip);
  const auto l = c.lrp_config();
  EXPECT_EQ(l.epsilon, 0.001);
  EXPECT_EQ(l.seed_mode, SeedMode::Logit);
  EXPECT_TRUE(l.bias_absorbs);
  EXPECT_EQ(c.experiment_config().random_replicates, 5u);
  EXPECT_EQ(c.skill_map_path(), std::filesystem::path("data/canonical.csv.skills.json"));
}

TEST(RunConfig, FileSectionsCommentsQuotes) {
  const auto p = write_tmp("ktlab_cfg_a.toml",
                           "seed = 9   # inline comment\n"
                           "\n"
                           "[model]\n"
                           "hidden = 16\n"
                           "[paths]\n"
                           "canonical = \"out/c.csv\"\n"
                           "[lrp]\n"
                           "seed_mode = 'probability'\n");
  RunConfig c;
  c.load_file(p);
  EXPECT_EQ(c.seed(), 9u);
  EXPECT_EQ(c.count("model.hidden"), 16u);
  EXPECT_EQ(c.str("paths.canonical"), "out/c.csv");
  EXPECT_EQ(c.lrp_config().seed_mode, SeedMode::Probability);
  std::filesystem::remove(p);
}

TEST(RunConfig, UnknownKeyNamesLine) {
  const auto p = write_tmp("ktlab_cfg_b.toml", "seed = 1\n[train]\nlearnin_rate = 0.1\n");
  RunConfig c;
  try {
    c.load_file(p);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  std::filesystem::remove(p);
  EXPECT_THROW(c.load_file("/nonexistent/ktlab.toml"), InputError);
}

TEST(RunConfig, Assignments) {
  RunConfig c;
  c.set_assignment("train.epochs = 3");
  EXPECT_EQ(c.count("train.epochs"), 3u);
  EXPECT_THROW(c.set_assignment("train.epochs"), InputError);
  EXPECT_THROW(c.set_assignment("nope=1"), InputError);
}

TEST(RunConfig, BadValues) {
  RunConfig c;
  c.set("seed", "1");
  c.set("train.learning_rate", "fast");
  EXPECT_THROW(c.train_config(), InputError);
  c.set("train.learning_rate", "-1");
  EXPECT_THROW(c.train_config(), InputError);
  c.set("lrp.bias_absorbs", "maybe");
  EXPECT_THROW(c.lrp_config(), InputError);
  c.set("seed", "-4");
  EXPECT_THROW(c.seed(), InputError);
}

TEST(RunConfig, BktValidation) {
  RunConfig c;
  EXPECT_NO_THROW(c.bkt_params());
  c.set("synth.p_slip", "1.1");
  EXPECT_THROW(c.bkt_params(), InputError);
  c.set("synth.p_slip", "0.5");
  c.set("synth.p_guess", "0.5");
  EXPECT_THROW(c.bkt_params(), InputError);
}

TEST(RunConfig, EchoOmitsJobs) {
  RunConfig a, b;
  a.set("seed", "3");
  b.set("seed", "3");
  b.set("jobs", "8");
  EXPECT_EQ(a.echo(), b.echo());
  EXPECT_FALSE(a.echo().contains("jobs"));
  EXPECT_EQ(a.experiment_config().seed, b.experiment_config().seed);
}

}  // namespace
}  // namespace ktlab
