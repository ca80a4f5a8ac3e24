#include <gtest/gtest.h>

#include <sstream>

#include "aemcarl/config.hpp"

using namespace aemcarl;

namespace {

std::string dump(const train::TrainConfig& c) {
  std::ostringstream out;
  write_train_config(out, c);
  return out.str();
}

}  // namespace

TEST(Config, RoundTrip) {
  train::TrainConfig c;
  c.sim.n_obstacles = 7;
  c.sim.visibility = sim::Visibility::Visible;
  c.reward_mode = reward::RewardMode::Vanilla;
  c.hyper.beta = 0.1 + 0.2;  // not exactly representable in short decimal
  c.model.head_hidden = {64, 32};
  c.model.aem.fixed_n = 2;
  c.gamma = 0.95;
  c.seed = 123456789012345ull;
  std::istringstream in(dump(c));
  const train::TrainConfig back = parse_train_config(in);
  EXPECT_EQ(dump(back), dump(c));
  EXPECT_EQ(back.hyper.beta, c.hyper.beta);
  EXPECT_EQ(back.model.head_hidden, c.model.head_hidden);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(config_fingerprint(back), config_fingerprint(c));
}

TEST(Config, CommentsBlanksAndOverrides) {
  std::istringstream in("# header\n\nsim.n_obstacles = 10   # trailing\ntrain.lr=0.0005\n");
  train::TrainConfig c = parse_train_config(in);
  EXPECT_EQ(c.sim.n_obstacles, 10);
  EXPECT_EQ(c.lr, 0.0005);
  apply_setting(c, "reward.mode", "vanilla");
  EXPECT_EQ(c.reward_mode, reward::RewardMode::Vanilla);
  apply_setting(c, "model.tf_residual", "true");
  EXPECT_TRUE(c.model.tf.residual);
  apply_setting(c, "sim.robot_centric", "false");
  EXPECT_FALSE(c.sim.robot_centric);
}

TEST(Config, UnknownKeyIsAnError) {
  std::istringstream in("sim.n_obstacles = 3\nsim.bogus = 1\n");
  try {
    parse_train_config(in);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("unknown key 'sim.bogus'"), std::string::npos) << e.what();
  }
}

TEST(Config, MalformedValues) {
  train::TrainConfig c;
  EXPECT_THROW(apply_setting(c, "train.batch", "12x"), std::invalid_argument);
  EXPECT_THROW(apply_setting(c, "train.lr", ""), std::invalid_argument);
  EXPECT_THROW(apply_setting(c, "sim.visibility", "sometimes"), std::invalid_argument);
  std::istringstream missing_eq("sim.n_obstacles 3\n");
  EXPECT_THROW(parse_train_config(missing_eq), std::invalid_argument);
  // Values that parse but fail validation.
  std::istringstream bad_gamma("train.gamma = 2\n");
  EXPECT_THROW(parse_train_config(bad_gamma), std::invalid_argument);
}

TEST(Config, FingerprintTracksContent) {
  train::TrainConfig a;
  train::TrainConfig b;
  EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
  b.rl_episodes += 1;
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
}

TEST(Config, EnumNames) {
  EXPECT_EQ(parse_visibility("visible"), sim::Visibility::Visible);
  EXPECT_STREQ(to_string(sim::Visibility::Invisible), "invisible");
  EXPECT_EQ(parse_reward_mode("adaptive"), reward::RewardMode::Adaptive);
  EXPECT_STREQ(to_string(reward::RewardMode::Vanilla), "vanilla");
}

TEST(Config, ShippedDefaultLoads) {
  const train::TrainConfig c = load_train_config(AEMCARL_SOURCE_DIR "/configs/default.conf");
  EXPECT_EQ(c.il_episodes, 2000);
  EXPECT_EQ(c.rl_episodes, 2000);
  EXPECT_EQ(c.sim.n_obstacles, 5);
  EXPECT_EQ(c.sim.visibility, sim::Visibility::Invisible);
  EXPECT_THROW(load_train_config("/nonexistent.conf"), std::runtime_error);
}
