#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "aemcarl/train.hpp"

namespace aemcarl {

// Flat "key = value" config files. '#' starts a comment, blank lines are
// skipped, unknown keys are errors. Keys are grouped by prefix:
//   sim.*     simulator (n_obstacles, circle_radius, dt, time_limit, visibility, ...)
//   reward.*  reward field hyper-parameters and mode (adaptive | vanilla)
//   model.*   network shape and AEM options
//   train.*   optimisation and schedule
train::TrainConfig parse_train_config(std::istream& in, train::TrainConfig base = {});
train::TrainConfig load_train_config(const std::string& path, train::TrainConfig base = {});

// Applies a single "key=value" override.
void apply_setting(train::TrainConfig& config, const std::string& key, const std::string& value);

// Canonical dump in the same format; parse(dump(c)) == c.
void write_train_config(std::ostream& out, const train::TrainConfig& config);

// Stable 64-bit fingerprint of the canonical dump, used to key cached artifacts.
std::uint64_t config_fingerprint(const train::TrainConfig& config);

sim::Visibility parse_visibility(const std::string& text);
const char* to_string(sim::Visibility v);
reward::RewardMode parse_reward_mode(const std::string& text);
const char* to_string(reward::RewardMode m);

}  // namespace aemcarl
