#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blocks/env.hpp"
#include "blocks/lang.hpp"
#include "blocks/learn.hpp"

namespace blocks {

enum class Algo { CbPg, Supervised, Reinforce, Dqn, Planner, Stop, Random };

const char* algo_name(Algo a);
std::optional<Algo> parse_algo(const std::string& s);

struct ExperimentConfig {
  std::string preset = "desk";
  BoardGeometry geometry;
  // Exactly one data source.
  std::optional<std::string> corpus;
  std::optional<SyntheticSpec> synthetic;
  // Optional held-out corpora; without them the data is split 70/10/20.
  std::optional<std::string> validation_corpus;
  std::optional<std::string> test_corpus;
  Algo algo = Algo::CbPg;
  LearnConfig learn;
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  void validate() const;
};

// Named presets: "desk" (small synthetic suite) and "full-scale".
ExperimentConfig preset_config(const std::string& name);

// The JSON object may name a preset, which is expanded first; remaining keys
// override it. Relative paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

struct Splits {
  std::vector<TaskExample> train;
  std::vector<TaskExample> validation;
  std::vector<TaskExample> test;
};

// Seeded shuffle, then 70% train, 10% validation, the rest test.
Splits split_examples(std::vector<TaskExample> examples, std::uint64_t seed);

struct PreparedData {
  Dataset dataset;  // train + validation as monitor
  std::vector<TaskExample> test;
};

// Loads or generates the examples, fills demonstrations, builds the
// vocabulary from the training split and tokenizes everything.
PreparedData prepare_data(const ExperimentConfig& cfg);

}  // namespace blocks
