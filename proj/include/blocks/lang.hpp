#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blocks/env.hpp"

namespace blocks {

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NoPath : public Error {
 public:
  using Error::Error;
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();
  // Sorted unique tokens of every text, after normalization.
  static Vocabulary build(const std::vector<std::string>& texts);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& token) const;  // kUnk when unknown
  const std::string& token(int id) const { return tokens_.at(id); }
  // Known tokens in id order, excluding the reserved entries.
  std::vector<std::string> known_tokens() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

// Lowercased alphanumeric words; everything else separates.
std::vector<std::string> normalize_words(const std::string& raw);

struct Instruction {
  std::vector<int> tokens;
  std::string raw;
};

Instruction tokenize(const std::string& raw, const Vocabulary& vocab);

struct Execution {
  std::vector<std::pair<WorldState, Action>> steps;
  int length() const { return static_cast<int>(steps.size()); }
};

struct TaskExample {
  std::string id;
  Instruction instruction;
  WorldState start;
  WorldState goal;
  std::optional<Execution> demonstration;

  // Index of the single block whose position differs between start and goal.
  int moved_block() const;
};

// Throws ValidationError describing the violated rule.
void validate_example(const TaskExample& ex, const BoardGeometry& g);

// Minimum-length path for the single changed block, terminated by STOP.
// Ties resolve N < S < E < W.
Execution make_demonstration(const WorldState& start, const WorldState& goal,
                             const BoardGeometry& g);

// Corpus files hold one JSON object per line; tokens are left empty until
// tokenize_examples is called with a vocabulary.
std::vector<TaskExample> load_corpus(const std::string& path,
                                     const BoardGeometry& g);
std::vector<TaskExample> parse_corpus(const std::string& text,
                                      const BoardGeometry& g);
std::string format_corpus(const std::vector<TaskExample>& examples,
                          const BoardGeometry& g);
void save_corpus(const std::string& path,
                 const std::vector<TaskExample>& examples,
                 const BoardGeometry& g);

void tokenize_examples(std::vector<TaskExample>& examples, const Vocabulary& vocab);
// Fills missing demonstrations by shortest path.
void ensure_demonstrations(std::vector<TaskExample>& examples,
                           const BoardGeometry& g);

enum class TemplateSet { Basic, Paraphrase };

struct SyntheticSpec {
  std::uint64_t seed = 1;
  int count = 100;
  TemplateSet templates = TemplateSet::Paraphrase;
  double placement_fraction = 0.5;
  int max_displacement = 3;
  int min_moves = 1;
  int present_blocks = 0;  // 0: every block in the geometry
  int resample_budget = 10000;
};

std::vector<TaskExample> generate_synthetic(const SyntheticSpec& spec,
                                            const BoardGeometry& g);

// Every word the synthetic templates can emit for this geometry.
std::vector<std::string> synthetic_lexicon(const BoardGeometry& g);

}  // namespace blocks
