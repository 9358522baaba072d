#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "blocks/env.hpp"
#include "blocks/experiment.hpp"
#include "blocks/lang.hpp"
#include "blocks/learn.hpp"
#include "blocks/policy.hpp"

namespace testutil {

inline blocks::BoardGeometry desk_geometry() {
  blocks::BoardGeometry g;
  g.width = 5;
  g.height = 5;
  g.block_ids = {"red", "green", "blue"};
  g.step_fraction = 0.2;
  return g;
}

inline blocks::WorldState state_of(std::initializer_list<blocks::Cell> cells) {
  blocks::WorldState s;
  for (const auto& c : cells) s.cells.emplace_back(c);
  return s;
}

// Small tokenized synthetic dataset with demonstrations.
inline blocks::Dataset small_dataset(int count, std::uint64_t seed = 7) {
  blocks::Dataset d;
  d.geometry = desk_geometry();
  blocks::SyntheticSpec spec;
  spec.seed = seed;
  spec.count = count;
  d.train = blocks::generate_synthetic(spec, d.geometry);
  std::vector<std::string> texts;
  for (const auto& ex : d.train) texts.push_back(ex.instruction.raw);
  d.vocab = blocks::Vocabulary::build(texts);
  blocks::tokenize_examples(d.train, d.vocab);
  return d;
}

inline blocks::LearnConfig tiny_config() {
  blocks::LearnConfig c;
  c.epochs = 2;
  c.horizon = 10;
  c.dims.embed_dim = 6;
  c.dims.lstm_hidden = 5;
  c.dims.conv = {blocks::ConvLayerSpec{3, 3, 1, 1}};
  c.dims.visual_dim = 7;
  c.dims.block_embed = 3;
  c.dims.dir_embed = 3;
  c.dims.hidden = 9;
  c.history = 2;
  c.supervised_init_epochs = 1;
  c.init = blocks::InitScheme::Glorot;
  return c;
}

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max(std::sqrt(na), std::sqrt(nb));
  if (scale < 1e-9) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

}  // namespace testutil
