#include <algorithm>
#include <cmath>

#include <omp.h>

#include "blocks/eval.hpp"
#include "blocks/learn.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace blocks;

namespace {

EvalOptions options() {
  EvalOptions o;
  o.horizon = 40;
  o.history = 2;
  o.seed = 3;
  return o;
}

}  // namespace

TEST_CASE("replaying demonstrations completes every task") {
  const auto data = testutil::small_dataset(30);
  const auto rep = evaluate(*demonstration_agent(), data.train, data.geometry, options());
  for (const auto& e : rep.episodes) {
    CHECK(e.final_error < 1.0);
    CHECK(e.completed);
  }
  CHECK(rep.aggregate.completion_rate == 1.0);
}

TEST_CASE("stop baseline error equals the start-to-goal distance") {
  const auto data = testutil::small_dataset(30);
  const auto rep = evaluate(*stop_baseline(), data.train, data.geometry, options());
  for (size_t i = 0; i < rep.episodes.size(); ++i) {
    const auto& ex = data.train[i];
    CHECK(rep.episodes[i].final_error == state_distance(ex.start, ex.goal));
    CHECK(rep.episodes[i].steps == 1);
    CHECK_FALSE(rep.episodes[i].hit_horizon);
  }
}

TEST_CASE("random baseline is seed-deterministic and drifts further than stop") {
  const auto data = testutil::small_dataset(60);
  const auto a = evaluate(*random_baseline(), data.train, data.geometry, options());
  const auto b = evaluate(*random_baseline(), data.train, data.geometry, options());
  CHECK(report_to_json(a) == report_to_json(b));
  const auto stop = evaluate(*stop_baseline(), data.train, data.geometry, options());
  CHECK(a.aggregate.mean_error > stop.aggregate.mean_error);
}

TEST_CASE("a single-member ensemble equals the plain policy") {
  const auto data = testutil::small_dataset(8);
  const auto cfg = testutil::tiny_config();
  const auto p = make_policy(data, cfg, HeadKind::Factored);
  const auto ctx = demonstration_context(data.train[0], 0, data.geometry, cfg.history);
  const auto single = action_distribution(p, ctx).dist;
  const auto ens = ensemble_distribution({&p}, ctx);
  CHECK(ens.dir_probs == single.dir_probs);
  CHECK(ens.block_probs == single.block_probs);

  const auto three = ensemble_distribution({&p, &p, &p}, ctx);
  for (size_t i = 0; i < single.dir_probs.size(); ++i)
    CHECK(three.dir_probs[i] == doctest::Approx(single.dir_probs[i]).epsilon(1e-15));

  auto opt = options();
  const auto r1 = evaluate(*policy_agent({&p}, Decode::Greedy), data.train, data.geometry, opt);
  const auto r3 =
      evaluate(*policy_agent({&p, &p, &p}, Decode::Greedy), data.train, data.geometry, opt);
  for (size_t i = 0; i < r1.episodes.size(); ++i)
    CHECK(r1.episodes[i].final_error == r3.episodes[i].final_error);
}

TEST_CASE("episode invariants hold for a sampling policy") {
  const auto data = testutil::small_dataset(30);
  const auto cfg = testutil::tiny_config();
  const auto p = make_policy(data, cfg, HeadKind::Factored);
  auto opt = options();
  opt.horizon = 6;
  const auto rep = evaluate(*policy_agent({&p}, Decode::Sample), data.train, data.geometry, opt);
  for (const auto& e : rep.episodes) {
    CHECK(e.min_distance <= e.final_error);
    CHECK(e.steps >= 1);
    CHECK(e.steps <= opt.horizon);
    CHECK(e.completed == (e.final_error < 1.0));
    if (e.hit_horizon) CHECK(e.steps == opt.horizon);
    CHECK(e.mean_entropy > 0.0);
  }
}

TEST_CASE("aggregates agree with a recomputation from the episodes") {
  const auto data = testutil::small_dataset(25);
  const auto rep = evaluate(*random_baseline(), data.train, data.geometry, options());
  double err = 0, mins = 0, comp = 0, steps = 0, hor = 0;
  std::vector<double> errors;
  for (const auto& e : rep.episodes) {
    err += e.final_error;
    mins += e.min_distance;
    comp += e.completed;
    steps += e.steps;
    hor += e.hit_horizon;
    errors.push_back(e.final_error);
  }
  const double n = static_cast<double>(rep.episodes.size());
  std::sort(errors.begin(), errors.end());
  CHECK(rep.aggregate.mean_error == doctest::Approx(err / n).epsilon(1e-12));
  CHECK(rep.aggregate.mean_min_distance == doctest::Approx(mins / n).epsilon(1e-12));
  CHECK(rep.aggregate.completion_rate == doctest::Approx(comp / n).epsilon(1e-12));
  CHECK(rep.aggregate.mean_steps == doctest::Approx(steps / n).epsilon(1e-12));
  CHECK(rep.aggregate.horizon_rate == doctest::Approx(hor / n).epsilon(1e-12));
  CHECK(rep.aggregate.median_error == errors[(errors.size() - 1) / 2]);

  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j["episodes"].size() == rep.episodes.size());
  CHECK(j["aggregate"]["mean_error"].get<double>() == rep.aggregate.mean_error);
  const auto row = aggregate_csv_row(rep.aggregate);
  const auto header = aggregate_csv_header();
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
}

TEST_CASE("lower median") {
  CHECK(lower_median({}) == 0.0);
  CHECK(lower_median({4.0}) == 4.0);
  CHECK(lower_median({3.0, 1.0, 2.0, 4.0}) == 2.0);
  CHECK(lower_median({5.0, 1.0, 3.0}) == 3.0);
}

TEST_CASE("evaluation does not depend on the thread count") {
  const auto data = testutil::small_dataset(20);
  const auto cfg = testutil::tiny_config();
  const auto p = make_policy(data, cfg, HeadKind::Factored);
  const auto agent = policy_agent({&p}, Decode::Sample);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = report_to_json(evaluate(*agent, data.train, data.geometry, options()));
  omp_set_num_threads(3);
  const auto b = report_to_json(evaluate(*agent, data.train, data.geometry, options()));
  omp_set_num_threads(saved);
  CHECK(a == b);
}
