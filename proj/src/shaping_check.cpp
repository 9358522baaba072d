#include "blocks/shaping_check.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace blocks {

void SmallMDP::validate() const {
  if (n_states < 1 || n_states > 8) throw InvalidMdp("n_states must be in [1, 8]");
  if (n_actions < 1 || n_actions > 4) throw InvalidMdp("n_actions must be in [1, 4]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidMdp("gamma must be in (0, 1)");
  if (static_cast<int>(transitions.size()) != n_states ||
      static_cast<int>(rewards.size()) != n_states)
    throw InvalidMdp("transition/reward tables must have n_states rows");
  for (int s = 0; s < n_states; ++s) {
    if (static_cast<int>(transitions[s].size()) != n_actions ||
        static_cast<int>(rewards[s].size()) != n_actions)
      throw InvalidMdp("tables must have n_actions columns");
    for (int a = 0; a < n_actions; ++a) {
      const auto& row = transitions[s][a];
      if (static_cast<int>(row.size()) != n_states)
        throw InvalidMdp("transition rows must have n_states entries");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) throw InvalidMdp("transition probabilities must be non-negative");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidMdp("transition row (" + std::to_string(s) + ", " +
                         std::to_string(a) + ") is not a distribution");
    }
  }
}

namespace {

Eigen::VectorXd solve_bellman(const Eigen::MatrixXd& P, const Eigen::VectorXd& r,
                              double gamma) {
  const Eigen::MatrixXd A =
      Eigen::MatrixXd::Identity(P.rows(), P.cols()) - gamma * P;
  return A.partialPivLu().solve(r);
}

Eigen::MatrixXd policy_transition(const SmallMDP& mdp, const std::vector<int>& pi) {
  Eigen::MatrixXd P(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int t = 0; t < mdp.n_states; ++t) P(s, t) = mdp.transitions[s][pi[s]][t];
  return P;
}

std::vector<int> decode_policy(std::uint64_t index, int n_states, int n_actions) {
  std::vector<int> pi(n_states);
  for (int s = 0; s < n_states; ++s) {
    pi[s] = static_cast<int>(index % n_actions);
    index /= n_actions;
  }
  return pi;
}

int compare(double a, double b, double tol) {
  if (a - b > tol) return 1;
  if (b - a > tol) return -1;
  return 0;
}

}  // namespace

std::vector<double> policy_values(const SmallMDP& mdp, const std::vector<int>& pi) {
  Eigen::VectorXd r(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) r(s) = mdp.rewards[s][pi[s]];
  const Eigen::VectorXd v = solve_bellman(policy_transition(mdp, pi), r, mdp.gamma);
  return {v.data(), v.data() + v.size()};
}

std::vector<double> shaped_policy_values(const SmallMDP& mdp, const ShapingTerm& term,
                                         const std::vector<int>& pi) {
  const int n = mdp.n_states;
  const double g = mdp.gamma;
  if (term.mode != ShapingMode::StateActionPotential) {
    Eigen::VectorXd r(n);
    for (int s = 0; s < n; ++s) {
      const int a = pi[s];
      double shaped = mdp.rewards[s][a];
      if (term.mode == ShapingMode::StatePotential) {
        double next = 0.0;
        for (int t = 0; t < n; ++t) next += mdp.transitions[s][a][t] * term.state_potential[t];
        shaped += g * next - term.state_potential[s];
      } else {
        shaped += term.table[s][a];
      }
      r(s) = shaped;
    }
    const Eigen::VectorXd v = solve_bellman(policy_transition(mdp, pi), r, g);
    return {v.data(), v.data() + v.size()};
  }

  // Look-back shaping depends on the previous pair, so evaluate on the chain
  // over (previous state, state) with n extra entry states whose previous
  // potential is zero. Entry i is index i; pair (p, s) is n + p*n + s.
  const int m = n + n * n;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd r(m);
  auto phi = [&](int s) { return term.table[s][pi[s]]; };
  for (int s = 0; s < n; ++s) {
    const int a = pi[s];
    r(s) = mdp.rewards[s][a] + g * phi(s);
    for (int t = 0; t < n; ++t) P(s, n + s * n + t) = mdp.transitions[s][a][t];
    for (int p = 0; p < n; ++p) {
      const int row = n + p * n + s;
      r(row) = mdp.rewards[s][a] + g * phi(s) - phi(p);
      for (int t = 0; t < n; ++t) P(row, n + s * n + t) = mdp.transitions[s][a][t];
    }
  }
  const Eigen::VectorXd v = solve_bellman(P, r, g);
  return {v.data(), v.data() + n};
}

OrderReport check_shaping_safety(const SmallMDP& mdp, const ShapingTerm& term,
                                 double tol) {
  mdp.validate();
  const int n = mdp.n_states;
  switch (term.mode) {
    case ShapingMode::StatePotential:
      if (static_cast<int>(term.state_potential.size()) != n)
        throw InvalidMdp("state potential must have n_states entries");
      break;
    case ShapingMode::StateActionPotential:
    case ShapingMode::Explicit:
      if (static_cast<int>(term.table.size()) != n)
        throw InvalidMdp("shaping table must have n_states rows");
      for (const auto& row : term.table)
        if (static_cast<int>(row.size()) != mdp.n_actions)
          throw InvalidMdp("shaping table must have n_actions columns");
      break;
  }

  std::uint64_t count = 1;
  for (int s = 0; s < n; ++s) count *= mdp.n_actions;

  // Column n holds the aggregate (mean over start states).
  const int views = n + 1;
  std::vector<double> base(count * views), shaped(count * views);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
    const auto pi = decode_policy(i, n, mdp.n_actions);
    const auto v = policy_values(mdp, pi);
    const auto u = shaped_policy_values(mdp, term, pi);
    double vs = 0.0, us = 0.0;
    for (int s = 0; s < n; ++s) {
      base[i * views + s] = v[s];
      shaped[i * views + s] = u[s];
      vs += v[s];
      us += u[s];
    }
    base[i * views + n] = vs / n;
    shaped[i * views + n] = us / n;
  }

  OrderReport report;
  report.policies = count;
  std::vector<std::uint64_t> violations(count, 0);
  std::vector<std::int64_t> first_b(count, -1);
  std::vector<int> first_view(count, -1);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(count); ++i) {
    for (std::uint64_t j = i + 1; j < count; ++j) {
      for (int k = 0; k < views; ++k) {
        const int before = compare(base[i * views + k], base[j * views + k], tol);
        const int after = compare(shaped[i * views + k], shaped[j * views + k], tol);
        if (before != after) {
          if (violations[i]++ == 0) {
            first_b[i] = static_cast<std::int64_t>(j);
            first_view[i] = k;
          }
        }
      }
    }
  }
  report.comparisons = count * (count - 1) / 2 * views;
  for (std::uint64_t i = 0; i < count; ++i) {
    report.violations += violations[i];
    if (violations[i] && !report.witness) {
      const std::uint64_t j = first_b[i];
      const int k = first_view[i];
      OrderWitness w;
      w.policy_a = i;
      w.policy_b = j;
      w.start_state = k == n ? -1 : k;
      w.value_a = base[i * views + k];
      w.value_b = base[j * views + k];
      w.shaped_a = shaped[i * views + k];
      w.shaped_b = shaped[j * views + k];
      report.witness = w;
    }
  }
  report.preserved = report.violations == 0;
  return report;
}

SmallMDP random_small_mdp(std::uint64_t seed, int max_states, int max_actions,
                          double gamma) {
  std::mt19937_64 rng(seed);
  SmallMDP m;
  m.n_states = std::uniform_int_distribution<int>(2, max_states)(rng);
  m.n_actions = std::uniform_int_distribution<int>(2, max_actions)(rng);
  m.gamma = gamma;
  std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);
  m.transitions.assign(m.n_states, std::vector<std::vector<double>>(m.n_actions));
  m.rewards.assign(m.n_states, std::vector<double>(m.n_actions));
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a) {
      auto& row = m.transitions[s][a];
      row.resize(m.n_states);
      // Half of the rows deterministic, the rest random distributions.
      if (unit(rng) < 0.5) {
        row.assign(m.n_states, 0.0);
        row[std::uniform_int_distribution<int>(0, m.n_states - 1)(rng)] = 1.0;
      } else {
        double sum = 0.0;
        for (double& p : row) sum += (p = unit(rng));
        for (double& p : row) p /= sum;
      }
      m.rewards[s][a] = sym(rng);
    }
  return m;
}

ShapingTerm random_potential(std::uint64_t seed, const SmallMDP& mdp, ShapingMode mode) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-5.0, 5.0);
  ShapingTerm t;
  t.mode = mode;
  if (mode == ShapingMode::StatePotential) {
    t.state_potential.resize(mdp.n_states);
    for (double& p : t.state_potential) p = sym(rng);
  } else {
    t.table.assign(mdp.n_states, std::vector<double>(mdp.n_actions));
    for (auto& row : t.table)
      for (double& p : row) p = sym(rng);
  }
  return t;
}

TrialSummary run_shaping_trials(int trials, std::uint64_t seed, ShapingMode mode,
                                int max_states, int max_actions, double gamma) {
  TrialSummary sum;
  sum.trials = trials;
  std::vector<std::uint64_t> seeds(2 * static_cast<size_t>(std::max(trials, 0)));
  {
    std::mt19937_64 rng(seed);
    for (auto& s : seeds) s = rng();
  }
  for (int t = 0; t < trials; ++t) {
    const SmallMDP mdp = random_small_mdp(seeds[2 * t], max_states, max_actions, gamma);
    const ShapingTerm term = random_potential(seeds[2 * t + 1], mdp, mode);
    OrderReport r = check_shaping_safety(mdp, term);
    if (r.preserved)
      ++sum.preserved;
    else
      sum.violations.emplace_back(t, std::move(r));
  }
  return sum;
}

MdpFixture parse_mdp_fixture(const std::string& json_text) {
  using nlohmann::json;
  MdpFixture f;
  try {
    const json j = json::parse(json_text);
    f.mdp.n_states = j.at("n_states").get<int>();
    f.mdp.n_actions = j.at("n_actions").get<int>();
    f.mdp.transitions = j.at("transitions").get<std::vector<std::vector<std::vector<double>>>>();
    f.mdp.rewards = j.at("rewards").get<std::vector<std::vector<double>>>();
    f.mdp.gamma = j.at("gamma").get<double>();
    if (j.contains("shaping")) {
      f.term.mode = ShapingMode::Explicit;
      f.term.table = j["shaping"].get<std::vector<std::vector<double>>>();
    } else {
      const json& p = j.at("potential");
      if (!p.empty() && p[0].is_array()) {
        f.term.mode = ShapingMode::StateActionPotential;
        f.term.table = p.get<std::vector<std::vector<double>>>();
      } else {
        f.term.mode = ShapingMode::StatePotential;
        f.term.state_potential = p.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidMdp(std::string("MDP fixture: ") + e.what());
  }
  f.mdp.validate();
  return f;
}

MdpFixture load_mdp_fixture(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidMdp("cannot open MDP fixture '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mdp_fixture(buf.str());
}

std::string format_order_report(const OrderReport& r) {
  std::ostringstream out;
  out << (r.preserved ? "preserved" : "VIOLATED") << " policies=" << r.policies
      << " comparisons=" << r.comparisons << " violations=" << r.violations;
  if (r.witness) {
    const auto& w = *r.witness;
    out << "\n  witness: policies " << w.policy_a << " vs " << w.policy_b << " at "
        << (w.start_state < 0 ? std::string("aggregate") : "start " + std::to_string(w.start_state))
        << ": R values " << w.value_a << " / " << w.value_b << ", R+F values "
        << w.shaped_a << " / " << w.shaped_b;
  }
  return out.str();
}

}  // namespace blocks
