#include "blocks/lang.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace blocks {

using ojson = nlohmann::ordered_json;

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"} {
  ids_["<pad>"] = kPad;
  ids_["<unk>"] = kUnk;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (v.ids_.count(t)) continue;
    v.ids_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(t);
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& text : texts)
    for (auto& w : normalize_words(text)) words.insert(std::move(w));
  return from_tokens({words.begin(), words.end()});
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::string> Vocabulary::known_tokens() const {
  return {tokens_.begin() + 2, tokens_.end()};
}

std::vector<std::string> normalize_words(const std::string& raw) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char ch : raw) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

Instruction tokenize(const std::string& raw, const Vocabulary& vocab) {
  Instruction ins;
  ins.raw = raw;
  for (const auto& w : normalize_words(raw)) ins.tokens.push_back(vocab.id(w));
  return ins;
}

int TaskExample::moved_block() const {
  for (int b = 0; b < start.num_blocks(); ++b)
    if (start.cells[b] != goal.cells[b]) return b;
  return -1;
}

void validate_example(const TaskExample& ex, const BoardGeometry& g) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("example '" + ex.id + "': " + why);
  };
  if (normalize_words(ex.instruction.raw).empty()) fail("empty instruction");
  try {
    validate_state(ex.start, g);
    validate_state(ex.goal, g);
  } catch (const InvalidState& e) {
    fail(e.what());
  }
  int changed = 0;
  for (int b = 0; b < g.num_blocks(); ++b) {
    if (ex.start.present(b) != ex.goal.present(b))
      fail("start and goal have different present blocks");
    if (ex.start.cells[b] != ex.goal.cells[b]) ++changed;
  }
  if (changed != 1)
    fail("exactly one block must change between start and goal (found " +
         std::to_string(changed) + ")");
  if (!ex.demonstration) return;
  const auto& steps = ex.demonstration->steps;
  if (steps.empty()) fail("empty demonstration");
  if (!(steps.front().first == ex.start)) fail("demonstration does not begin at start");
  if (!steps.back().second.is_stop()) fail("demonstration must end with STOP");
  for (size_t j = 0; j + 1 < steps.size(); ++j) {
    if (!steps[j].second.is_move()) fail("STOP before the end of the demonstration");
    StepResult r = apply(steps[j].first, steps[j].second, g);
    if (r.failed) fail("demonstration step " + std::to_string(j + 1) + " fails");
    if (!(r.next_state == steps[j + 1].first))
      fail("demonstration step " + std::to_string(j + 1) + " does not follow the transition");
  }
  if (!states_equal_relaxed(steps.back().first, ex.goal))
    fail("demonstration does not end at the goal");
}

Execution make_demonstration(const WorldState& start, const WorldState& goal,
                             const BoardGeometry& g) {
  validate_state(start, g);
  validate_state(goal, g);
  int moved = -1;
  for (int b = 0; b < start.num_blocks(); ++b) {
    if (start.present(b) != goal.present(b))
      throw ValidationError("start and goal have different present blocks");
    if (start.cells[b] != goal.cells[b]) {
      if (moved >= 0) throw ValidationError("more than one block changes");
      moved = b;
    }
  }
  if (moved < 0) throw ValidationError("no block changes");

  const int w = g.width, h = g.height;
  auto idx = [w](Cell c) { return static_cast<size_t>(c.row) * w + c.col; };
  std::vector<char> blocked(static_cast<size_t>(w) * h, 0);
  for (int b = 0; b < start.num_blocks(); ++b)
    if (b != moved && start.cells[b]) blocked[idx(*start.cells[b])] = 1;

  // Distance-to-goal field; the walk below follows it greedily in N,S,E,W order.
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> dist(blocked.size(), kInf);
  const Cell target = *goal.cells[moved];
  std::deque<Cell> frontier{target};
  dist[idx(target)] = 0;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    for (Direction d : kDirections) {
      const Cell n = neighbor(c, d);
      if (n.col < 0 || n.row < 0 || n.col >= w || n.row >= h) continue;
      if (blocked[idx(n)] || dist[idx(n)] != kInf) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      frontier.push_back(n);
    }
  }
  Cell cur = *start.cells[moved];
  if (dist[idx(cur)] == kInf)
    throw NoPath("block " + g.block_ids[moved] + " cannot reach its goal cell");

  Execution e;
  WorldState s = start;
  while (dist[idx(cur)] > 0) {
    for (Direction d : kDirections) {
      const Cell n = neighbor(cur, d);
      if (n.col < 0 || n.row < 0 || n.col >= w || n.row >= h) continue;
      if (blocked[idx(n)] || dist[idx(n)] != dist[idx(cur)] - 1) continue;
      e.steps.emplace_back(s, Action::move(moved, d));
      s.cells[moved] = n;
      cur = n;
      break;
    }
  }
  e.steps.emplace_back(s, Action::stop());
  return e;
}

namespace {

ojson state_to_json(const WorldState& s, const BoardGeometry& g) {
  ojson arr = ojson::array();
  for (int b = 0; b < s.num_blocks(); ++b)
    if (s.cells[b])
      arr.push_back(ojson::array({g.block_ids[b], s.cells[b]->col, s.cells[b]->row}));
  return arr;
}

WorldState state_from_json(const ojson& arr, const BoardGeometry& g) {
  if (!arr.is_array()) throw ParseError("state must be a list of [block_id, col, row]");
  WorldState s(g.num_blocks());
  for (const auto& entry : arr) {
    if (!entry.is_array() || entry.size() != 3 || !entry[0].is_string() ||
        !entry[1].is_number_integer() || !entry[2].is_number_integer())
      throw ParseError("state entries must be [block_id, col, row]");
    const int b = g.block_index(entry[0].get<std::string>());
    if (b < 0) throw ParseError("unknown block '" + entry[0].get<std::string>() + "'");
    if (s.cells[b]) throw ParseError("duplicate block '" + entry[0].get<std::string>() + "'");
    s.cells[b] = Cell{entry[1].get<int>(), entry[2].get<int>()};
  }
  return s;
}

}  // namespace

std::vector<TaskExample> parse_corpus(const std::string& text,
                                      const BoardGeometry& g) {
  std::vector<TaskExample> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    TaskExample ex;
    try {
      const ojson rec = ojson::parse(line);
      if (!rec.is_object()) throw ParseError("record must be an object");
      for (const char* key : {"id", "instruction", "start", "goal"})
        if (!rec.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
      if (!rec["id"].is_string() || !rec["instruction"].is_string())
        throw ParseError("'id' and 'instruction' must be strings");
      ex.id = rec["id"].get<std::string>();
      ex.instruction.raw = rec["instruction"].get<std::string>();
      ex.start = state_from_json(rec["start"], g);
      ex.goal = state_from_json(rec["goal"], g);
      if (rec.contains("demonstration")) {
        const auto& demo = rec["demonstration"];
        if (!demo.is_array()) throw ParseError("'demonstration' must be a list");
        Execution e;
        WorldState s = ex.start;
        for (const auto& step : demo) {
          if (!step.is_array() || step.size() != 2 || !step[0].is_string() ||
              !step[1].is_string())
            throw ParseError("demonstration entries must be [block_id, dir-or-STOP]");
          const std::string what = step[1].get<std::string>();
          Action a;
          if (what == "STOP") {
            a = Action::stop();
          } else {
            const auto d = parse_direction(what);
            const int b = g.block_index(step[0].get<std::string>());
            if (!d || b < 0) throw ParseError("bad demonstration action");
            a = Action::move(b, *d);
          }
          e.steps.emplace_back(s, a);
          if (a.is_move()) s = apply(s, a, g).next_state;
        }
        ex.demonstration = std::move(e);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
    try {
      validate_example(ex, g);
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TaskExample> load_corpus(const std::string& path,
                                     const BoardGeometry& g) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), g);
}

std::string format_corpus(const std::vector<TaskExample>& examples,
                          const BoardGeometry& g) {
  std::string out;
  for (const auto& ex : examples) {
    ojson rec;
    rec["id"] = ex.id;
    rec["instruction"] = ex.instruction.raw;
    rec["start"] = state_to_json(ex.start, g);
    rec["goal"] = state_to_json(ex.goal, g);
    if (ex.demonstration) {
      const int moved = ex.moved_block();
      ojson demo = ojson::array();
      for (const auto& [s, a] : ex.demonstration->steps) {
        if (a.is_stop())
          demo.push_back(ojson::array({g.block_ids.at(moved), "STOP"}));
        else
          demo.push_back(ojson::array(
              {g.block_ids.at(a.block), std::string(1, direction_letter(a.dir))}));
      }
      rec["demonstration"] = std::move(demo);
    }
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::string& path,
                 const std::vector<TaskExample>& examples,
                 const BoardGeometry& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write corpus '" + path + "'");
  out << format_corpus(examples, g);
}

void tokenize_examples(std::vector<TaskExample>& examples, const Vocabulary& vocab) {
  for (auto& ex : examples) ex.instruction = tokenize(ex.instruction.raw, vocab);
}

void ensure_demonstrations(std::vector<TaskExample>& examples,
                           const BoardGeometry& g) {
  for (auto& ex : examples)
    if (!ex.demonstration) ex.demonstration = make_demonstration(ex.start, ex.goal, g);
}

// ---------------------------------------------------------------------------
// Synthetic generation

namespace {

const char* kDirWord[4] = {"north", "south", "east", "west"};
const char* kRelWord[4] = {"above", "below", "right of", "left of"};
const char* kCountWord[] = {"zero", "one", "two", "three", "four",
                            "five", "six", "seven", "eight", "nine"};

std::string placement_text(int form, const std::string& a, const std::string& b,
                           int d) {
  switch (form) {
    case 0: return "place the " + a + " block one space " + kDirWord[d] + " of the " + b + " block";
    case 1: return "put " + a + " just " + kRelWord[d] + " " + b;
    default: return "move " + a + " to the " + kDirWord[d] + " side of " + b;
  }
}

std::string displacement_text(int form, const std::string& a, int d, int k) {
  const std::string steps = k < 10 ? kCountWord[k] : std::to_string(k);
  switch (form) {
    case 0: return "move " + a + " " + steps + " steps " + kDirWord[d];
    case 1: return "shift the " + a + " block " + steps + " spaces " + kDirWord[d];
    default: return "slide " + a + " " + kDirWord[d] + " by " + steps;
  }
}

}  // namespace

std::vector<std::string> synthetic_lexicon(const BoardGeometry& g) {
  std::vector<std::string> texts;
  for (int form = 0; form < 3; ++form)
    for (int d = 0; d < 4; ++d) {
      texts.push_back(placement_text(form, "", "", d));
      for (int k = 1; k < 10; ++k) texts.push_back(displacement_text(form, "", d, k));
    }
  for (const auto& id : g.block_ids) texts.push_back(id);
  std::set<std::string> words;
  for (const auto& t : texts)
    for (auto& w : normalize_words(t)) words.insert(w);
  return {words.begin(), words.end()};
}

std::vector<TaskExample> generate_synthetic(const SyntheticSpec& spec,
                                            const BoardGeometry& g) {
  g.validate();
  if (spec.count < 1) throw ValidationError("count must be at least 1");
  const int n_present = spec.present_blocks > 0
                            ? std::min(spec.present_blocks, g.num_blocks())
                            : g.num_blocks();
  if (n_present > g.width * g.height)
    throw ValidationError("more blocks than cells");
  const int forms = spec.templates == TemplateSet::Basic ? 1 : 3;

  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto in_bounds = [&](Cell c) {
    return c.col >= 0 && c.row >= 0 && c.col < g.width && c.row < g.height;
  };

  std::vector<TaskExample> out;
  int budget = spec.resample_budget;
  while (static_cast<int>(out.size()) < spec.count) {
    if (budget-- <= 0)
      throw ValidationError("synthetic generation exhausted its resampling budget");

    // Random collision-free layout of the present blocks.
    std::vector<int> order(g.num_blocks());
    for (int b = 0; b < g.num_blocks(); ++b) order[b] = b;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> present(order.begin(), order.begin() + n_present);
    std::sort(present.begin(), present.end());
    WorldState start(g.num_blocks());
    for (int b : present) {
      Cell c;
      do {
        c = {uniform(0, g.width - 1), uniform(0, g.height - 1)};
      } while (start.occupant(c) >= 0);
      start.cells[b] = c;
    }

    const bool placement = n_present >= 2 &&
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.placement_fraction;
    const int a = present[uniform(0, n_present - 1)];
    const int d = uniform(0, 3);
    const int form = uniform(0, forms - 1);
    WorldState goal = start;
    std::string text;
    if (placement) {
      int b;
      do {
        b = present[uniform(0, n_present - 1)];
      } while (b == a);
      const Cell target = neighbor(*start.cells[b], static_cast<Direction>(d));
      if (!in_bounds(target)) continue;
      const int occ = start.occupant(target);
      if (occ >= 0) continue;  // also rejects a == occupant (already in place)
      goal.cells[a] = target;
      text = placement_text(form, g.block_ids[a], g.block_ids[b], d);
    } else {
      const int k = uniform(1, std::max(1, spec.max_displacement));
      Cell c = *start.cells[a];
      bool clear = true;
      for (int step = 0; step < k && clear; ++step) {
        c = neighbor(c, static_cast<Direction>(d));
        clear = in_bounds(c) && start.occupant(c) < 0;
      }
      if (!clear) continue;
      goal.cells[a] = c;
      text = displacement_text(form, g.block_ids[a], d, k);
    }

    Execution demo;
    try {
      demo = make_demonstration(start, goal, g);
    } catch (const NoPath&) {
      continue;
    }
    if (demo.length() - 1 < spec.min_moves) continue;

    TaskExample ex;
    ex.id = "syn-" + std::to_string(spec.seed) + "-" + std::to_string(out.size());
    ex.instruction.raw = std::move(text);
    ex.start = std::move(start);
    ex.goal = std::move(goal);
    ex.demonstration = std::move(demo);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace blocks
