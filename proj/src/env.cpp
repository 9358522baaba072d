#include "blocks/env.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace blocks {

BoardGeometry BoardGeometry::from_step_fraction(
    double step_fraction, std::vector<std::string> block_ids) {
  if (!(step_fraction > 0.0 && step_fraction <= 1.0))
    throw InvalidState("step_fraction must be in (0, 1]");
  BoardGeometry g;
  g.step_fraction = step_fraction;
  g.width = g.height = static_cast<int>(std::lround(1.0 / step_fraction));
  g.block_ids = std::move(block_ids);
  g.validate();
  return g;
}

int BoardGeometry::block_index(const std::string& id) const {
  auto it = std::find(block_ids.begin(), block_ids.end(), id);
  return it == block_ids.end() ? -1 : static_cast<int>(it - block_ids.begin());
}

void BoardGeometry::validate() const {
  if (width <= 0 || height <= 0) throw InvalidState("board must be non-empty");
  if (block_ids.empty() || block_ids.size() > 20)
    throw InvalidState("board needs between 1 and 20 block ids");
  std::set<std::string> seen(block_ids.begin(), block_ids.end());
  if (seen.size() != block_ids.size())
    throw InvalidState("block ids must be unique");
}

char direction_letter(Direction d) {
  switch (d) {
    case Direction::North: return 'N';
    case Direction::South: return 'S';
    case Direction::East: return 'E';
    case Direction::West: return 'W';
  }
  return '?';
}

std::optional<Direction> parse_direction(const std::string& s) {
  if (s == "N") return Direction::North;
  if (s == "S") return Direction::South;
  if (s == "E") return Direction::East;
  if (s == "W") return Direction::West;
  return std::nullopt;
}

Cell neighbor(Cell c, Direction d) {
  switch (d) {
    case Direction::North: return {c.col, c.row - 1};
    case Direction::South: return {c.col, c.row + 1};
    case Direction::East: return {c.col + 1, c.row};
    case Direction::West: return {c.col - 1, c.row};
  }
  return c;
}

int Action::index(int num_blocks) const {
  switch (kind) {
    case Kind::Move: return block * 4 + static_cast<int>(dir);
    case Kind::Stop: return num_blocks * 4;
    case Kind::None: break;
  }
  throw Error("NONE is not a selectable action");
}

Action Action::from_index(int index, int num_blocks) {
  if (index == num_blocks * 4) return stop();
  if (index < 0 || index > num_blocks * 4) throw Error("action index out of range");
  return move(index / 4, static_cast<Direction>(index % 4));
}

std::string to_string(const Action& a, const BoardGeometry& g) {
  switch (a.kind) {
    case Action::Kind::Stop: return "STOP";
    case Action::Kind::None: return "NONE";
    case Action::Kind::Move: break;
  }
  return g.block_ids.at(a.block) + "-" + direction_letter(a.dir);
}

int WorldState::present_count() const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(),
                                        [](const auto& c) { return c.has_value(); }));
}

int WorldState::occupant(Cell c) const {
  for (int b = 0; b < num_blocks(); ++b)
    if (cells[b] && *cells[b] == c) return b;
  return -1;
}

static bool in_bounds(Cell c, const BoardGeometry& g) {
  return c.col >= 0 && c.row >= 0 && c.col < g.width && c.row < g.height;
}

void validate_state(const WorldState& s, const BoardGeometry& g) {
  if (s.num_blocks() != g.num_blocks())
    throw InvalidState("state has " + std::to_string(s.num_blocks()) +
                       " block slots, geometry has " +
                       std::to_string(g.num_blocks()));
  std::vector<char> occupied(static_cast<size_t>(g.width) * g.height, 0);
  for (int b = 0; b < s.num_blocks(); ++b) {
    if (!s.cells[b]) continue;
    const Cell c = *s.cells[b];
    if (!in_bounds(c, g))
      throw InvalidState("block " + g.block_ids[b] + " is off the board");
    char& slot = occupied[static_cast<size_t>(c.row) * g.width + c.col];
    if (slot) throw InvalidState("two blocks share a cell");
    slot = 1;
  }
}

StepResult apply(const WorldState& state, const Action& action,
                 const BoardGeometry& g) {
  StepResult r{state, false, false};
  switch (action.kind) {
    case Action::Kind::None:
      throw Error("NONE cannot be executed");
    case Action::Kind::Stop:
      r.terminal = true;
      return r;
    case Action::Kind::Move:
      break;
  }
  if (action.block < 0 || action.block >= state.num_blocks() ||
      !state.present(action.block)) {
    r.failed = true;
    return r;
  }
  const Cell target = neighbor(*state.cells[action.block], action.dir);
  if (!in_bounds(target, g) || state.occupant(target) >= 0) {
    r.failed = true;
    return r;
  }
  r.next_state.cells[action.block] = target;
  return r;
}

Observation Observation::zeros(int channels, int height, int width) {
  Observation o;
  o.channels = channels;
  o.height = height;
  o.width = width;
  o.data.assign(static_cast<size_t>(channels) * height * width, 0.0);
  return o;
}

Observation render(const WorldState& state, const BoardGeometry& g) {
  validate_state(state, g);
  Observation o = Observation::zeros(g.num_blocks(), g.height, g.width);
  for (int b = 0; b < state.num_blocks(); ++b) {
    if (!state.cells[b]) continue;
    const Cell c = *state.cells[b];
    o.data[(static_cast<size_t>(b) * g.height + c.row) * g.width + c.col] = 1.0;
  }
  return o;
}

static void require_comparable(const WorldState& a, const WorldState& b) {
  if (a.num_blocks() != b.num_blocks())
    throw IncomparableStates("states have different block counts");
  for (int i = 0; i < a.num_blocks(); ++i)
    if (a.present(i) != b.present(i))
      throw IncomparableStates("states have different present-block sets");
}

double state_distance(const WorldState& a, const WorldState& b) {
  require_comparable(a, b);
  double total = 0.0;
  for (int i = 0; i < a.num_blocks(); ++i) {
    if (!a.cells[i]) continue;
    const double dc = a.cells[i]->col - b.cells[i]->col;
    const double dr = a.cells[i]->row - b.cells[i]->row;
    total += std::sqrt(dc * dc + dr * dr);
  }
  return total;
}

bool states_equal_relaxed(const WorldState& a, const WorldState& b) {
  return state_distance(a, b) < 1.0;
}

void write_snapshot(std::ostream& out, const WorldState& s,
                    const BoardGeometry& g) {
  for (int b = 0; b < s.num_blocks(); ++b)
    if (s.cells[b])
      out << g.block_ids.at(b) << ' ' << s.cells[b]->col << ' '
          << s.cells[b]->row << '\n';
}

WorldState read_snapshot(std::istream& in, const BoardGeometry& g) {
  WorldState s(g.num_blocks());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string id;
    Cell c;
    if (!(fields >> id >> c.col >> c.row))
      throw InvalidState("snapshot line " + std::to_string(line_no) +
                         ": expected 'block_id col row'");
    const int b = g.block_index(id);
    if (b < 0)
      throw InvalidState("snapshot line " + std::to_string(line_no) +
                         ": unknown block '" + id + "'");
    if (s.cells[b])
      throw InvalidState("snapshot line " + std::to_string(line_no) +
                         ": duplicate block '" + id + "'");
    s.cells[b] = c;
  }
  validate_state(s, g);
  return s;
}

}  // namespace blocks
