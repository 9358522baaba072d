#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blocks {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class IncomparableStates : public Error {
 public:
  using Error::Error;
};

// Board of width x height cells. One cell is one block width and one step.
struct BoardGeometry {
  int width = 25;
  int height = 25;
  std::vector<std::string> block_ids;
  double step_fraction = 0.04;

  static BoardGeometry from_step_fraction(double step_fraction,
                                          std::vector<std::string> block_ids);

  int num_blocks() const { return static_cast<int>(block_ids.size()); }
  // |blocks| * 4 + STOP
  int num_actions() const { return num_blocks() * 4 + 1; }
  int block_index(const std::string& id) const;  // -1 if unknown
  void validate() const;
};

enum class Direction : std::uint8_t { North = 0, South = 1, East = 2, West = 3 };

inline constexpr std::array<Direction, 4> kDirections = {
    Direction::North, Direction::South, Direction::East, Direction::West};

char direction_letter(Direction d);
std::optional<Direction> parse_direction(const std::string& s);

struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

Cell neighbor(Cell c, Direction d);

struct Action {
  enum class Kind : std::uint8_t { Move, Stop, None };
  Kind kind = Kind::None;
  int block = -1;
  Direction dir = Direction::North;

  static Action move(int block, Direction d) { return {Kind::Move, block, d}; }
  static Action stop() { return {Kind::Stop, -1, Direction::North}; }
  static Action none() { return {Kind::None, -1, Direction::North}; }

  bool is_move() const { return kind == Kind::Move; }
  bool is_stop() const { return kind == Kind::Stop; }
  bool is_none() const { return kind == Kind::None; }

  // Flat index over the selectable set: block*4+dir for moves, blocks*4 for STOP.
  int index(int num_blocks) const;
  static Action from_index(int index, int num_blocks);

  friend bool operator==(const Action& a, const Action& b) {
    if (a.kind != b.kind) return false;
    return a.kind != Kind::Move || (a.block == b.block && a.dir == b.dir);
  }
};

std::string to_string(const Action& a, const BoardGeometry& g);

// Cell per block index; nullopt for blocks absent from the board.
struct WorldState {
  std::vector<std::optional<Cell>> cells;

  WorldState() = default;
  explicit WorldState(int num_blocks) : cells(num_blocks) {}

  int num_blocks() const { return static_cast<int>(cells.size()); }
  bool present(int b) const { return cells[b].has_value(); }
  int present_count() const;
  // Index of the block occupying c, or -1.
  int occupant(Cell c) const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

void validate_state(const WorldState& s, const BoardGeometry& g);

struct StepResult {
  WorldState next_state;
  bool failed = false;
  bool terminal = false;
};

StepResult apply(const WorldState& state, const Action& action,
                 const BoardGeometry& g);

// One-hot block planes, shape (blocks, height, width), row-major.
struct Observation {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static Observation zeros(int channels, int height, int width);
  double at(int c, int r, int col) const {
    return data[(static_cast<size_t>(c) * height + r) * width + col];
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation render(const WorldState& state, const BoardGeometry& g);

// Sum over blocks of Euclidean cell displacement, in block widths.
double state_distance(const WorldState& a, const WorldState& b);

// Distance strictly below one block width.
bool states_equal_relaxed(const WorldState& a, const WorldState& b);

// Line-oriented snapshot: "block_id col row" per present block.
void write_snapshot(std::ostream& out, const WorldState& s,
                    const BoardGeometry& g);
WorldState read_snapshot(std::istream& in, const BoardGeometry& g);

}  // namespace blocks
