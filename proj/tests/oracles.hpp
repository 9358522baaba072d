#pragma once

#include <climits>
#include <vector>

#include "blocks/env.hpp"

namespace testutil {

// Shortest move count for the single changed block by repeated relaxation over
// the grid until a fixed point; -1 when unreachable.
inline int relaxation_path_length(const blocks::WorldState& start,
                                  const blocks::WorldState& goal,
                                  const blocks::BoardGeometry& g) {
  int moved = -1;
  for (int b = 0; b < start.num_blocks(); ++b)
    if (start.cells[b] != goal.cells[b]) moved = b;
  const int w = g.width, h = g.height;
  std::vector<int> dist(static_cast<size_t>(w) * h, INT_MAX);
  std::vector<bool> wall(dist.size(), false);
  for (int b = 0; b < start.num_blocks(); ++b)
    if (b != moved && start.cells[b]) wall[start.cells[b]->row * w + start.cells[b]->col] = true;
  dist[start.cells[moved]->row * w + start.cells[moved]->col] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const int i = r * w + c;
        if (wall[i]) continue;
        const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
        for (const auto& n : nbr) {
          if (n[0] < 0 || n[1] < 0 || n[0] >= h || n[1] >= w) continue;
          const int j = n[0] * w + n[1];
          if (dist[j] != INT_MAX && dist[j] + 1 < dist[i]) {
            dist[i] = dist[j] + 1;
            changed = true;
          }
        }
      }
  }
  const int t = goal.cells[moved]->row * w + goal.cells[moved]->col;
  return dist[t] == INT_MAX ? -1 : dist[t];
}

}  // namespace testutil
