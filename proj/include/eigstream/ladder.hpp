#pragma once

// Geometric guess ladders for unknown norms (operator norm, Frobenius norm).
// Running one estimator per rung in parallel guarantees some rung is a
// 2-approximation of the unknown quantity.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace eigstream {

struct GuessLadder {
  double floor_value = 0.0;
  double cap_value = 0.0;
  std::vector<double> guesses;  // floor_value * 2^i, consecutive ratio exactly 2

  std::size_t size() const { return guesses.size(); }
  double operator[](std::size_t i) const { return guesses[i]; }

  // Index of the rung g with g <= x < 2g (the 2-approximation from below),
  // clamped to the ladder ends for out-of-range x.
  std::size_t bracketing_index(double x) const {
    if (guesses.empty()) throw std::logic_error("GuessLadder: empty");
    if (x <= guesses.front()) return 0;
    std::size_t i = 0;
    while (i + 1 < guesses.size() && guesses[i + 1] <= x) ++i;
    return i;
  }
};

// Ladder {floor*2^i} stopping at the first rung >= cap (inclusive), so every
// x in [floor, cap] has a rung g with g <= x < 2g.
inline GuessLadder ladder_for(double floor_value, double cap_value) {
  if (!(floor_value > 0.0) || !(floor_value < cap_value))
    throw std::invalid_argument("ladder_for: need 0 < floor < cap");
  GuessLadder ladder;
  ladder.floor_value = floor_value;
  ladder.cap_value = cap_value;
  double g = floor_value;
  while (true) {
    ladder.guesses.push_back(g);
    if (g >= cap_value) break;
    g *= 2.0;
  }
  return ladder;
}

// Default range reflecting poly(nd)-bounded matrix entries: [1/(nd)^4, (nd)^4].
inline GuessLadder default_ladder(double n, double d) {
  const double nd = n * d;
  const double p4 = nd * nd * nd * nd;
  return ladder_for(1.0 / p4, p4);
}

}  // namespace eigstream
