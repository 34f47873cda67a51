#pragma once

#include <string>

namespace tangle {

// The mixed-state families the toolkit can build, plus file input.
enum class Family { GhzW, GGhzGW, GhzWFlipW, GhzNoise, FromFile };

struct ScenarioSpec {
  Family family = Family::GhzW;
  double p = 0.0;  // mixing weight of the GHZ component, in [0, 1]

  // GGhzGW amplitudes: |gGHZ> = a|000> + b|111> with b = sqrt(1-a^2),
  // |gW> = c|001> + d|010> + f|100> with f = sqrt(1-c^2-d^2).
  double a = 0.2;
  double c = 0.2;
  double d = 0.2;

  // GhzWFlipW: W gets weight q = (1-p)/n, the flipped W gets 1-p-q.
  double n = 2.0;

  std::string path; // FromFile
};

std::string family_name(Family f);
Family family_from_name(const std::string& name); // throws std::invalid_argument

} // namespace tangle
