#include "tangle/scenario.hpp"

#include <stdexcept>

namespace tangle {

std::string family_name(Family f) {
  switch (f) {
    case Family::GhzW: return "ghzw";
    case Family::GGhzGW: return "gghzgw";
    case Family::GhzWFlipW: return "ghzwflipw";
    case Family::GhzNoise: return "ghznoise";
    case Family::FromFile: return "file";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "ghzw") return Family::GhzW;
  if (name == "gghzgw") return Family::GGhzGW;
  if (name == "ghzwflipw") return Family::GhzWFlipW;
  if (name == "ghznoise") return Family::GhzNoise;
  if (name == "file") return Family::FromFile;
  throw std::invalid_argument("unknown state family: " + name);
}

} // namespace tangle
