#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ogaw/gradcheck.hpp"

namespace ogaw {

struct GradCheckCase {
  std::string name;
  GradCheckResult result;
};

/// Finite-difference checks of every differentiable op, the OGA block and a
/// 16×16 end-to-end model, on inputs drawn from `seed`.
std::vector<GradCheckCase> run_gradcheck_battery(std::uint64_t seed);

}  // namespace ogaw
