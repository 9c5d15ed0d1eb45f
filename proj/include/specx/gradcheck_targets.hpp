#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specx/autograd.hpp"

namespace specx {

struct NamedGradcheck {
    std::string name;
    GradcheckReport report;
};

// Canonical finite-difference targets: "ddfc", "dfa", "backbone" (block plus
// the full desk-scale model), or "all". Throws on an unknown group name.
std::vector<NamedGradcheck> run_gradcheck_targets(const std::string& group, std::uint64_t seed);

}  // namespace specx
