#pragma once

#include <string>
#include <string_view>

#include "cdr/errors.hpp"

namespace cdr {

enum class Strategy { Fast, Slow };

inline const char* to_string(Strategy s) noexcept { return s == Strategy::Fast ? "fast" : "slow"; }

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "fast" || s == "Fast") return Strategy::Fast;
  if (s == "slow" || s == "Slow") return Strategy::Slow;
  throw InvalidInput("unknown strategy '" + std::string(s) + "'");
}

}  // namespace cdr
