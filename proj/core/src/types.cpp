#include "hyperaug/types.hpp"

#include "hyperaug/errors.hpp"

namespace hyperaug {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Train: return "train";
    case Role::Val: return "val";
    case Role::Test: return "test";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  if (text == "train") return Role::Train;
  if (text == "val") return Role::Val;
  if (text == "test") return Role::Test;
  throw FormatError("unknown role '" + std::string(text) + "'");
}

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::Balanced: return "B";
    case Scenario::Imbalanced: return "IB";
    case Scenario::Patched: return "P";
  }
  return "?";
}

Scenario parse_scenario(std::string_view text) {
  if (text == "B") return Scenario::Balanced;
  if (text == "IB") return Scenario::Imbalanced;
  if (text == "P") return Scenario::Patched;
  throw ConfigError("unknown scenario '" + std::string(text) + "' (expected B, IB or P)");
}

}  // namespace hyperaug
