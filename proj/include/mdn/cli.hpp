#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mdn {

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on usage errors and 2 on runtime errors.
int parse_and_dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

struct FlagDoc {
  std::string subcommand;
  std::string flag;  ///< longest name, e.g. "--config"
  std::string description;
};

/// Every flag accepted by every subcommand, read back from the parser itself.
std::vector<FlagDoc> documented_flags();

}  // namespace mdn
