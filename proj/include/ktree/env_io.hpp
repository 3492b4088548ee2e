#pragma once

#include <iosfwd>

#include "ktree/env.hpp"

namespace ktree {

// Versioned CSV dump of a dense environment: one row per vertex,
// "level,address,gamma,p" with dot-separated addresses; the p column is
// empty on the leaf level. Round-trips through read_env_csv.
void write_env_csv(const Environment& env, std::ostream& out);
Environment read_env_csv(std::istream& in);

} // namespace ktree
