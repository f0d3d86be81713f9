#pragma once

#include <iosfwd>
#include <string>

#include "data/transition_store.hpp"

namespace deflow {

// Line-oriented dataset format. Line 1 is a JSON header
// {"state_dim": S, "action_dim": A}; every further line is one JSON array
// [s_1..s_S, a_1..a_A, r, s'_1..s'_S, terminal] with terminal 0 or 1.
// Reals are written in shortest round-trip form, so read(write(x)) == x.

void write_dataset(const TransitionStore& store, std::ostream& out);
void write_dataset(const TransitionStore& store, const std::string& path);
TransitionStore read_dataset(std::istream& in);
TransitionStore read_dataset(const std::string& path);

/// Shortest decimal representation that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace deflow
