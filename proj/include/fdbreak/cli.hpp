#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fdbreak {

inline constexpr const char* kVersion = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int usage = 2;
inline constexpr int data = 3;
inline constexpr int degenerate = 4;
}  // namespace exit_code

// Entry point of the `fdbreak` tool. `args[0]` is the program name. JSON goes
// to `out`, diagnostics and the human-readable summary to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace fdbreak
