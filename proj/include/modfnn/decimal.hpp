#pragma once

#include <string>
#include <string_view>

namespace modfnn {

// Rounds x half-to-even at `digits` fractional decimal places, treating x as
// its shortest round-trip decimal representation (so 0.12345 -> 0.1234 at
// four digits even though the nearest double is slightly above the tie).
// Negative zero is normalized to +0.
double round_decimal(double x, int digits);

// Fixed-point text with exactly `digits` fractional digits. "-0.000" is
// printed as "0.000".
std::string format_fixed(double x, int digits);

// Shortest round-trip text for x.
std::string format_shortest(double x);

// Parses a decimal literal or a simple fraction "a/b". Throws DataError.
double parse_real(std::string_view text);

}  // namespace modfnn
