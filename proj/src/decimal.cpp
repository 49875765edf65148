#include "modfnn/decimal.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "modfnn/error.hpp"

namespace modfnn {

double round_decimal(double x, int digits) {
  if (!std::isfinite(x) || x == 0.0) return x == 0.0 ? 0.0 : x;

  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::scientific);
  std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));

  const bool negative = text.front() == '-';
  if (negative) text.remove_prefix(1);
  const auto epos = text.find('e');
  int exponent = 0;
  std::from_chars(text.data() + epos + 1 + (text[epos + 1] == '+' ? 1 : 0),
                  text.data() + text.size(), exponent);
  std::string mantissa;
  for (char c : text.substr(0, epos))
    if (c != '.') mantissa.push_back(c);

  // mantissa digit k carries place value 10^(exponent - k)
  const long keep = static_cast<long>(exponent) + digits + 1;
  if (keep >= static_cast<long>(mantissa.size())) return x;
  if (keep < 0) return 0.0;

  std::string kept = mantissa.substr(0, static_cast<std::size_t>(keep));
  const char first_dropped = mantissa[static_cast<std::size_t>(keep)];
  bool rest_nonzero = false;
  for (std::size_t i = static_cast<std::size_t>(keep) + 1; i < mantissa.size(); ++i)
    rest_nonzero |= mantissa[i] != '0';

  bool round_up = first_dropped > '5' || (first_dropped == '5' && rest_nonzero);
  if (first_dropped == '5' && !rest_nonzero) {
    const int last = kept.empty() ? 0 : kept.back() - '0';
    round_up = (last % 2) == 1;
  }
  if (kept.empty()) kept = "0";
  if (round_up) {
    int i = static_cast<int>(kept.size()) - 1;
    for (; i >= 0; --i) {
      if (kept[static_cast<std::size_t>(i)] == '9') {
        kept[static_cast<std::size_t>(i)] = '0';
      } else {
        ++kept[static_cast<std::size_t>(i)];
        break;
      }
    }
    if (i < 0) kept.insert(kept.begin(), '1');
  }
  if (kept.find_first_not_of('0') == std::string::npos) return 0.0;

  std::string out = (negative ? "-" : "") + kept + "e" + std::to_string(-digits);
  double value = 0.0;
  std::from_chars(out.data(), out.data() + out.size(), value);
  return value;
}

std::string format_fixed(double x, int digits) {
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, digits);
  std::string s(buf, res.ptr);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_shortest(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text) {
  auto parse_one = [&](std::string_view part) {
    double v = 0.0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (res.ec != std::errc{} || res.ptr != part.data() + part.size())
      throw DataError("not a number: '" + std::string(text) + "'");
    return v;
  };
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const double den = parse_one(text.substr(slash + 1));
    if (den == 0.0) throw DataError("zero denominator: '" + std::string(text) + "'");
    return parse_one(text.substr(0, slash)) / den;
  }
  return parse_one(text);
}

}  // namespace modfnn
