#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <string_view>

namespace srosr {

// Class identifiers are opaque strings; IDX digit labels are stringified.
using ClassId = std::string;

// A prediction or ground truth: a known class, or std::nullopt for the open class.
using Label = std::optional<ClassId>;

inline constexpr std::string_view kOpenLabel = "OPEN";

inline std::string to_string(const Label& label) {
  return label ? *label : std::string(kOpenLabel);
}

inline Label parse_label(std::string_view text) {
  if (text == kOpenLabel) return std::nullopt;
  return ClassId(text);
}

namespace detail {
inline std::optional<long long> as_integer(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}
}  // namespace detail

// Total order on class ids: integers numerically ("2" < "10"), integers
// before names, names lexicographically.
struct ClassLess {
  bool operator()(std::string_view a, std::string_view b) const {
    const auto ia = detail::as_integer(a);
    const auto ib = detail::as_integer(b);
    if (ia && ib) return *ia != *ib ? *ia < *ib : a < b;
    if (ia.has_value() != ib.has_value()) return ia.has_value();
    return a < b;
  }
};

}  // namespace srosr
