#pragma once

#include <string>
#include <string_view>
#include <type_traits>

namespace rewirenet::csv {

/// Shortest round-trip decimal form, '.' separator, locale independent.
std::string number(double v);

/// Appends `fields...` joined by ',' plus '\n'.
template <class... T>
void row(std::string& out, const T&... fields);

namespace detail {
inline void append(std::string& out, std::string_view s) { out.append(s); }
inline void append(std::string& out, const std::string& s) { out.append(s); }
inline void append(std::string& out, const char* s) { out.append(s); }
inline void append(std::string& out, double v) { out.append(number(v)); }
inline void append(std::string& out, bool v) { out.append(v ? "true" : "false"); }
template <class I>
  requires std::is_integral_v<I>
inline void append(std::string& out, I v) {
  out.append(std::to_string(v));
}
}  // namespace detail

template <class... T>
void row(std::string& out, const T&... fields) {
  bool first = true;
  ((out.append(first ? "" : ","), first = false, detail::append(out, fields)), ...);
  out.push_back('\n');
}

}  // namespace rewirenet::csv
