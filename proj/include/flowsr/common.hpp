// Copyright (C) 2026 the flowsr authors
// SPDX-License-Identifier: Apache-2.0
#ifndef FLOWSR_COMMON_HPP
#define FLOWSR_COMMON_HPP

#include <sstream>
#include <stdexcept>
#include <string>

namespace flowsr {

// All recoverable failures surface as flowsr::Error with a readable message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string format_msg(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

template <typename... Args>
void require(bool cond, const Args&... args) {
  if (!cond) throw Error(format_msg(args...));
}

}  // namespace flowsr

#endif  // FLOWSR_COMMON_HPP
