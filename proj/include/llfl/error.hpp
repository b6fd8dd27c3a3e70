#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace llfl {

// All library failures surface as llfl::Error with a human-readable message.
// The CLI catches it at the top level and exits nonzero.
class Error : public std::runtime_error {
public:
    explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

namespace detail {

inline void format_parts(std::ostringstream&) {}

template <typename T, typename... Rest>
void format_parts(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    format_parts(os, rest...);
}

} // namespace detail

template <typename... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    detail::format_parts(os, parts...);
    throw Error(os.str());
}

// Precondition check; use for caller errors, not internal assertions.
template <typename... Parts>
void require(bool cond, const Parts&... parts) {
    if (!cond) fail(parts...);
}

} // namespace llfl
