#pragma once

#include <string>

namespace episteady {

/// Shortest decimal text that parses back to the same double ('.' separator, locale-free).
std::string format_double(double value);

/// Fixed 17-significant-digit text, used wherever a file must round-trip bit-exactly.
std::string format_double17(double value);

} // namespace episteady
