#include "episteady/text.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace episteady {

std::string format_double(double value) {
    if (value == 0.0) return "0"; // also folds -0
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

std::string format_double17(double value) {
    if (value == 0.0) return "0";
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::general, 17);
    return std::string(buf.data(), end);
}

} // namespace episteady
