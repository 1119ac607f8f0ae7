#pragma once

#include <functional>
#include <string_view>

namespace knife {

using WarningHandler = std::function<void(std::string_view)>;

// Default handler writes to std::clog. Passing an empty handler silences warnings.
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace knife
