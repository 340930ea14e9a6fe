#pragma once

#include <functional>
#include <string>

namespace pianoscribe::log {

using Sink = std::function<void(const std::string&)>;

/// Library code reports recoverable oddities here. Defaults to stderr.
void warn(const std::string& message);

/// Replaces the warning sink and returns the previous one. An empty sink
/// silences warnings.
Sink set_warning_sink(Sink sink);

} // namespace pianoscribe::log
