#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace e2loop {

using LogSink = std::function<void(std::string_view line)>;

// Process-wide sink for structured log lines. Empty sink discards.
void set_log_sink(LogSink sink);
void log_line(const std::string& line);

}  // namespace e2loop
