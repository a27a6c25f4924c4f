#include "e2loop/log.hpp"

#include <mutex>

namespace e2loop {

namespace {
std::mutex g_mu;
LogSink g_sink;
}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(g_mu);
  g_sink = std::move(sink);
}

void log_line(const std::string& line) {
  std::lock_guard lock(g_mu);
  if (g_sink) g_sink(line);
}

}  // namespace e2loop
