#include "pm2lat/log.hpp"

#include <iostream>
#include <mutex>

namespace pm2lat {

namespace {

std::mutex g_sink_mutex;
void to_stderr(std::string_view m) { std::cerr << "warning: " << m << '\n'; }

WarningSink g_sink = to_stderr;

}  // namespace

void set_warning_sink(WarningSink sink) {
    std::lock_guard lock(g_sink_mutex);
    g_sink = std::move(sink);
}

void reset_warning_sink() { set_warning_sink(to_stderr); }

void warn(std::string_view message) {
    std::lock_guard lock(g_sink_mutex);
    if (g_sink) g_sink(message);
}

}  // namespace pm2lat
