#include "pianoscribe/common/log.hpp"

#include <iostream>
#include <mutex>

namespace pianoscribe::log {

namespace {

std::mutex g_mutex;
Sink g_sink = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };

} // namespace

void warn(const std::string& message)
{
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(message);
    }
}

Sink set_warning_sink(Sink sink)
{
    std::lock_guard lock(g_mutex);
    std::swap(g_sink, sink);
    return sink;
}

} // namespace pianoscribe::log
