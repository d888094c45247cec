#pragma once

#include <functional>
#include <string_view>

namespace pm2lat {

using WarningSink = std::function<void(std::string_view)>;

// Warnings (ignored schema fields, degenerate fits) go here. Defaults to stderr.
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);
// Restores the stderr sink.
void reset_warning_sink();

}  // namespace pm2lat
