#pragma once

#include <spdlog/spdlog.h>

namespace fmc {

// Shared logger writing to stderr. Verbosity comes from the FMC_LOG
// environment variable (trace|debug|info|warn|error|off, default warn).
spdlog::logger& logger();

} // namespace fmc
