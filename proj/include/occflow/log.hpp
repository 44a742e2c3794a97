#pragma once

#include <spdlog/spdlog.h>

namespace occflow {

/// Applies OCCFLOW_LOG={error|info|debug} to the default logger (info when
/// unset or unrecognized). Log output goes to stderr.
void init_logging();

}  // namespace occflow
