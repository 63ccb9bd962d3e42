#pragma once

// studio.hpp pulls in Eigen and must precede httplib: <resolv.h> defines a
// `_res` macro that collides with Eigen identifiers.
#include "cutstudio/studio.hpp"

#include <httplib.h>

namespace cutstudio::studio {

/// Registers the JSON API (see docs/api.md) on `server`.
void install_routes(httplib::Server& server, Studio& studio);

}  // namespace cutstudio::studio
