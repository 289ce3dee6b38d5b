#pragma once

#include <string>

#include "hybstab/return_map.hpp"

namespace hybstab::cli {

/// Static SVG of (s, pi(s)) points against the diagonal, axes auto-scaled
/// with 5% margins. The generation-time comment is omitted when
/// `reproducible` is set so reruns are byte-identical.
std::string probe_svg(const hybstab::ProbeResult& probe, bool reproducible);

}  // namespace hybstab::cli
