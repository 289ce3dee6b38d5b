#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "hybstab/flow.hpp"
#include "hybstab/polycycle.hpp"
#include "hybstab/return_map.hpp"
#include "hybstab/singularity.hpp"

namespace hybstab {

/// 17-significant-digit formatting used by every CSV and SVG emitter.
std::string format_g17(double v);

/// Trajectory CSV: header `segment,kind,t,x,y`; kind is arc, jump_pre or
/// jump_post; jumps contribute two rows at equal t.
void write_trajectory_csv(const HybridTrajectory& traj, std::ostream& out);

nlohmann::json trajectory_to_json(const HybridTrajectory& traj);

/// Keys: kind, p, p_bar, nu, lambda, n_s, n_u, k0, a_k0, ratio,
/// ratio_is_infinite, diagnostics. Fields that do not apply are null.
nlohmann::json report_to_json(const SingularityReport& rep);

nlohmann::json verdict_to_json(const StabilityVerdict& v);

/// Probe CSV: header `s,pi_s,gap`.
void write_probe_csv(const ProbeResult& probe, std::ostream& out);

nlohmann::json probe_to_json(const ProbeResult& probe);

/// Keys: s_star, gap, period_time, jumps_per_period.
nlohmann::json fixed_point_to_json(const FixedPointResult& fp);

}  // namespace hybstab
