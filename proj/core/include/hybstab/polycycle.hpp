#pragma once

#include <string>
#include <vector>

#include "hybstab/singularity.hpp"

namespace hybstab {

struct EdgeDecl {
  std::size_t from = 0;  // index of the singularity whose exit starts the edge
  std::size_t to = 0;    // index of the singularity the edge flows into
  std::vector<Vec2> waypoints;
};

struct PolycycleSpec {
  std::vector<SingularityQuery> singularities;
  std::vector<EdgeDecl> edges;
  SectionDef section;
  int interior_side = 1;
  bool assume_flat = false;
};

/// Parse and validate a polycycle spec document against the loaded system
/// (manifold names are resolved here).
PolycycleSpec load_polycycle_spec(const std::string& json_text, const HybridSystemDef& sys);

struct GraphicNumber {
  double value = 0.0;
  bool infinite = false;
};

/// Product of the hyperbolicity ratios; infinite absorbs.
/// Throws on an indeterminate ratio.
GraphicNumber graphic_number(const std::vector<SingularityReport>& reports);

enum class Verdict { Stable, Unstable, Inconclusive };
const char* verdict_name(Verdict v);

struct StabilityVerdict {
  GraphicNumber r;
  Verdict verdict = Verdict::Inconclusive;
  std::string inconclusive_reason;
  std::vector<SingularityReport> reports;
  struct EdgeResidual {
    std::size_t edge = 0;
    double residual = 0.0;
    bool pass = false;
    int crossings = 0;  // mid-edge jump crossings encountered
    std::string note;
  };
  std::vector<EdgeResidual> connections;
};

using EdgeResidual = StabilityVerdict::EdgeResidual;

/// Stability verdict from the graphic number alone: Stable above 1,
/// Unstable below, Inconclusive within r_margin of 1.
StabilityVerdict classify_stability(const GraphicNumber& r, double r_margin);

/// Launch from each singularity's exit and measure how closely the flow
/// reaches the next singularity's entry. Saddle targets measure distance
/// to the stable-manifold line inside the linearization box; jump targets
/// measure distance to the declared point along the manifold.
std::vector<EdgeResidual> verify_connections(const HybridSystemDef& sys, const PolycycleSpec& spec,
                                             const std::vector<SingularityReport>& reports);

/// Full pipeline: per-vertex analysis, hyperbolicity checks, connection
/// verification, graphic number, stability verdict.
/// Throws NotHyperbolicError naming the violated condition.
StabilityVerdict analyze_polycycle(const HybridSystemDef& sys, const PolycycleSpec& spec,
                                   int max_order);

}  // namespace hybstab
