#pragma once

// One differential execution of a trace: reference vs divergent under the
// trace's own assignment (cross-connector), and divergent under the trace's
// assignment vs divergent under alternate assignments (cross-property).

#include <set>
#include <vector>

#include "conndiff/backend.hpp"
#include "conndiff/compare.hpp"

namespace conndiff {

struct DifferentialSetup {
  DivergenceCatalog divergence;
  std::set<CompareMode> modes = {CompareMode::CrossConnector, CompareMode::CrossProperty};
  bool message_sensitive = false;
};

struct DifferentialResult {
  std::vector<ExecutionReport> reports;  // reference, divergent, then one per alternate
  std::vector<Discrepancy> discrepancies;
};

inline Trace with_assignment(Trace t, PropertyAssignment a) {
  t.property_assignment = std::move(a);
  return t;
}

/// Alternates equal to the trace's own assignment are skipped.
inline DifferentialResult run_differential(const Trace& trace, const DifferentialSetup& setup,
                                           const std::vector<PropertyAssignment>& alternates) {
  const auto reference = make_reference();
  const auto divergent = make_divergent(setup.divergence);
  DifferentialResult out;
  const bool cross_connector = setup.modes.count(CompareMode::CrossConnector) > 0;
  const bool cross_property = setup.modes.count(CompareMode::CrossProperty) > 0;

  const auto left = divergent->execute(trace);
  if (cross_connector) {
    auto ref = reference->execute(trace);
    auto ds = compare(ref, left, {CompareMode::CrossConnector, setup.message_sensitive});
    out.discrepancies.insert(out.discrepancies.end(), ds.begin(), ds.end());
    out.reports.push_back(std::move(ref));
  }
  out.reports.push_back(left);
  if (cross_property) {
    for (const auto& alt : alternates) {
      if (alt == trace.property_assignment) continue;
      auto right = divergent->execute(with_assignment(trace, alt));
      auto ds = compare(left, right, {CompareMode::CrossProperty, setup.message_sensitive});
      out.discrepancies.insert(out.discrepancies.end(), ds.begin(), ds.end());
      out.reports.push_back(std::move(right));
    }
  }
  return out;
}

}  // namespace conndiff
