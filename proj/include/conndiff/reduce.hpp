#pragma once

// Delta-debugging minimization of a discrepancy-exhibiting trace.
//
// Candidates are subsequences of the original op list. After each removal a
// repair pass drops ops whose structural prerequisites disappeared (cursor ops
// without an earlier query, ExecuteBatch without a pending AddBatch), so every
// oracle call sees a valid trace. ddmin is followed by single-removal passes
// until a fixpoint, which makes the result 1-minimal.

#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "conndiff/differential.hpp"
#include "conndiff/trace.hpp"

namespace conndiff {

using Oracle = std::function<bool(const Trace&)>;

struct ReduceOptions {
  /// Maximum oracle evaluations; 0 selects 4 * |ops|^2 + 16.
  std::size_t call_budget = 0;
};

struct ReduceResult {
  Trace trace;
  std::size_t oracle_calls = 0;
  bool budget_exhausted = false;  // true: result is valid and oracle-true but maybe not 1-minimal
};

namespace detail {

/// Drops ops whose prerequisites are gone; `keep` holds indices into `ops`.
inline std::vector<std::size_t> repair(const std::vector<TraceOp>& ops, std::vector<std::size_t> keep) {
  std::vector<std::size_t> out;
  bool seen_query = false;
  int pending_batch = 0;
  for (auto i : keep) {
    const auto& o = ops[i];
    if (is<op::ExecuteQuery>(o)) seen_query = true;
    if ((is<op::CursorMove>(o) || is<op::ReadRow>(o)) && !seen_query) continue;
    if (is<op::AddBatch>(o)) ++pending_batch;
    if (is<op::ExecuteBatch>(o)) {
      if (pending_batch == 0) continue;
      pending_batch = 0;
    }
    out.push_back(i);
  }
  return out;
}

inline Trace project(const Trace& t, const std::vector<std::size_t>& keep) {
  Trace out = t;
  out.ops.clear();
  for (auto i : keep) out.ops.push_back(t.ops[i]);
  return out;
}

struct BudgetExhausted {};

}  // namespace detail

inline ReduceResult reduce(const Trace& trace, const Oracle& oracle, const ReduceOptions& options = {}) {
  if (!is_valid(trace)) throw Error("reduce: input trace is invalid: " + validate(trace).front());
  const std::size_t n = trace.ops.size();
  const std::size_t budget = options.call_budget ? options.call_budget : 4 * n * n + 16;

  ReduceResult result;
  std::map<std::vector<std::size_t>, bool> cache;
  auto test = [&](const std::vector<std::size_t>& keep) {
    if (auto it = cache.find(keep); it != cache.end()) return it->second;
    if (result.oracle_calls >= budget) throw detail::BudgetExhausted{};
    ++result.oracle_calls;
    const bool v = oracle(detail::project(trace, keep));
    cache.emplace(keep, v);
    return v;
  };

  std::vector<std::size_t> current(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = i;
  if (!test(current)) throw Error("nothing to reduce");

  // Index 0 is Connect and always stays.
  auto with_connect = [](const std::vector<std::size_t>& body) {
    std::vector<std::size_t> keep{0};
    keep.insert(keep.end(), body.begin(), body.end());
    return keep;
  };
  auto body_of = [](const std::vector<std::size_t>& keep) {
    return std::vector<std::size_t>(keep.begin() + 1, keep.end());
  };

  try {
    // ddmin over the removable ops.
    std::size_t granularity = 2;
    while (current.size() > 1) {
      auto body = body_of(current);
      granularity = std::min(granularity, body.size());
      std::vector<std::vector<std::size_t>> chunks(granularity);
      for (std::size_t i = 0; i < body.size(); ++i) chunks[i * granularity / body.size()].push_back(body[i]);

      bool progressed = false;
      // Subsets first, then complements.
      for (const auto& chunk : chunks) {
        auto keep = detail::repair(trace.ops, with_connect(chunk));
        if (keep.size() < current.size() && test(keep)) {
          current = keep;
          granularity = 2;
          progressed = true;
          break;
        }
      }
      if (!progressed) {
        for (std::size_t c = 0; c < chunks.size() && !progressed; ++c) {
          std::vector<std::size_t> rest;
          for (std::size_t d = 0; d < chunks.size(); ++d)
            if (d != c) rest.insert(rest.end(), chunks[d].begin(), chunks[d].end());
          std::sort(rest.begin(), rest.end());
          auto keep = detail::repair(trace.ops, with_connect(rest));
          if (keep.size() < current.size() && test(keep)) {
            current = keep;
            granularity = std::max<std::size_t>(granularity - 1, 2);
            progressed = true;
          }
        }
      }
      if (progressed) continue;
      if (granularity >= body.size()) break;
      granularity = std::min(granularity * 2, body.size());
    }

    // Single-removal passes to a fixpoint.
    for (bool changed = true; changed;) {
      changed = false;
      for (std::size_t pos = 1; pos < current.size(); ++pos) {
        auto keep = current;
        keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(pos));
        keep = detail::repair(trace.ops, keep);
        if (test(keep)) {
          current = keep;
          changed = true;
          break;
        }
      }
    }
  } catch (const detail::BudgetExhausted&) {
    result.budget_exhausted = true;
  }

  result.trace = detail::project(trace, current);
  return result;
}

/// Oracle: the differential setup reports at least one discrepancy.
inline Oracle make_discrepancy_oracle(DifferentialSetup setup, std::vector<PropertyAssignment> alternates) {
  return [setup = std::move(setup), alternates = std::move(alternates)](const Trace& t) {
    return !run_differential(t, setup, alternates).discrepancies.empty();
  };
}

/// True when removing any single removable op (all but Connect) yields an
/// invalid trace or a false oracle.
inline bool is_one_minimal(const Trace& t, const Oracle& oracle) {
  for (std::size_t i = 1; i < t.ops.size(); ++i) {
    Trace c = t;
    c.ops.erase(c.ops.begin() + static_cast<std::ptrdiff_t>(i));
    if (is_valid(c) && oracle(c)) return false;
  }
  return true;
}

}  // namespace conndiff
