#pragma once

// Report comparison: pairs two execution reports op by op and on their final
// state, classifies every difference as a bug or an acknowledged unsafe
// implementation, and turns the list into the round's reward.

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "conndiff/backend.hpp"

namespace conndiff {

enum class DiscrepancyKind {
  ValueMismatch,
  ExceptionMismatch,
  UpdateCountMismatch,
  StateMismatch,
  ResourceLifecycleMismatch,
  MessageMismatch
};

enum class CompareMode { CrossConnector, CrossProperty };

inline std::string to_string(DiscrepancyKind k) {
  switch (k) {
    case DiscrepancyKind::ValueMismatch: return "ValueMismatch";
    case DiscrepancyKind::ExceptionMismatch: return "ExceptionMismatch";
    case DiscrepancyKind::UpdateCountMismatch: return "UpdateCountMismatch";
    case DiscrepancyKind::StateMismatch: return "StateMismatch";
    case DiscrepancyKind::ResourceLifecycleMismatch: return "ResourceLifecycleMismatch";
    case DiscrepancyKind::MessageMismatch: return "MessageMismatch";
  }
  return "?";
}

inline std::string to_string(CompareMode m) {
  return m == CompareMode::CrossConnector ? "cross-connector" : "cross-property";
}

inline CompareMode parse_compare_mode(std::string_view s) {
  if (s == "cross-connector") return CompareMode::CrossConnector;
  if (s == "cross-property") return CompareMode::CrossProperty;
  throw Error("unknown comparison mode: " + std::string(s));
}

struct Discrepancy {
  std::string trace_id;
  std::optional<int> op_index;  // nullopt: final state
  DiscrepancyKind kind = DiscrepancyKind::ValueMismatch;
  CompareMode mode = CompareMode::CrossConnector;
  // Both observed sides, projected onto what the kind's equality compares.
  std::string left;
  std::string right;
  std::string left_source;   // backend id and property assignment
  std::string right_source;
  std::string subject;       // table name or ledger field for final-state entries
  std::optional<TraceOp> op;
  bool forward_only = false;
  std::optional<OutcomeResult> left_result;
  std::optional<OutcomeResult> right_result;
  std::set<std::string> rules;  // attributed divergence rules, when known

  std::string location() const { return op_index ? std::to_string(*op_index) : "final-state"; }
};

struct CompareOptions {
  CompareMode mode = CompareMode::CrossConnector;
  /// Compare exception messages on message-bearing ops (SetMaxRows).
  bool message_sensitive = false;
};

inline bool is_message_bearing(const TraceOp& op) { return is<op::SetMaxRows>(op); }

namespace detail {

inline const outcome::ThrewException* as_exception(const OutcomeResult& r) {
  return std::get_if<outcome::ThrewException>(&r);
}

inline std::string project(const OutcomeResult& r) {
  if (const auto* e = as_exception(r)) {
    std::string s = "ThrewException(" + e->exception_class;
    if (e->update_counts) s += ", counts=" + counts_to_string(*e->update_counts);
    return s + ")";
  }
  return to_string(r);
}

inline std::string source_of(const ExecutionReport& r) {
  return r.backend_id + " " + r.property_assignment.to_string();
}

inline std::string table_text(const TableSnapshot& t) { return "(" + join(t.columns, ",") + ") " + rows_to_string(t.rows); }

// Classifies a differing pair of op results; nullopt when equal under the default equality.
inline std::optional<std::tuple<DiscrepancyKind, std::string, std::string>> diff_results(const OutcomeResult& a,
                                                                                        const OutcomeResult& b,
                                                                                        const TraceOp& op,
                                                                                        bool message_sensitive) {
  const auto* ea = as_exception(a);
  const auto* eb = as_exception(b);
  if (ea && eb) {
    if (ea->exception_class != eb->exception_class)
      return std::make_tuple(DiscrepancyKind::ExceptionMismatch, project(a), project(b));
    if (ea->update_counts != eb->update_counts)
      return std::make_tuple(DiscrepancyKind::UpdateCountMismatch, project(a), project(b));
    if (message_sensitive && is_message_bearing(op) && ea->message != eb->message)
      return std::make_tuple(DiscrepancyKind::MessageMismatch, ea->message, eb->message);
    return std::nullopt;
  }
  if (a == b) return std::nullopt;
  DiscrepancyKind kind;
  auto has_counts = [](const OutcomeResult& r) {
    if (std::holds_alternative<outcome::UpdateCounts>(r)) return true;
    const auto* e = as_exception(r);
    return e && e->update_counts.has_value();
  };
  if (is<op::CheckResultSetClosed>(op))
    kind = DiscrepancyKind::ResourceLifecycleMismatch;
  else if (has_counts(a) || has_counts(b))
    kind = DiscrepancyKind::UpdateCountMismatch;
  else if (ea || eb || std::holds_alternative<outcome::StructuralError>(a) ||
           std::holds_alternative<outcome::StructuralError>(b))
    kind = DiscrepancyKind::ExceptionMismatch;
  else
    kind = DiscrepancyKind::ValueMismatch;
  return std::make_tuple(kind, project(a), project(b));
}

}  // namespace detail

/// All behavioural differences between two runs of the same trace, in op order
/// followed by final-state entries.
inline std::vector<Discrepancy> compare(const ExecutionReport& a, const ExecutionReport& b,
                                        const CompareOptions& options = {}) {
  if (a.trace_id != b.trace_id) throw Error("compare: trace ids differ (" + a.trace_id + " vs " + b.trace_id + ")");
  std::vector<Discrepancy> out;
  auto base = [&] {
    Discrepancy d;
    d.trace_id = a.trace_id;
    d.mode = options.mode;
    d.left_source = detail::source_of(a);
    d.right_source = detail::source_of(b);
    return d;
  };

  const auto n = std::max(a.outcomes.size(), b.outcomes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Outcome* oa = i < a.outcomes.size() ? &a.outcomes[i] : nullptr;
    const Outcome* ob = i < b.outcomes.size() ? &b.outcomes[i] : nullptr;
    Discrepancy d = base();
    d.op_index = static_cast<int>(i);
    if (!oa || !ob) {
      const Outcome* present = oa ? oa : ob;
      d.kind = DiscrepancyKind::ExceptionMismatch;
      d.left = oa ? detail::project(oa->result) : "<absent>";
      d.right = ob ? detail::project(ob->result) : "<absent>";
      d.op = present->op;
      d.forward_only = present->forward_only;
      d.rules = present->rules;
      if (oa) d.left_result = oa->result;
      if (ob) d.right_result = ob->result;
      out.push_back(std::move(d));
      continue;
    }
    auto diff = detail::diff_results(oa->result, ob->result, oa->op, options.message_sensitive);
    if (!diff) continue;
    std::tie(d.kind, d.left, d.right) = *diff;
    d.op = oa->op;
    d.forward_only = oa->forward_only || ob->forward_only;
    d.left_result = oa->result;
    d.right_result = ob->result;
    d.rules = oa->rules;
    d.rules.insert(ob->rules.begin(), ob->rules.end());
    out.push_back(std::move(d));
  }

  std::set<std::string> names;
  for (const auto& [k, v] : a.final_state.tables) names.insert(k);
  for (const auto& [k, v] : b.final_state.tables) names.insert(k);
  for (const auto& name : names) {
    auto ia = a.final_state.tables.find(name);
    auto ib = b.final_state.tables.find(name);
    const bool ha = ia != a.final_state.tables.end();
    const bool hb = ib != b.final_state.tables.end();
    if (ha && hb && ia->second == ib->second) continue;
    Discrepancy d = base();
    d.kind = DiscrepancyKind::StateMismatch;
    d.subject = name;
    d.left = ha ? detail::table_text(ia->second) : "<absent>";
    d.right = hb ? detail::table_text(ib->second) : "<absent>";
    if (auto t = a.table_taint.find(name); t != a.table_taint.end()) d.rules.insert(t->second.begin(), t->second.end());
    if (auto t = b.table_taint.find(name); t != b.table_taint.end()) d.rules.insert(t->second.begin(), t->second.end());
    out.push_back(std::move(d));
  }

  auto ledger = [&](const char* field, bool va, bool vb) {
    if (va == vb) return;
    Discrepancy d = base();
    d.kind = DiscrepancyKind::ResourceLifecycleMismatch;
    d.subject = field;
    d.left = va ? "open" : "closed";
    d.right = vb ? "open" : "closed";
    d.rules = a.ledger_taint;
    d.rules.insert(b.ledger_taint.begin(), b.ledger_taint.end());
    out.push_back(std::move(d));
  };
  ledger("result_set_open", a.final_state.ledger.result_set_open, b.final_state.ledger.result_set_open);
  ledger("statement_open", a.final_state.ledger.statement_open, b.final_state.ledger.statement_open);
  return out;
}

// ---------------------------------------------------------------------------
// Classification

enum class Verdict { Bug, UnsafeImplementation };

inline std::string to_string(Verdict v) { return v == Verdict::Bug ? "Bug" : "UnsafeImplementation"; }

struct Classification {
  Verdict verdict = Verdict::Bug;
  std::string rationale;
};

/// Behaviours a connector keeps for legacy compatibility; deviations confined
/// to these are acknowledged as unsafe rather than reported as bugs.
struct ClassificationContext {
  std::set<std::string> legacy_rules = {"R1"};
};

inline constexpr std::string_view kForwardOnlyViolation = "forward-only-violation";

/// True when the discrepancy is one side refusing and the other side
/// performing a non-Next move on a ForwardOnly result set.
inline bool is_forward_only_navigation(const Discrepancy& d) {
  if (!d.op || !d.forward_only || d.kind != DiscrepancyKind::ExceptionMismatch) return false;
  const auto* move = std::get_if<op::CursorMove>(&*d.op);
  if (!move || move->kind == CursorKind::Next || !d.left_result || !d.right_result) return false;
  auto refused = [](const OutcomeResult& r) {
    const auto* e = detail::as_exception(r);
    return e && e->exception_class == kForwardOnlyViolation;
  };
  auto performed = [](const OutcomeResult& r) {
    return std::holds_alternative<outcome::Unit>(r) || std::holds_alternative<outcome::Value>(r);
  };
  return (refused(*d.left_result) && performed(*d.right_result)) ||
         (refused(*d.right_result) && performed(*d.left_result));
}

inline Classification classify(const Discrepancy& d, const ClassificationContext& ctx = {}) {
  if (is_forward_only_navigation(d))
    return {Verdict::UnsafeImplementation,
            "cursor move " + to_string(std::get<op::CursorMove>(*d.op).kind) +
                " on a TYPE_FORWARD_ONLY result set must throw; legacy-compatible navigation"};
  if (!d.rules.empty()) {
    bool legacy_only = true;
    for (const auto& r : d.rules) legacy_only = legacy_only && ctx.legacy_rules.count(r);
    if (legacy_only)
      return {Verdict::UnsafeImplementation, "follow-on effect of legacy-compatible behaviour " + join({d.rules.begin(), d.rules.end()}, ",")};
  }
  std::string why;
  switch (d.kind) {
    case DiscrepancyKind::StateMismatch:
      why = d.mode == CompareMode::CrossProperty ? "table content depends on connection properties"
                                                 : "table content differs between connectors";
      break;
    case DiscrepancyKind::UpdateCountMismatch: why = "batch/update counts differ"; break;
    case DiscrepancyKind::ExceptionMismatch: why = "exception behaviour differs"; break;
    case DiscrepancyKind::MessageMismatch: why = "exception message differs"; break;
    case DiscrepancyKind::ResourceLifecycleMismatch: why = "resource lifecycle differs"; break;
    case DiscrepancyKind::ValueMismatch: why = "returned value differs"; break;
  }
  return {Verdict::Bug, why + (d.mode == CompareMode::CrossProperty ? " (cross-property)" : "")};
}

/// Number of distinct (kind, location, mode) keys.
inline std::size_t reward_of(const std::vector<Discrepancy>& ds) {
  std::set<std::tuple<int, int, int>> keys;
  for (const auto& d : ds)
    keys.emplace(static_cast<int>(d.kind), d.op_index.value_or(-1), static_cast<int>(d.mode));
  return keys.size();
}

// ---------------------------------------------------------------------------
// JSON-lines archive

inline nlohmann::json to_json(const Discrepancy& d, const Classification& c) {
  nlohmann::json j;
  j["trace_id"] = d.trace_id;
  j["location"] = d.location();
  j["kind"] = to_string(d.kind);
  j["mode"] = to_string(d.mode);
  j["left"] = d.left;
  j["right"] = d.right;
  j["left_source"] = d.left_source;
  j["right_source"] = d.right_source;
  if (!d.subject.empty()) j["subject"] = d.subject;
  if (d.op) j["op"] = describe(*d.op);
  j["forward_only"] = d.forward_only;
  j["rules"] = std::vector<std::string>(d.rules.begin(), d.rules.end());
  j["verdict"] = to_string(c.verdict);
  j["rationale"] = c.rationale;
  return j;
}

}  // namespace conndiff
