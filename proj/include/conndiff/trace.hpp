#pragma once

// The connector-trace DSL: a closed catalog of connector API operations, the
// Trace value that strings them together, structural validation, and the
// `conndiff-trace v1` text format.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "conndiff/props.hpp"
#include "conndiff/sql.hpp"
#include "conndiff/util.hpp"

namespace conndiff {

enum class ResultSetType { ForwardOnly, ScrollInsensitive };
enum class Holdability { HoldOverCommit, CloseAtCommit };
enum class CursorKind { Next, Previous, First, Last, BeforeFirst, AfterLast, Absolute };

inline constexpr std::array<CursorKind, 7> kAllCursorKinds = {
    CursorKind::Next,        CursorKind::Previous,  CursorKind::First,   CursorKind::Last,
    CursorKind::BeforeFirst, CursorKind::AfterLast, CursorKind::Absolute};

inline std::string to_string(ResultSetType t) {
  return t == ResultSetType::ForwardOnly ? "ForwardOnly" : "ScrollInsensitive";
}
inline std::string to_string(Holdability h) {
  return h == Holdability::HoldOverCommit ? "HoldOverCommit" : "CloseAtCommit";
}
inline std::string to_string(CursorKind k) {
  switch (k) {
    case CursorKind::Next: return "Next";
    case CursorKind::Previous: return "Previous";
    case CursorKind::First: return "First";
    case CursorKind::Last: return "Last";
    case CursorKind::BeforeFirst: return "BeforeFirst";
    case CursorKind::AfterLast: return "AfterLast";
    case CursorKind::Absolute: return "Absolute";
  }
  return "?";
}

inline std::optional<ResultSetType> parse_result_set_type(std::string_view s) {
  if (s == "ForwardOnly") return ResultSetType::ForwardOnly;
  if (s == "ScrollInsensitive") return ResultSetType::ScrollInsensitive;
  return std::nullopt;
}
inline std::optional<Holdability> parse_holdability(std::string_view s) {
  if (s == "HoldOverCommit") return Holdability::HoldOverCommit;
  if (s == "CloseAtCommit") return Holdability::CloseAtCommit;
  return std::nullopt;
}
inline std::optional<CursorKind> parse_cursor_kind(std::string_view s) {
  for (auto k : kAllCursorKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

namespace op {
struct Connect { bool operator==(const Connect&) const = default; };
struct CreateStatement {
  ResultSetType result_set_type = ResultSetType::ForwardOnly;
  Holdability holdability = Holdability::HoldOverCommit;
  bool operator==(const CreateStatement&) const = default;
};
struct SetMaxRows { std::int64_t n = 0; bool operator==(const SetMaxRows&) const = default; };
struct ExecuteUpdate { std::string sql; bool operator==(const ExecuteUpdate&) const = default; };
struct ExecuteQuery { std::string sql; bool operator==(const ExecuteQuery&) const = default; };
struct AddBatch { std::string sql; bool operator==(const AddBatch&) const = default; };
struct ExecuteBatch { bool operator==(const ExecuteBatch&) const = default; };
struct CursorMove {
  CursorKind kind = CursorKind::Next;
  std::int64_t n = 0;  // only meaningful for Absolute
  bool operator==(const CursorMove&) const = default;
};
struct ReadRow { bool operator==(const ReadRow&) const = default; };
struct GetHoldability { bool operator==(const GetHoldability&) const = default; };
struct GetResultSetHoldability { bool operator==(const GetResultSetHoldability&) const = default; };
struct SetAutoCommit { bool on = true; bool operator==(const SetAutoCommit&) const = default; };
struct Commit { bool operator==(const Commit&) const = default; };
struct Rollback { bool operator==(const Rollback&) const = default; };
struct CloseResultSet { bool operator==(const CloseResultSet&) const = default; };
struct CloseStatement { bool operator==(const CloseStatement&) const = default; };
struct CheckResultSetClosed { bool operator==(const CheckResultSetClosed&) const = default; };
}  // namespace op

using TraceOp = std::variant<op::Connect, op::CreateStatement, op::SetMaxRows, op::ExecuteUpdate, op::ExecuteQuery,
                             op::AddBatch, op::ExecuteBatch, op::CursorMove, op::ReadRow, op::GetHoldability,
                             op::GetResultSetHoldability, op::SetAutoCommit, op::Commit, op::Rollback,
                             op::CloseResultSet, op::CloseStatement, op::CheckResultSetClosed>;

/// Op names in variant index order; this is the closed catalog.
inline constexpr std::array<std::string_view, std::variant_size_v<TraceOp>> kOpNames = {
    "Connect",      "CreateStatement", "SetMaxRows",     "ExecuteUpdate",          "ExecuteQuery",
    "AddBatch",     "ExecuteBatch",    "CursorMove",     "ReadRow",                "GetHoldability",
    "GetResultSetHoldability",         "SetAutoCommit",  "Commit",                 "Rollback",
    "CloseResultSet", "CloseStatement", "CheckResultSetClosed"};

inline std::string_view op_name(const TraceOp& op) { return kOpNames[op.index()]; }

inline std::optional<std::size_t> op_index_of(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == name) return i;
  return std::nullopt;
}

template <typename T>
bool is(const TraceOp& op) {
  return std::holds_alternative<T>(op);
}

/// SQL text carried by the op, if any.
inline const std::string* op_sql(const TraceOp& op) {
  if (auto* u = std::get_if<op::ExecuteUpdate>(&op)) return &u->sql;
  if (auto* q = std::get_if<op::ExecuteQuery>(&op)) return &q->sql;
  if (auto* b = std::get_if<op::AddBatch>(&op)) return &b->sql;
  return nullptr;
}

struct PromptProvenance {
  std::string prompt_id;
  std::int64_t round = 0;
  bool operator==(const PromptProvenance&) const = default;
};

struct Trace {
  std::string id;
  PropertyAssignment property_assignment;
  std::vector<TraceOp> ops;
  std::optional<PromptProvenance> provenance;  // nullopt: written by hand

  bool operator==(const Trace&) const = default;
};

/// Checks payload domains of a single op; returns a reason on failure.
inline std::optional<std::string> payload_violation(const TraceOp& op) {
  if (auto* m = std::get_if<op::SetMaxRows>(&op); m && m->n < 0) return "SetMaxRows requires n >= 0";
  if (auto* c = std::get_if<op::CursorMove>(&op); c && c->kind != CursorKind::Absolute && c->n != 0)
    return "only Absolute cursor moves take n";
  if (const auto* text = op_sql(op)) {
    try {
      const auto stmt = sql::parse(*text);
      if (is<op::ExecuteQuery>(op) && !sql::is_query(stmt)) return "ExecuteQuery requires a SELECT";
      if (is<op::ExecuteUpdate>(op) && sql::is_query(stmt)) return "ExecuteUpdate cannot run a SELECT";
    } catch (const sql::SqlError& e) {
      return std::string(e.what());
    }
  }
  return std::nullopt;
}

/// Every violated structural invariant; empty means the trace is executable.
inline std::vector<std::string> validate(const Trace& trace) {
  std::vector<std::string> out;
  auto at = [](std::size_t i) { return "op " + std::to_string(i) + ": "; };
  if (trace.id.empty()) out.push_back("trace id is empty");
  if (trace.ops.empty()) {
    out.push_back("trace has no ops");
    return out;
  }
  if (!is<op::Connect>(trace.ops.front())) out.push_back("must begin with Connect");
  bool seen_query = false;
  int pending_batch = 0;
  bool seen_connect = false;
  for (std::size_t i = 0; i < trace.ops.size(); ++i) {
    const auto& o = trace.ops[i];
    if (auto bad = payload_violation(o)) out.push_back(at(i) + *bad);
    if (is<op::Connect>(o)) {
      if (seen_connect) out.push_back(at(i) + "more than one Connect");
      seen_connect = true;
    } else if (is<op::ExecuteQuery>(o)) {
      seen_query = true;
    } else if (is<op::CursorMove>(o) || is<op::ReadRow>(o)) {
      if (!seen_query) out.push_back(at(i) + std::string(op_name(o)) + " without a preceding ExecuteQuery");
    } else if (is<op::AddBatch>(o)) {
      ++pending_batch;
    } else if (is<op::ExecuteBatch>(o)) {
      if (pending_batch == 0) out.push_back(at(i) + "ExecuteBatch without AddBatch since the previous ExecuteBatch");
      pending_batch = 0;
    }
  }
  return out;
}

inline bool is_valid(const Trace& t) { return validate(t).empty(); }

// ---------------------------------------------------------------------------
// Text format

inline constexpr std::string_view kTraceMagic = "conndiff-trace";

inline void write_op(RecordWriter& w, const TraceOp& o) {
  w.begin("op").arg(op_name(o));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, op::CreateStatement>) {
          w.field("result_set_type", to_string(v.result_set_type)).field("holdability", to_string(v.holdability));
        } else if constexpr (std::is_same_v<T, op::SetMaxRows>) {
          w.field("n", v.n);
        } else if constexpr (std::is_same_v<T, op::ExecuteUpdate> || std::is_same_v<T, op::ExecuteQuery> ||
                             std::is_same_v<T, op::AddBatch>) {
          w.field("sql", v.sql);
        } else if constexpr (std::is_same_v<T, op::CursorMove>) {
          w.field("kind", to_string(v.kind));
          if (v.kind == CursorKind::Absolute) w.field("n", v.n);
        } else if constexpr (std::is_same_v<T, op::SetAutoCommit>) {
          w.field("on", v.on ? "true" : "false");
        }
      },
      o);
}

/// One-line rendering of an op, used in reports.
inline std::string describe(const TraceOp& o) {
  RecordWriter w("", 0);
  write_op(w, o);
  auto s = w.str();
  // drop the synthetic header line and the leading "op "
  s = s.substr(s.find('\n') + 1 + 3);
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

inline std::string serialize(const Trace& trace) {
  if (auto bad = validate(trace); !bad.empty()) throw Error("cannot serialize invalid trace: " + bad.front());
  RecordWriter w(kTraceMagic, 1);
  w.begin("trace").field("id", trace.id);
  if (trace.provenance)
    w.begin("provenance").field("prompt", trace.provenance->prompt_id).field("round", trace.provenance->round);
  else
    w.begin("provenance").arg("manual");
  for (const auto& [k, v] : trace.property_assignment.bindings) w.begin("property").field(k, v);
  for (const auto& o : trace.ops) write_op(w, o);
  return w.str();
}

namespace detail {

inline TraceOp parse_op(const Record& r, int index) {
  auto fail = [&](const std::string& why) -> ParseError { return ParseError(why, r.line, index); };
  if (r.args.size() != 1) throw fail("op record needs exactly one op name");
  const auto& name = r.args[0];
  const auto idx = op_index_of(name);
  if (!idx) throw fail("unknown op '" + name + "'");

  auto allow = [&](std::initializer_list<std::string_view> keys) {
    for (const auto& [k, v] : r.fields) {
      bool ok = false;
      for (auto a : keys) ok = ok || a == k;
      if (!ok) throw fail("unknown field '" + k + "' for " + name);
    }
  };
  auto need = [&](std::string_view key) -> const std::string& {
    if (const auto* v = r.find(key)) return *v;
    throw fail(name + " requires field '" + std::string(key) + "'");
  };
  auto need_int = [&](std::string_view key) {
    const auto& raw = need(key);
    auto v = parse_int(raw);
    if (!v) throw fail("field '" + std::string(key) + "' must be an integer, got '" + raw + "'");
    return *v;
  };

  TraceOp out;
  switch (*idx) {
    case 1: {
      allow({"result_set_type", "holdability"});
      auto t = parse_result_set_type(need("result_set_type"));
      auto h = parse_holdability(need("holdability"));
      if (!t) throw fail("bad result_set_type '" + need("result_set_type") + "'");
      if (!h) throw fail("bad holdability '" + need("holdability") + "'");
      out = op::CreateStatement{*t, *h};
      break;
    }
    case 2:
      allow({"n"});
      out = op::SetMaxRows{need_int("n")};
      break;
    case 3: allow({"sql"}); out = op::ExecuteUpdate{need("sql")}; break;
    case 4: allow({"sql"}); out = op::ExecuteQuery{need("sql")}; break;
    case 5: allow({"sql"}); out = op::AddBatch{need("sql")}; break;
    case 7: {
      allow({"kind", "n"});
      auto k = parse_cursor_kind(need("kind"));
      if (!k) throw fail("bad cursor kind '" + need("kind") + "'");
      op::CursorMove m{*k, 0};
      if (*k == CursorKind::Absolute) m.n = need_int("n");
      else if (r.find("n")) throw fail("only Absolute cursor moves take n");
      out = m;
      break;
    }
    case 11: {
      allow({"on"});
      const auto& v = need("on");
      if (v != "true" && v != "false") throw fail("field 'on' must be true or false");
      out = op::SetAutoCommit{v == "true"};
      break;
    }
    default: {
      allow({});
      // payload-free ops: construct by index
      static const std::array<TraceOp, std::variant_size_v<TraceOp>> blanks = {
          op::Connect{},        op::CreateStatement{}, op::SetMaxRows{},     op::ExecuteUpdate{},
          op::ExecuteQuery{},   op::AddBatch{},        op::ExecuteBatch{},   op::CursorMove{},
          op::ReadRow{},        op::GetHoldability{},  op::GetResultSetHoldability{},
          op::SetAutoCommit{},  op::Commit{},          op::Rollback{},       op::CloseResultSet{},
          op::CloseStatement{}, op::CheckResultSetClosed{}};
      out = blanks[*idx];
    }
  }
  if (auto bad = payload_violation(out)) throw fail(*bad);
  return out;
}

}  // namespace detail

/// Parses trace text. Structural validity is not checked here; call validate.
inline Trace parse_trace(std::string_view text) {
  const auto doc = parse_records(text, kTraceMagic);
  Trace t;
  bool have_id = false, have_prov = false;
  int op_count = 0;
  for (const auto& r : doc.records) {
    if (r.keyword == "op") {
      t.ops.push_back(detail::parse_op(r, op_count++));
    } else if (r.keyword == "trace") {
      if (have_id) throw ParseError("duplicate trace record", r.line);
      r.expect_fields({"id"});
      t.id = r.get("id");
      have_id = true;
    } else if (r.keyword == "provenance") {
      if (have_prov) throw ParseError("duplicate provenance record", r.line);
      have_prov = true;
      if (r.args.size() == 1 && r.args[0] == "manual" && r.fields.empty()) {
        t.provenance.reset();
      } else {
        if (!r.args.empty()) throw ParseError("provenance is 'manual' or prompt=/round= fields", r.line);
        r.expect_fields({"prompt", "round"});
        t.provenance = PromptProvenance{r.get("prompt"), r.get_int("round")};
      }
    } else if (r.keyword == "property") {
      if (r.fields.size() != 1 || !r.args.empty()) throw ParseError("property record takes one name=value", r.line);
      const auto& [k, v] = r.fields.front();
      if (!t.property_assignment.bindings.emplace(k, v).second)
        throw ParseError("duplicate property '" + k + "'", r.line);
    } else {
      throw ParseError("unknown record '" + r.keyword + "'", r.line);
    }
  }
  if (!have_id) throw ParseError("missing trace record");
  return t;
}

}  // namespace conndiff
