#pragma once

// Simulated connector backends. The reference backend follows the JDBC
// contract for every op in the catalog; a divergent backend is the same
// interpreter with a set of deviation rules switched on. Rules that fire are
// recorded on outcomes and tables so discrepancies can be attributed.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "conndiff/store.hpp"
#include "conndiff/trace.hpp"

namespace conndiff {

// ---------------------------------------------------------------------------
// Divergence rules

enum class Rule { R1, R2, R3, R4, R5, R6, R7, R8 };

inline constexpr std::array<Rule, 8> kAllRules = {Rule::R1, Rule::R2, Rule::R3, Rule::R4,
                                                  Rule::R5, Rule::R6, Rule::R7, Rule::R8};

inline constexpr std::array<std::string_view, 8> kRuleNames = {
    "forward-only-navigation-no-throw", "batch-non-dml-illegal-return",     "holdability-throws",
    "holdability-misreport",            "multiquery-breaks-batch-atomicity", "rewrite-batch-alters-results",
    "resultset-not-closed",             "maxrows-wrong-message"};

inline std::string to_string(Rule r) { return "R" + std::to_string(static_cast<int>(r) + 1); }
inline std::string_view rule_name(Rule r) { return kRuleNames[static_cast<std::size_t>(r)]; }

/// Accepts either the short tag ("R5") or the long name.
inline Rule parse_rule(std::string_view s) {
  for (auto r : kAllRules)
    if (s == to_string(r) || s == rule_name(r)) return r;
  throw Error("unknown divergence rule: " + std::string(s));
}

struct DivergenceCatalog {
  std::set<Rule> rules;

  bool has(Rule r) const { return rules.count(r) != 0; }
  bool empty() const { return rules.empty(); }
  static DivergenceCatalog all() { return {{kAllRules.begin(), kAllRules.end()}}; }
  bool operator==(const DivergenceCatalog&) const = default;

  std::string to_string() const {
    std::vector<std::string> tags;
    for (auto r : rules) tags.push_back(conndiff::to_string(r));
    return tags.empty() ? "none" : join(tags, ",");
  }
};

/// Builds a catalog from tag strings; unknown tags are an error.
inline DivergenceCatalog make_catalog(const std::vector<std::string>& tags) {
  DivergenceCatalog c;
  for (const auto& t : tags) c.rules.insert(parse_rule(t));
  return c;
}

// ---------------------------------------------------------------------------
// Outcomes

namespace outcome {
struct Value { std::string payload; bool operator==(const Value&) const = default; };
struct Rows { std::vector<Row> rows; bool operator==(const Rows&) const = default; };
struct UpdateCounts { std::vector<std::int64_t> counts; bool operator==(const UpdateCounts&) const = default; };
struct ThrewException {
  std::string exception_class;
  std::string message;
  std::optional<std::vector<std::int64_t>> update_counts;  // batch failures only
  bool operator==(const ThrewException&) const = default;
};
struct Unit { bool operator==(const Unit&) const = default; };
struct StructuralError { std::string reason; bool operator==(const StructuralError&) const = default; };
}  // namespace outcome

using OutcomeResult = std::variant<outcome::Value, outcome::Rows, outcome::UpdateCounts, outcome::ThrewException,
                                   outcome::Unit, outcome::StructuralError>;

inline constexpr std::array<std::string_view, 6> kOutcomeKinds = {"Value", "Rows", "UpdateCounts",
                                                                  "ThrewException", "Unit", "StructuralError"};

inline std::string rows_to_string(const std::vector<Row>& rows) {
  std::string s = "[";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r) s += ",";
    s += "(";
    for (std::size_t i = 0; i < rows[r].size(); ++i) s += (i ? "," : "") + std::to_string(rows[r][i]);
    s += ")";
  }
  return s + "]";
}

inline std::string counts_to_string(const std::vector<std::int64_t>& c) {
  std::string s = "[";
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
  return s + "]";
}

inline std::string to_string(const OutcomeResult& r) {
  struct V {
    std::string operator()(const outcome::Value& v) const { return "Value(" + v.payload + ")"; }
    std::string operator()(const outcome::Rows& v) const { return "Rows" + rows_to_string(v.rows); }
    std::string operator()(const outcome::UpdateCounts& v) const { return "UpdateCounts" + counts_to_string(v.counts); }
    std::string operator()(const outcome::ThrewException& v) const {
      std::string s = "ThrewException(" + v.exception_class;
      if (v.update_counts) s += ", counts=" + counts_to_string(*v.update_counts);
      return s + ", \"" + v.message + "\")";
    }
    std::string operator()(const outcome::Unit&) const { return "Unit"; }
    std::string operator()(const outcome::StructuralError& v) const { return "StructuralError(" + v.reason + ")"; }
  };
  return std::visit(V{}, r);
}

struct Outcome {
  int op_index = 0;
  OutcomeResult result;
  // Context, not part of behavioural equality.
  TraceOp op;
  bool forward_only = false;  // op acted on a ForwardOnly result set
  std::set<std::string> rules;  // divergence rules that influenced this outcome
};

struct TableSnapshot {
  std::vector<std::string> columns;
  std::vector<Row> rows;  // sorted
  bool operator==(const TableSnapshot&) const = default;
};

struct ResourceLedger {
  bool result_set_open = false;
  bool statement_open = false;
  bool operator==(const ResourceLedger&) const = default;
};

struct FinalState {
  std::map<std::string, TableSnapshot> tables;
  ResourceLedger ledger;
  bool operator==(const FinalState&) const = default;
};

struct ExecutionReport {
  std::string trace_id;
  std::string backend_id;
  PropertyAssignment property_assignment;
  std::vector<Outcome> outcomes;
  FinalState final_state;
  std::map<std::string, std::set<std::string>> table_taint;
  std::set<std::string> ledger_taint;
};

// ---------------------------------------------------------------------------
// Interpreter

inline constexpr std::int64_t kMaxRowsLimit = 50'000'000;
inline constexpr std::int64_t kExecuteFailed = -3;
inline constexpr std::int64_t kIllegalCount = -1;  // neither SUCCESS_NO_INFO (-2) nor EXECUTE_FAILED (-3)

inline constexpr std::string_view kMaxRowsMessage = "Invalid argument value: maxRows must be between 0 and 50000000";
inline constexpr std::string_view kMaxRowsWrongMessage = "setMaxRows() out of range.";

/// Mutable state of one connection while a trace executes.
struct Session {
  struct Statement {
    int generation = 0;
    ResultSetType type = ResultSetType::ForwardOnly;
    Holdability holdability = Holdability::HoldOverCommit;
    std::int64_t max_rows = 0;
    bool open = true;
    std::vector<std::string> batch;
  };
  struct ResultSet {
    int owner = 0;
    ResultSetType type = ResultSetType::ForwardOnly;
    Holdability holdability = Holdability::HoldOverCommit;
    std::vector<Row> rows;
    std::int64_t pos = 0;  // 0 before first, rows.size()+1 after last
    bool open = true;
    std::set<std::string> taint;
  };

  bool connected = false;
  bool queried = false;  // an ExecuteQuery has been issued
  bool autocommit = true;
  Store store;
  Store snapshot;  // last committed state while autocommit is off
  std::optional<Statement> statement;
  std::optional<ResultSet> result_set;
  int next_generation = 1;
  std::set<std::string> ledger_taint;
};

/// Behavioural configuration of one simulated connector.
struct BackendConfig {
  std::string id = "reference";
  DivergenceCatalog divergence;
};

class ConnectorBackend {
public:
  virtual ~ConnectorBackend() = default;
  virtual const std::string& id() const = 0;
  virtual ExecutionReport execute(const Trace& trace) const = 0;
};

class SimulatedBackend final : public ConnectorBackend {
public:
  explicit SimulatedBackend(BackendConfig config) : config_(std::move(config)) {}

  const std::string& id() const override { return config_.id; }
  const DivergenceCatalog& divergence() const noexcept { return config_.divergence; }

  /// Runs the trace against a fresh store. Stops after a StructuralError.
  ExecutionReport execute(const Trace& trace) const override {
    ExecutionReport report;
    report.trace_id = trace.id;
    report.backend_id = config_.id;
    report.property_assignment = trace.property_assignment;
    Session s;
    for (std::size_t i = 0; i < trace.ops.size(); ++i) {
      Outcome out = step(trace.ops[i], s, trace.property_assignment);
      out.op_index = static_cast<int>(i);
      out.op = trace.ops[i];
      const bool stop = std::holds_alternative<outcome::StructuralError>(out.result);
      report.outcomes.push_back(std::move(out));
      if (stop) break;
    }
    for (const auto& [name, table] : s.store.tables()) {
      TableSnapshot snap;
      for (const auto& c : table.columns) snap.columns.push_back(c.name);
      snap.rows = table.rows;
      std::sort(snap.rows.begin(), snap.rows.end());
      report.final_state.tables.emplace(name, std::move(snap));
      if (!table.taint.empty()) report.table_taint[name] = table.taint;
    }
    report.final_state.ledger.result_set_open = s.result_set && s.result_set->open;
    report.final_state.ledger.statement_open = s.statement && s.statement->open;
    if (report.final_state.ledger.result_set_open) {
      report.ledger_taint = s.ledger_taint;
      report.ledger_taint.insert(s.result_set->taint.begin(), s.result_set->taint.end());
    }
    return report;
  }

  /// Applies one op to the session. Exposed for single-step tests.
  Outcome step(const TraceOp& op, Session& s, const PropertyAssignment& props) const {
    Outcome out;
    if (!s.connected && !is<op::Connect>(op)) {
      out.result = outcome::StructuralError{"op issued before Connect"};
      return out;
    }
    std::visit([&](const auto& o) { apply(o, s, props, out); }, op);
    return out;
  }

private:
  bool on(Rule r) const { return config_.divergence.has(r); }

  static outcome::ThrewException exc(std::string cls, std::string msg) {
    return outcome::ThrewException{std::move(cls), std::move(msg), std::nullopt};
  }

  static bool statement_ready(Session& s, Outcome& out) {
    if (!s.statement || !s.statement->open) {
      out.result = exc("statement-closed", "No operations allowed after statement closed.");
      return false;
    }
    return true;
  }

  static void close_owned_result_set(Session& s) {
    if (s.result_set && s.statement && s.result_set->owner == s.statement->generation) s.result_set->open = false;
  }

  void add_table_taint(const Session& s, const std::optional<std::string>& table, Outcome& out) const {
    if (!table) return;
    if (const auto* t = s.store.find(*table)) out.rules.insert(t->taint.begin(), t->taint.end());
  }

  // Holdability rule: on commit, CloseAtCommit result sets close.
  static void on_commit(Session& s) {
    s.snapshot = s.store;
    if (s.result_set && s.result_set->holdability == Holdability::CloseAtCommit) s.result_set->open = false;
  }

  void apply(const op::Connect&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (s.connected) {
      out.result = outcome::StructuralError{"second Connect"};
      return;
    }
    s.connected = true;
    out.result = outcome::Unit{};
  }

  void apply(const op::CreateStatement& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    Session::Statement st;
    st.generation = s.next_generation++;
    st.type = o.result_set_type;
    st.holdability = o.holdability;
    s.statement = std::move(st);
    out.result = outcome::Unit{};
  }

  void apply(const op::SetMaxRows& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!statement_ready(s, out)) return;
    if (o.n < 0 || o.n > kMaxRowsLimit) {
      if (on(Rule::R8)) {
        out.result = exc("invalid-argument", std::string(kMaxRowsWrongMessage));
        out.rules.insert("R8");
      } else {
        out.result = exc("invalid-argument", std::string(kMaxRowsMessage));
      }
      return;
    }
    s.statement->max_rows = o.n;
    out.result = outcome::Unit{};
  }

  void apply(const op::ExecuteUpdate& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!statement_ready(s, out)) return;
    close_owned_result_set(s);
    const auto stmt = sql::parse(o.sql);
    const auto table = sql::target_table(stmt);
    add_table_taint(s, table, out);
    auto res = s.store.apply(stmt);
    if (res.failure) {
      out.result = exc(res.failure->exception_class, res.failure->message);
      return;
    }
    out.result = outcome::UpdateCounts{{res.update_count}};
  }

  void apply(const op::ExecuteQuery& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    s.queried = true;
    if (!statement_ready(s, out)) return;
    close_owned_result_set(s);
    const auto stmt = sql::parse(o.sql);
    const auto table = sql::target_table(stmt);
    add_table_taint(s, table, out);
    auto res = s.store.apply(stmt);
    if (res.failure) {
      out.result = exc(res.failure->exception_class, res.failure->message);
      return;
    }
    if (s.statement->max_rows > 0 && static_cast<std::int64_t>(res.rows.size()) > s.statement->max_rows)
      res.rows.resize(static_cast<std::size_t>(s.statement->max_rows));
    Session::ResultSet rs;
    rs.owner = s.statement->generation;
    rs.type = s.statement->type;
    rs.holdability = s.statement->holdability;
    rs.rows = res.rows;
    rs.taint = out.rules;
    s.result_set = std::move(rs);
    out.forward_only = s.statement->type == ResultSetType::ForwardOnly;
    out.result = outcome::Rows{std::move(res.rows)};
  }

  void apply(const op::AddBatch& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!statement_ready(s, out)) return;
    s.statement->batch.push_back(o.sql);
    out.result = outcome::Unit{};
  }

  void apply(const op::ExecuteBatch&, Session& s, const PropertyAssignment& props, Outcome& out) const {
    if (!statement_ready(s, out)) return;
    close_owned_result_set(s);
    const auto batch = std::move(s.statement->batch);
    s.statement->batch.clear();
    if (batch.empty()) {
      out.result = outcome::StructuralError{"ExecuteBatch with an empty batch"};
      return;
    }

    std::vector<sql::Statement> stmts;
    for (const auto& text : batch) stmts.push_back(sql::parse(text));

    // Rewritten multi-row insert loses its final row group.
    bool rewrite_drop = false;
    if (on(Rule::R6) && props.flag("rewriteBatchedStatements") && stmts.size() >= 2) {
      rewrite_drop = true;
      const auto first_table = sql::target_table(stmts.front());
      for (const auto& st : stmts)
        rewrite_drop = rewrite_drop && sql::is_dml(st) && sql::target_table(st) == first_table;
    }
    const bool continue_on_error = on(Rule::R5) && !props.flag("allowMultiQueries");

    std::vector<std::int64_t> counts;
    bool failed = false;
    std::optional<SqlFailure> first_failure;
    std::set<std::string> touched;
    for (std::size_t i = 0; i < stmts.size(); ++i) {
      const auto& st = stmts[i];
      if (auto t = sql::target_table(st)) touched.insert(*t);
      if (sql::is_query(st)) {
        if (on(Rule::R2)) {
          counts.push_back(kIllegalCount);
          out.rules.insert("R2");
          continue;
        }
        out.result = outcome::ThrewException{"batch-failure", "Statement is not a DML statement: " + batch[i], counts};
        failed = true;
        break;
      }
      auto res = s.store.apply(st);
      if (res.failure) {
        if (continue_on_error) {
          counts.push_back(kExecuteFailed);
          out.rules.insert("R5");
          if (!first_failure) first_failure = res.failure;
          continue;
        }
        out.result = outcome::ThrewException{"batch-failure", res.failure->message, counts};
        failed = true;
        break;
      }
      if (first_failure) {
        // rows that only persist because execution continued past a failure
        if (auto t = sql::target_table(st)) s.store.find(*t)->taint.insert("R5");
      }
      counts.push_back(res.update_count);
    }
    for (const auto& t : touched) add_table_taint(s, t, out);
    if (failed) return;
    if (first_failure) {
      out.result = outcome::ThrewException{"batch-failure", first_failure->message, counts};
      return;
    }
    if (rewrite_drop) {
      const auto table = *sql::target_table(stmts.back());
      s.store.drop_tail(table, std::get<sql::Insert>(stmts.back()).rows.size());
      s.store.find(table)->taint.insert("R6");
      out.rules.insert("R6");
    }
    out.result = outcome::UpdateCounts{std::move(counts)};
  }

  static bool result_set_ready(Session& s, Outcome& out) {
    if (!s.queried) {
      out.result = outcome::StructuralError{"cursor op without any ExecuteQuery"};
      return false;
    }
    if (!s.result_set || !s.result_set->open) {
      out.result = exc("result-set-closed", "Operation not allowed after ResultSet closed");
      return false;
    }
    out.rules.insert(s.result_set->taint.begin(), s.result_set->taint.end());
    out.forward_only = s.result_set->type == ResultSetType::ForwardOnly;
    return true;
  }

  void apply(const op::CursorMove& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!result_set_ready(s, out)) return;
    auto& rs = *s.result_set;
    if (rs.type == ResultSetType::ForwardOnly && o.kind != CursorKind::Next) {
      if (!on(Rule::R1)) {
        out.result = exc("forward-only-violation", "Operation not allowed for a result set of type TYPE_FORWARD_ONLY");
        return;
      }
      out.rules.insert("R1");
      rs.taint.insert("R1");
    }
    const auto n = static_cast<std::int64_t>(rs.rows.size());
    auto on_row = [&] { return rs.pos >= 1 && rs.pos <= n; };
    switch (o.kind) {
      case CursorKind::Next: rs.pos = std::min(rs.pos + 1, n + 1); break;
      case CursorKind::Previous: rs.pos = std::max<std::int64_t>(rs.pos - 1, 0); break;
      case CursorKind::First: rs.pos = n > 0 ? 1 : 0; break;
      case CursorKind::Last: rs.pos = n; break;
      case CursorKind::BeforeFirst: rs.pos = 0; break;
      case CursorKind::AfterLast: rs.pos = n > 0 ? n + 1 : 0; break;
      case CursorKind::Absolute:
        if (o.n > 0) rs.pos = std::min(o.n, n + 1);
        else if (o.n < 0) rs.pos = std::max<std::int64_t>(n + 1 + o.n, 0);
        else rs.pos = 0;
        break;
    }
    if (o.kind == CursorKind::BeforeFirst || o.kind == CursorKind::AfterLast)
      out.result = outcome::Unit{};
    else
      out.result = outcome::Value{on_row() ? "true" : "false"};
  }

  void apply(const op::ReadRow&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!result_set_ready(s, out)) return;
    auto& rs = *s.result_set;
    if (rs.pos < 1 || rs.pos > static_cast<std::int64_t>(rs.rows.size())) {
      out.result = exc("invalid-cursor-state", "Before start or after end of result set");
      return;
    }
    out.result = outcome::Rows{{rs.rows[static_cast<std::size_t>(rs.pos - 1)]}};
  }

  void apply(const op::GetHoldability&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!statement_ready(s, out)) return;
    if (on(Rule::R3)) {
      out.result = exc("feature-not-supported", "getHoldability is not supported");
      out.rules.insert("R3");
      return;
    }
    out.result = outcome::Value{to_string(s.statement->holdability)};
  }

  void apply(const op::GetResultSetHoldability&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (!s.result_set || !s.result_set->open) {
      out.result = exc("result-set-closed", "Operation not allowed after ResultSet closed");
      return;
    }
    out.rules.insert(s.result_set->taint.begin(), s.result_set->taint.end());
    auto h = s.result_set->holdability;
    if (h == Holdability::CloseAtCommit && on(Rule::R4)) {
      h = Holdability::HoldOverCommit;
      out.rules.insert("R4");
    }
    out.result = outcome::Value{to_string(h)};
  }

  void apply(const op::SetAutoCommit& o, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (o.on && !s.autocommit) on_commit(s);
    if (!o.on && s.autocommit) s.snapshot = s.store;
    s.autocommit = o.on;
    out.result = outcome::Unit{};
  }

  void apply(const op::Commit&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (s.autocommit) {
      out.result = exc("invalid-transaction-state", "Can't call commit when autocommit=true");
      return;
    }
    on_commit(s);
    out.result = outcome::Unit{};
  }

  void apply(const op::Rollback&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (s.autocommit) {
      out.result = exc("invalid-transaction-state", "Can't call rollback when autocommit=true");
      return;
    }
    s.store = s.snapshot;
    out.result = outcome::Unit{};
  }

  void apply(const op::CloseResultSet&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (s.result_set) s.result_set->open = false;
    out.result = outcome::Unit{};
  }

  void apply(const op::CloseStatement&, Session& s, const PropertyAssignment&, Outcome& out) const {
    if (s.statement && s.statement->open) {
      const bool owns = s.result_set && s.result_set->open && s.result_set->owner == s.statement->generation;
      if (owns && on(Rule::R7)) {
        out.rules.insert("R7");
        s.result_set->taint.insert("R7");
        s.ledger_taint.insert("R7");
      } else {
        close_owned_result_set(s);
      }
      s.statement->open = false;
    }
    out.result = outcome::Unit{};
  }

  void apply(const op::CheckResultSetClosed&, Session& s, const PropertyAssignment&, Outcome& out) const {
    const bool closed = !s.result_set || !s.result_set->open;
    if (s.result_set) out.rules.insert(s.result_set->taint.begin(), s.result_set->taint.end());
    out.result = outcome::Value{closed ? "true" : "false"};
  }

  BackendConfig config_;
};

inline std::unique_ptr<SimulatedBackend> make_reference() {
  return std::make_unique<SimulatedBackend>(BackendConfig{"reference", {}});
}

/// The reference semantics with `catalog` layered on top.
inline std::unique_ptr<SimulatedBackend> make_divergent(const DivergenceCatalog& catalog,
                                                        std::string id = "divergent") {
  return std::make_unique<SimulatedBackend>(BackendConfig{std::move(id), catalog});
}

}  // namespace conndiff
