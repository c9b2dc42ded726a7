#pragma once

// Test-case generation: the generator interface, the rewrite/parse/validate
// funnel that turns free-form model output into an executable trace, and the
// deterministic grammar-based generator used offline.

#include <algorithm>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "conndiff/prompt.hpp"
#include "conndiff/trace.hpp"

namespace conndiff {

struct GeneratorRequest {
  std::string prompt_text;
  FocusGroup focus_group = FocusGroup::BatchExecution;
  PropertyAssignment property_assignment;
  std::uint64_t seed = 0;
};

struct ParseFailure {
  std::string reason;
  bool operator==(const ParseFailure&) const = default;
};

struct GeneratorOutput {
  std::string raw_text;
  std::variant<Trace, ParseFailure> parsed;
  std::vector<std::string> rewrites_applied;

  const Trace* trace() const { return std::get_if<Trace>(&parsed); }
};

/// Transport-level failure talking to a remote model. Retryable.
class TransportError : public Error {
public:
  using Error::Error;
};

class Generator {
public:
  virtual ~Generator() = default;
  virtual GeneratorOutput generate(const GeneratorRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Rewrite rules, applied in this order.

inline constexpr std::string_view kRewriteStripFences = "strip-fences";
inline constexpr std::string_view kRewriteStripProse = "strip-prose";
inline constexpr std::string_view kRewriteNormalizeWhitespace = "normalize-whitespace";
inline constexpr std::string_view kRewriteInjectHeader = "inject-header";
inline constexpr std::string_view kRewriteTruncateAfterClose = "truncate-after-close-statement";

struct RewriteResult {
  std::string text;
  std::vector<std::string> applied;
};

namespace detail {

inline std::vector<std::string> lines_of(std::string_view text) {
  auto ls = split(text, '\n');
  if (!ls.empty() && ls.back().empty()) ls.pop_back();
  return ls;
}

inline bool is_record_line(std::string_view l) {
  l = trim(l);
  for (std::string_view kw : {"conndiff-trace", "trace ", "provenance ", "property ", "op ", "#"})
    if (starts_with(l, kw)) return true;
  return false;
}

inline std::string unlines(const std::vector<std::string>& ls) {
  std::string out;
  for (const auto& l : ls) out += l + "\n";
  return out;
}

}  // namespace detail

inline RewriteResult rewrite(std::string_view raw) {
  RewriteResult r;
  auto lines = detail::lines_of(raw);

  // 1. Keep only the first fenced block, or drop prose around bare records.
  std::optional<std::size_t> open;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (starts_with(trim(lines[i]), "```")) {
      if (!open) {
        open = i;
      } else {
        lines = std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(*open) + 1,
                                         lines.begin() + static_cast<std::ptrdiff_t>(i));
        r.applied.emplace_back(kRewriteStripFences);
        open.reset();
        break;
      }
    }
  }
  if (r.applied.empty()) {
    std::optional<std::size_t> first, last;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (trim(lines[i]).empty()) continue;
      if (detail::is_record_line(lines[i])) {
        if (!first) first = i;
        last = i;
      }
    }
    if (first) {
      bool prose = false;
      for (std::size_t i = 0; i < lines.size(); ++i)
        if ((i < *first || i > *last) && !trim(lines[i]).empty()) prose = true;
      if (prose) {
        lines = std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(*first),
                                         lines.begin() + static_cast<std::ptrdiff_t>(*last) + 1);
        r.applied.emplace_back(kRewriteStripProse);
      }
    }
  }

  // No trace content at all: leave the text alone for the parser to reject.
  if (std::none_of(lines.begin(), lines.end(), [](const std::string& l) { return detail::is_record_line(l); }))
    return {std::string(raw), {}};

  // 2. CRLF, tabs, surrounding blanks, empty lines.
  {
    std::vector<std::string> norm;
    for (auto l : lines) {
      for (auto& c : l)
        if (c == '\t') c = ' ';
      auto t = std::string(trim(l));
      if (!t.empty()) norm.push_back(std::move(t));
    }
    if (norm != lines)
      r.applied.emplace_back(kRewriteNormalizeWhitespace);
    lines = std::move(norm);
  }

  // 3. Header and trace record.
  bool has_ops = false, has_trace = false;
  for (const auto& l : lines) {
    has_ops = has_ops || starts_with(l, "op ");
    has_trace = has_trace || starts_with(l, "trace ");
  }
  if (has_ops) {
    bool changed = false;
    if (lines.empty() || !starts_with(lines.front(), kTraceMagic)) {
      lines.insert(lines.begin(), std::string(kTraceMagic) + " v1");
      changed = true;
    }
    if (!has_trace) {
      lines.insert(lines.begin() + 1, "trace id=generated");
      changed = true;
    }
    if (changed) r.applied.emplace_back(kRewriteInjectHeader);
  }

  // 4. Nothing after the first CloseStatement.
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == "op CloseStatement") {
      std::size_t keep = i + 1;
      bool dropped = false;
      std::vector<std::string> out(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(keep));
      for (std::size_t j = keep; j < lines.size(); ++j) {
        if (starts_with(lines[j], "op ")) dropped = true;
        else out.push_back(lines[j]);
      }
      if (dropped) {
        lines = std::move(out);
        r.applied.emplace_back(kRewriteTruncateAfterClose);
      }
      break;
    }
  }

  if (r.applied.empty()) {
    r.text = std::string(raw);
  } else {
    r.text = detail::unlines(lines);
  }
  return r;
}

/// rewrite -> parse -> validate. Never throws for bad model output.
inline GeneratorOutput funnel(std::string raw_text) {
  GeneratorOutput out;
  auto rw = rewrite(raw_text);
  out.rewrites_applied = std::move(rw.applied);
  out.raw_text = std::move(raw_text);
  try {
    Trace t = parse_trace(rw.text);
    if (auto bad = validate(t); !bad.empty()) {
      out.parsed = ParseFailure{"invalid trace: " + join(bad, "; ")};
    } else {
      out.parsed = std::move(t);
    }
  } catch (const ParseError& e) {
    out.parsed = ParseFailure{e.what()};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Offline generator

/// Weighted-grammar trace sampler. Output is a pure function of
/// (seed, focus group, property assignment); the grammar is fixed at
/// construction.
class StubGenerator final : public Generator {
public:
  explicit StubGenerator(GrammarSpec grammar = {}) : grammar_(std::move(grammar)) {}

  GeneratorOutput generate(const GeneratorRequest& request) override {
    if (request.prompt_text.empty()) throw Error("generate: empty prompt text");
    return funnel(raw_text(request));
  }

  /// The text the stub "replies" with, fenced like a chat model answer.
  std::string raw_text(const GeneratorRequest& request) const {
    const Trace t = build(request);
    return "Here is a test case exercising " + to_string(request.focus_group) + ".\n\n```conndiff\n" + serialize(t) +
           "```\n";
  }

  Trace build(const GeneratorRequest& request) const {
    Rng rng(splitmix64(request.seed ^ fnv1a64(to_string(request.focus_group))));
    Builder b{rng, grammar_, request.focus_group, {}};
    b.emit_all();
    Trace t;
    t.id = "stub-" + to_string(request.focus_group) + "-" + std::to_string(request.seed);
    t.property_assignment = request.property_assignment;
    t.ops = std::move(b.ops);
    return t;
  }

private:
  struct Builder {
    Rng& rng;
    const GrammarSpec& grammar;
    FocusGroup group;
    std::vector<TraceOp> ops;
    bool queried = false;
    int pending_batch = 0;
    std::int64_t next_key = 1;
    bool autocommit = true;

    bool coin(double p) { return bernoulli(rng, p); }
    std::int64_t pick(std::int64_t lo, std::int64_t hi) { return uniform_int(rng, lo, hi); }

    std::string insert_sql(const std::string& table, std::int64_t key, bool two_cols) {
      return "INSERT INTO " + table + " VALUES (" + std::to_string(key) + (two_cols ? ", " + std::to_string(key * 10) : "") + ")";
    }

    void query() {
      static const char* shapes[] = {"SELECT * FROM t0", "SELECT c0 FROM t0", "SELECT c0, c1 FROM t0", "SELECT 1"};
      std::string sql = shapes[uniform_index(rng, 4)];
      if (coin(0.15)) sql = "SELECT c0 FROM t0 WHERE c0 = " + std::to_string(pick(1, std::max<std::int64_t>(1, next_key)));
      ops.push_back(op::ExecuteQuery{sql});
      queried = true;
    }

    void cursor_move() {
      const auto kind = kAllCursorKinds[uniform_index(rng, kAllCursorKinds.size())];
      ops.push_back(op::CursorMove{kind, kind == CursorKind::Absolute ? pick(-2, 3) : 0});
    }

    void execute_batch() {
      ops.push_back(op::ExecuteBatch{});
      pending_batch = 0;
    }

    void batch_of_inserts(int n) {
      for (int i = 0; i < n; ++i) ops.push_back(op::AddBatch{insert_sql("t0", next_key++, true)});
      execute_batch();
    }

    void signature_block() {
      switch (group) {
        case FocusGroup::CursorNavigation: {
          query();
          const auto moves = pick(2, 4);
          for (int i = 0; i < moves; ++i) {
            cursor_move();
            if (coin(0.4)) ops.push_back(op::ReadRow{});
          }
          break;
        }
        case FocusGroup::BatchExecution: {
          const auto n = static_cast<int>(pick(2, 4));
          if (coin(0.3)) {
            const auto marker = static_cast<int>(pick(0, n - 1));
            for (int i = 0; i < n; ++i)
              ops.push_back(op::AddBatch{i == marker ? std::string("SELECT c0 FROM t0") : insert_sql("t0", next_key++, true)});
            execute_batch();
          } else {
            batch_of_inserts(n);
          }
          if (coin(0.7)) query();
          break;
        }
        case FocusGroup::TransactionAtomicity: {
          if (coin(0.3)) {
            ops.push_back(op::SetAutoCommit{false});
            autocommit = false;
          }
          const auto k = next_key;
          next_key += 2;
          for (auto key : {k, k, k + 1}) ops.push_back(op::AddBatch{insert_sql("t0", key, true)});
          execute_batch();
          if (!autocommit) ops.push_back(coin(0.5) ? TraceOp{op::Commit{}} : TraceOp{op::Rollback{}});
          if (coin(0.5)) query();
          break;
        }
        case FocusGroup::HoldabilityMetadata: {
          ops.push_back(op::GetHoldability{});
          query();
          ops.push_back(op::GetResultSetHoldability{});
          if (coin(0.35)) ops.push_back(op::SetMaxRows{50'000'001 + pick(0, 1000)});
          else ops.push_back(op::SetMaxRows{pick(0, 3)});
          break;
        }
        case FocusGroup::ResourceLifecycle: {
          query();
          ops.push_back(op::CheckResultSetClosed{});
          if (coin(0.3)) {
            ops.push_back(op::CloseResultSet{});
            ops.push_back(op::CheckResultSetClosed{});
            query();
          }
          break;
        }
        case FocusGroup::MultiQuery: {
          ops.push_back(op::ExecuteUpdate{"CREATE TABLE t1(c0 INT PRIMARY KEY)"});
          const auto k = next_key++;
          ops.push_back(op::AddBatch{insert_sql("t0", k, true)});
          ops.push_back(op::AddBatch{"INSERT INTO t1 VALUES (" + std::to_string(k) + ")"});
          if (coin(0.7)) ops.push_back(op::AddBatch{insert_sql("t0", k, true)});
          ops.push_back(op::AddBatch{insert_sql("t0", next_key++, true)});
          if (coin(0.2)) ops.push_back(op::AddBatch{"SELECT c0 FROM t1"});
          execute_batch();
          if (coin(0.5)) query();
          break;
        }
      }
    }

    // One random body op drawn by weight among those valid right now.
    void body_op() {
      struct Choice {
        std::string_view name;
        std::function<void()> emit;
      };
      std::vector<Choice> choices = {
          {"ExecuteQuery", [&] { query(); }},
          {"ExecuteUpdate", [&] { ops.push_back(op::ExecuteUpdate{insert_sql("t0", coin(0.2) ? 1 : next_key++, true)}); }},
          {"AddBatch", [&] {
             ops.push_back(op::AddBatch{coin(0.15) ? std::string("SELECT 1") : insert_sql("t0", next_key++, true)});
             ++pending_batch;
           }},
          {"SetMaxRows", [&] { ops.push_back(op::SetMaxRows{coin(0.1) ? 60'000'000 : pick(0, 4)}); }},
          {"GetHoldability", [&] { ops.push_back(op::GetHoldability{}); }},
          {"GetResultSetHoldability", [&] { ops.push_back(op::GetResultSetHoldability{}); }},
          {"SetAutoCommit", [&] {
             autocommit = !autocommit;
             ops.push_back(op::SetAutoCommit{autocommit});
           }},
          {"Commit", [&] { ops.push_back(op::Commit{}); }},
          {"Rollback", [&] { ops.push_back(op::Rollback{}); }},
          {"CloseResultSet", [&] { ops.push_back(op::CloseResultSet{}); }},
          {"CheckResultSetClosed", [&] { ops.push_back(op::CheckResultSetClosed{}); }},
      };
      if (queried) {
        choices.push_back({"CursorMove", [&] { cursor_move(); }});
        choices.push_back({"ReadRow", [&] { ops.push_back(op::ReadRow{}); }});
      }
      if (pending_batch > 0)
        choices.push_back({"ExecuteBatch", [&] {
                             ops.push_back(op::ExecuteBatch{});
                             pending_batch = 0;
                           }});
      double total = 0;
      for (const auto& c : choices) total += grammar.weight(group, c.name);
      if (total <= 0) return;
      double x = uniform_real(rng) * total;
      for (const auto& c : choices) {
        x -= grammar.weight(group, c.name);
        if (x < 0) {
          c.emit();
          return;
        }
      }
      choices.back().emit();
    }

    void emit_all() {
      ops.push_back(op::Connect{});
      ResultSetType type = coin(0.5) ? ResultSetType::ForwardOnly : ResultSetType::ScrollInsensitive;
      if (group == FocusGroup::CursorNavigation)
        type = coin(0.7) ? ResultSetType::ForwardOnly : ResultSetType::ScrollInsensitive;
      const double close_at_commit = group == FocusGroup::HoldabilityMetadata ? 0.6 : 0.3;
      ops.push_back(op::CreateStatement{type, coin(close_at_commit) ? Holdability::CloseAtCommit : Holdability::HoldOverCommit});
      ops.push_back(op::ExecuteUpdate{"CREATE TABLE t0(c0 INT PRIMARY KEY, c1 INT)"});
      if (group != FocusGroup::TransactionAtomicity) {
        const auto rows = pick(0, 3);
        for (int i = 0; i < rows; ++i) ops.push_back(op::ExecuteUpdate{insert_sql("t0", next_key++, true)});
      }
      const bool body_first = coin(0.5);
      const auto body = pick(1, 4);
      if (body_first)
        for (int i = 0; i < body; ++i) body_op();
      signature_block();
      if (!body_first)
        for (int i = 0; i < body; ++i) body_op();
      if (pending_batch > 0 && coin(0.5)) {
        ops.push_back(op::ExecuteBatch{});
        pending_batch = 0;
      }
      if (group == FocusGroup::ResourceLifecycle || coin(0.2)) {
        ops.push_back(op::CloseStatement{});
        if (group == FocusGroup::ResourceLifecycle && coin(0.5)) ops.push_back(op::CheckResultSetClosed{});
      }
    }
  };

  GrammarSpec grammar_;
};

}  // namespace conndiff
