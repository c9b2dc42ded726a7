#pragma once

// Isolated in-memory relational store with integer cells. Each backend run
// owns one; nothing is shared between runs.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conndiff/sql.hpp"

namespace conndiff {

using Row = std::vector<std::int64_t>;

struct Table {
  std::vector<sql::ColumnDef> columns;
  std::vector<Row> rows;  // insertion order
  std::set<std::string> taint;  // divergence rules that altered this table

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> primary_key() const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].primary_key) return i;
    return std::nullopt;
  }
};

/// An SQL-level failure surfaced to the client as an exception.
struct SqlFailure {
  std::string exception_class;
  std::string message;
};

struct StatementResult {
  std::optional<SqlFailure> failure;
  std::int64_t update_count = 0;
  std::vector<Row> rows;  // for SELECT
};

class Store {
public:
  const std::map<std::string, Table>& tables() const noexcept { return tables_; }
  Table* find(const std::string& name) {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
  }
  const Table* find(const std::string& name) const {
    auto it = tables_.find(name);
    return it == tables_.end() ? nullptr : &it->second;
  }

  StatementResult apply(const sql::Statement& stmt) {
    return std::visit([this](const auto& s) { return run(s); }, stmt);
  }

  /// Removes the last `n` rows of `table` (used to model lost writes).
  void drop_tail(const std::string& table, std::size_t n) {
    auto& rows = tables_.at(table).rows;
    rows.resize(rows.size() - std::min(n, rows.size()));
  }

private:
  static StatementResult fail(std::string cls, std::string msg) {
    StatementResult r;
    r.failure = SqlFailure{std::move(cls), std::move(msg)};
    return r;
  }

  StatementResult run(const sql::CreateTable& c) {
    if (tables_.count(c.table)) return fail("sql-error", "Table '" + c.table + "' already exists");
    tables_[c.table].columns = c.columns;
    return {};
  }

  StatementResult run(const sql::DropTable& d) {
    if (!tables_.erase(d.table)) return fail("sql-error", "Unknown table '" + d.table + "'");
    return {};
  }

  StatementResult run(const sql::Insert& ins) {
    auto* t = find(ins.table);
    if (!t) return fail("sql-error", "Table '" + ins.table + "' doesn't exist");
    const auto pk = t->primary_key();
    std::set<std::int64_t> keys;
    if (pk)
      for (const auto& r : t->rows) keys.insert(r[*pk]);
    for (const auto& r : ins.rows) {
      if (r.size() != t->columns.size())
        return fail("sql-error", "Column count doesn't match value count");
      if (pk && !keys.insert(r[*pk]).second)
        return fail("integrity-violation", "Duplicate entry '" + std::to_string(r[*pk]) + "' for key 'PRIMARY'");
    }
    t->rows.insert(t->rows.end(), ins.rows.begin(), ins.rows.end());
    StatementResult res;
    res.update_count = static_cast<std::int64_t>(ins.rows.size());
    return res;
  }

  StatementResult run(const sql::Select& sel) const {
    StatementResult res;
    if (!sel.table) {
      res.rows.push_back(sel.constants);
      return res;
    }
    const auto* t = find(*sel.table);
    if (!t) return fail("sql-error", "Table '" + *sel.table + "' doesn't exist");
    std::vector<std::size_t> proj;
    if (sel.columns.empty()) {
      for (std::size_t i = 0; i < t->columns.size(); ++i) proj.push_back(i);
    } else {
      for (const auto& c : sel.columns) {
        auto idx = t->column(c);
        if (!idx) return fail("sql-error", "Unknown column '" + c + "'");
        proj.push_back(*idx);
      }
    }
    std::optional<std::size_t> where_col;
    if (sel.where_eq) {
      where_col = t->column(sel.where_eq->first);
      if (!where_col) return fail("sql-error", "Unknown column '" + sel.where_eq->first + "'");
    }
    for (const auto& r : t->rows) {
      if (where_col && r[*where_col] != sel.where_eq->second) continue;
      Row out;
      for (auto i : proj) out.push_back(r[i]);
      res.rows.push_back(std::move(out));
    }
    return res;
  }

  std::map<std::string, Table> tables_;
};

}  // namespace conndiff
