#pragma once

// The mini-SQL subset accepted inside trace statements:
//
//   CREATE TABLE t (c INT [PRIMARY KEY] [, c2 INT ...])
//   DROP TABLE t
//   INSERT INTO t VALUES (v, ...) [, (v, ...) ...]
//   SELECT c [, c2] | * FROM t [WHERE c = k]
//   SELECT k [, k2]                     -- constant row, no table
//
// Keywords are case-insensitive; identifiers are case-sensitive; all cells are
// 64-bit integers.

#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "conndiff/util.hpp"

namespace conndiff::sql {

struct ColumnDef {
  std::string name;
  bool primary_key = false;
  bool operator==(const ColumnDef&) const = default;
};

struct CreateTable {
  std::string table;
  std::vector<ColumnDef> columns;
  bool operator==(const CreateTable&) const = default;
};

struct DropTable {
  std::string table;
  bool operator==(const DropTable&) const = default;
};

struct Insert {
  std::string table;
  std::vector<std::vector<std::int64_t>> rows;
  bool operator==(const Insert&) const = default;
};

struct Select {
  std::vector<std::string> columns;  // empty means '*'
  std::optional<std::string> table;  // nullopt for constant selects
  std::vector<std::int64_t> constants;
  std::optional<std::pair<std::string, std::int64_t>> where_eq;
  bool operator==(const Select&) const = default;
};

using Statement = std::variant<CreateTable, DropTable, Insert, Select>;

inline bool is_query(const Statement& s) { return std::holds_alternative<Select>(s); }
inline bool is_dml(const Statement& s) { return std::holds_alternative<Insert>(s); }

class SqlError : public Error {
public:
  using Error::Error;
};

namespace detail {

class Lexer {
public:
  explicit Lexer(std::string_view text) : s_(text) {}

  void skip_ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  bool at_end() {
    skip_ws();
    return i_ >= s_.size();
  }

  bool try_punct(char c) {
    skip_ws();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  void punct(char c) {
    if (!try_punct(c)) fail(std::string("expected '") + c + "'");
  }

  std::string word() {
    skip_ws();
    const auto b = i_;
    while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
    if (b == i_) fail("expected identifier");
    if (std::isdigit(static_cast<unsigned char>(s_[b]))) {
      i_ = b;
      fail("identifier cannot start with a digit");
    }
    return std::string(s_.substr(b, i_ - b));
  }

  bool try_keyword(std::string_view kw) {
    skip_ws();
    const auto save = i_;
    if (i_ >= s_.size() || !std::isalpha(static_cast<unsigned char>(s_[i_]))) return false;
    auto w = word();
    if (w.size() == kw.size()) {
      bool eq = true;
      for (std::size_t k = 0; k < w.size(); ++k)
        eq = eq && std::toupper(static_cast<unsigned char>(w[k])) == kw[k];
      if (eq) return true;
    }
    i_ = save;
    return false;
  }

  void keyword(std::string_view kw) {
    if (!try_keyword(kw)) fail("expected " + std::string(kw));
  }

  bool peek_number() {
    skip_ws();
    return i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '-');
  }

  std::int64_t number() {
    skip_ws();
    const auto b = i_;
    if (i_ < s_.size() && s_[i_] == '-') ++i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    auto v = parse_int(s_.substr(b, i_ - b));
    if (!v) {
      i_ = b;
      fail("expected integer literal");
    }
    return *v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw SqlError("sql: " + what + " at offset " + std::to_string(i_) + " in \"" + std::string(s_) + "\"");
  }

private:
  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace detail

inline Statement parse(std::string_view text) {
  detail::Lexer lx(text);
  Statement out;
  if (lx.try_keyword("CREATE")) {
    lx.keyword("TABLE");
    CreateTable ct{lx.word(), {}};
    lx.punct('(');
    do {
      ColumnDef col{lx.word(), false};
      lx.keyword("INT");
      if (lx.try_keyword("PRIMARY")) {
        lx.keyword("KEY");
        col.primary_key = true;
      }
      for (const auto& c : ct.columns)
        if (c.name == col.name) lx.fail("duplicate column " + col.name);
      ct.columns.push_back(std::move(col));
    } while (lx.try_punct(','));
    lx.punct(')');
    int pks = 0;
    for (const auto& c : ct.columns) pks += c.primary_key;
    if (pks > 1) lx.fail("more than one PRIMARY KEY");
    out = std::move(ct);
  } else if (lx.try_keyword("DROP")) {
    lx.keyword("TABLE");
    out = DropTable{lx.word()};
  } else if (lx.try_keyword("INSERT")) {
    lx.keyword("INTO");
    Insert ins{lx.word(), {}};
    lx.keyword("VALUES");
    do {
      lx.punct('(');
      std::vector<std::int64_t> row;
      do {
        row.push_back(lx.number());
      } while (lx.try_punct(','));
      lx.punct(')');
      ins.rows.push_back(std::move(row));
    } while (lx.try_punct(','));
    out = std::move(ins);
  } else if (lx.try_keyword("SELECT")) {
    Select sel;
    if (lx.try_punct('*')) {
      // all columns
    } else if (lx.peek_number()) {
      do {
        sel.constants.push_back(lx.number());
      } while (lx.try_punct(','));
    } else {
      do {
        sel.columns.push_back(lx.word());
      } while (lx.try_punct(','));
    }
    if (sel.constants.empty()) {
      lx.keyword("FROM");
      sel.table = lx.word();
      if (lx.try_keyword("WHERE")) {
        auto col = lx.word();
        lx.punct('=');
        sel.where_eq = std::make_pair(std::move(col), lx.number());
      }
    }
    out = std::move(sel);
  } else {
    lx.fail("unsupported statement");
  }
  lx.try_punct(';');
  if (!lx.at_end()) lx.fail("trailing input");
  return out;
}

inline std::string to_string(const Statement& stmt) {
  struct Printer {
    std::string operator()(const CreateTable& c) const {
      std::string s = "CREATE TABLE " + c.table + "(";
      for (std::size_t i = 0; i < c.columns.size(); ++i) {
        if (i) s += ", ";
        s += c.columns[i].name + " INT";
        if (c.columns[i].primary_key) s += " PRIMARY KEY";
      }
      return s + ")";
    }
    std::string operator()(const DropTable& d) const { return "DROP TABLE " + d.table; }
    std::string operator()(const Insert& ins) const {
      std::string s = "INSERT INTO " + ins.table + " VALUES ";
      for (std::size_t r = 0; r < ins.rows.size(); ++r) {
        if (r) s += ", ";
        s += "(";
        for (std::size_t i = 0; i < ins.rows[r].size(); ++i) {
          if (i) s += ", ";
          s += std::to_string(ins.rows[r][i]);
        }
        s += ")";
      }
      return s;
    }
    std::string operator()(const Select& sel) const {
      std::string s = "SELECT ";
      if (!sel.constants.empty()) {
        for (std::size_t i = 0; i < sel.constants.size(); ++i) s += (i ? ", " : "") + std::to_string(sel.constants[i]);
        return s;
      }
      s += sel.columns.empty() ? "*" : join(sel.columns, ", ");
      s += " FROM " + *sel.table;
      if (sel.where_eq) s += " WHERE " + sel.where_eq->first + " = " + std::to_string(sel.where_eq->second);
      return s;
    }
  };
  return std::visit(Printer{}, stmt);
}

/// Table the statement touches, if any.
inline std::optional<std::string> target_table(const Statement& stmt) {
  if (auto* c = std::get_if<CreateTable>(&stmt)) return c->table;
  if (auto* d = std::get_if<DropTable>(&stmt)) return d->table;
  if (auto* i = std::get_if<Insert>(&stmt)) return i->table;
  return std::get<Select>(stmt).table;
}

}  // namespace conndiff::sql
