#pragma once

// Shared plumbing: error types, the header-versioned record format used by
// every persisted file, deterministic RNG helpers and content hashing.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace conndiff {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line` is 1-based; `op_index` is set when the
/// failing record is a trace op.
class ParseError : public Error {
public:
  ParseError(std::string reason, int line = 0, std::optional<int> op_index = std::nullopt)
      : Error(format(reason, line, op_index)),
        reason_(std::move(reason)),
        line_(line),
        op_index_(op_index) {}

  const std::string& reason() const noexcept { return reason_; }
  int line() const noexcept { return line_; }
  std::optional<int> op_index() const noexcept { return op_index_; }

private:
  static std::string format(const std::string& reason, int line, std::optional<int> op) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (op) out += "op " + std::to_string(*op) + ": ";
    return out + reason;
  }

  std::string reason_;
  int line_;
  std::optional<int> op_index_;
};

// ---------------------------------------------------------------------------
// Strings

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t i = 0;
  bool neg = false;
  if (s[0] == '-' || s[0] == '+') {
    neg = s[0] == '-';
    i = 1;
  }
  if (i == s.size()) return std::nullopt;
  std::int64_t v = 0;
  for (; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return std::nullopt;
    const int d = s[i] - '0';
    if (v > (INT64_MAX - d) / 10) return std::nullopt;
    v = v * 10 + d;
  }
  return neg ? -v : v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes via a temporary sibling and rename so readers never see a torn file.
inline void write_file_atomic(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename " + tmp + " to " + path);
}

// ---------------------------------------------------------------------------
// Hashing and randomness

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Rejection sampling on raw engine output, so the
/// stream is identical on every standard library (unlike the std distributions).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw Error("uniform_index: empty range");
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform real in [0, 1) with 53 bits of precision.
inline double uniform_real(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool bernoulli(Rng& rng, double p) { return uniform_real(rng) < p; }

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// ---------------------------------------------------------------------------
// Record files
//
// Every persisted file is line oriented: a header line `<magic> v<version>`,
// then one record per line. A record is a keyword followed by tokens; a token
// is either `key=value` or a positional value. Values containing whitespace or
// special characters are double-quoted with C-style escapes. Blank lines and
// lines starting with '#' are ignored.

struct Record {
  int line = 0;
  std::string keyword;
  std::vector<std::string> args;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* find(std::string_view key) const {
    for (const auto& [k, v] : fields)
      if (k == key) return &v;
    return nullptr;
  }

  const std::string& get(std::string_view key) const {
    if (const auto* v = find(key)) return *v;
    throw ParseError("'" + keyword + "' record is missing field '" + std::string(key) + "'", line);
  }

  std::int64_t get_int(std::string_view key) const {
    const auto& raw = get(key);
    if (auto v = parse_int(raw)) return *v;
    throw ParseError("field '" + std::string(key) + "' is not an integer: " + raw, line);
  }

  /// Rejects any field name outside `allowed`.
  void expect_fields(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [k, v] : fields) {
      bool ok = false;
      for (auto a : allowed) ok = ok || a == k;
      if (!ok) throw ParseError("unknown field '" + k + "' in '" + keyword + "' record", line);
    }
  }
};

struct RecordDocument {
  std::string magic;
  int version = 0;
  std::vector<Record> records;
};

inline bool needs_quoting(std::string_view v) {
  if (v.empty()) return true;
  for (char c : v)
    if (c == ' ' || c == '\t' || c == '"' || c == '=' || c == '#' || c == '\\' || c == '\n' || c == '\r')
      return true;
  return false;
}

inline std::string quote_value(std::string_view v) {
  if (!needs_quoting(v)) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

class RecordWriter {
public:
  RecordWriter(std::string_view magic, int version) {
    out_ += std::string(magic) + " v" + std::to_string(version) + "\n";
  }

  RecordWriter& begin(std::string_view keyword) {
    if (open_) out_ += "\n";
    out_ += keyword;
    open_ = true;
    return *this;
  }
  RecordWriter& arg(std::string_view v) {
    out_ += " " + quote_value(v);
    return *this;
  }
  RecordWriter& field(std::string_view key, std::string_view v) {
    out_ += " " + std::string(key) + "=" + quote_value(v);
    return *this;
  }
  RecordWriter& field(std::string_view key, std::int64_t v) { return field(key, std::to_string(v)); }
  RecordWriter& comment(std::string_view text) {
    if (open_) out_ += "\n";
    out_ += "# " + std::string(text);
    open_ = true;
    return *this;
  }

  std::string str() const { return open_ ? out_ + "\n" : out_; }

private:
  std::string out_;
  bool open_ = false;
};

namespace detail {

// Reads one token starting at s[i]; returns {key-or-empty, value}.
inline std::pair<std::optional<std::string>, std::string> read_token(std::string_view s, std::size_t& i, int line) {
  auto read_value = [&](std::size_t& j) {
    std::string v;
    if (j < s.size() && s[j] == '"') {
      ++j;
      while (true) {
        if (j >= s.size()) throw ParseError("unterminated quoted value", line);
        char c = s[j++];
        if (c == '"') break;
        if (c == '\\') {
          if (j >= s.size()) throw ParseError("dangling escape", line);
          char e = s[j++];
          switch (e) {
            case 'n': v += '\n'; break;
            case 't': v += '\t'; break;
            case 'r': v += '\r'; break;
            case '"': v += '"'; break;
            case '\\': v += '\\'; break;
            default: throw ParseError(std::string("unknown escape \\") + e, line);
          }
        } else {
          v += c;
        }
      }
      if (j < s.size() && s[j] != ' ' && s[j] != '\t') throw ParseError("garbage after quoted value", line);
    } else {
      while (j < s.size() && s[j] != ' ' && s[j] != '\t') {
        if (s[j] == '"') throw ParseError("stray quote in value", line);
        v += s[j++];
      }
    }
    return v;
  };

  if (s[i] == '"') return {std::nullopt, read_value(i)};
  std::size_t j = i;
  while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '=' && s[j] != '"') ++j;
  if (j < s.size() && s[j] == '=') {
    std::string key(s.substr(i, j - i));
    if (key.empty()) throw ParseError("empty field name", line);
    i = j + 1;
    return {key, read_value(i)};
  }
  return {std::nullopt, read_value(i)};
}

}  // namespace detail

inline Record parse_record_line(std::string_view text, int line) {
  Record rec;
  rec.line = line;
  std::size_t i = 0;
  bool first = true;
  while (true) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size()) break;
    auto [key, value] = detail::read_token(text, i, line);
    if (first) {
      if (key) throw ParseError("record must start with a keyword", line);
      rec.keyword = std::move(value);
      first = false;
    } else if (key) {
      for (const auto& f : rec.fields)
        if (f.first == *key) throw ParseError("duplicate field '" + *key + "'", line);
      rec.fields.emplace_back(std::move(*key), std::move(value));
    } else {
      rec.args.push_back(std::move(value));
    }
  }
  return rec;
}

/// Parses a whole record document and checks its header against `magic`.
inline RecordDocument parse_records(std::string_view text, std::string_view magic, int max_version = 1) {
  RecordDocument doc;
  bool header = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line[0] == '#') {
      if (nl == text.size()) break;
      continue;
    }
    if (!header) {
      const auto sp = line.find(' ');
      const auto got_magic = line.substr(0, sp);
      if (got_magic != magic)
        throw ParseError("expected header '" + std::string(magic) + " v" + std::to_string(max_version) + "'",
                         line_no);
      const auto ver = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp + 1));
      const auto v = ver.size() > 1 && ver[0] == 'v' ? parse_int(ver.substr(1)) : std::nullopt;
      if (!v || *v < 1 || *v > max_version)
        throw ParseError("unsupported version '" + std::string(ver) + "'", line_no);
      doc.magic = std::string(magic);
      doc.version = static_cast<int>(*v);
      header = true;
    } else {
      doc.records.push_back(parse_record_line(line, line_no));
    }
    if (nl == text.size()) break;
  }
  if (!header) throw ParseError("empty document");
  return doc;
}

}  // namespace conndiff
