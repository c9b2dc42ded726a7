#pragma once

// Connection-property configuration space: the schema of tunable properties,
// points in the full product space, and curated subset catalogs sampled by
// the campaign.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "conndiff/util.hpp"

namespace conndiff {

struct PropertyDef {
  std::string name;
  std::vector<std::string> domain;
  std::string default_value;

  bool is_boolean() const {
    return domain.size() == 2 && std::is_permutation(domain.begin(), domain.end(),
                                                     std::vector<std::string>{"false", "true"}.begin());
  }
  bool operator==(const PropertyDef&) const = default;
};

/// A point in the property space. Unbound names resolve to the schema default.
struct PropertyAssignment {
  std::map<std::string, std::string> bindings;

  bool operator==(const PropertyAssignment&) const = default;
  auto operator<=>(const PropertyAssignment&) const = default;

  const std::string* find(const std::string& name) const {
    auto it = bindings.find(name);
    return it == bindings.end() ? nullptr : &it->second;
  }

  /// Boolean lookup for properties the backends consult; absent means false.
  bool flag(const std::string& name) const {
    const auto* v = find(name);
    return v && *v == "true";
  }

  std::string to_string() const {
    std::vector<std::string> parts;
    for (const auto& [k, v] : bindings) parts.push_back(k + "=" + v);
    return parts.empty() ? "{}" : "{" + join(parts, ", ") + "}";
  }
};

class PropertySchema {
public:
  PropertySchema() = default;

  PropertySchema(std::vector<PropertyDef> props,
                 std::vector<std::pair<std::string, std::string>> interactions = {})
      : props_(std::move(props)), interactions_(std::move(interactions)) {
    check();
  }

  const std::vector<PropertyDef>& properties() const noexcept { return props_; }
  const std::vector<std::pair<std::string, std::string>>& interactions() const noexcept { return interactions_; }

  const PropertyDef* find(const std::string& name) const {
    for (const auto& p : props_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < props_.size(); ++i)
      if (props_[i].name == name) return i;
    throw Error("unknown property: " + name);
  }

  /// Empty when the assignment is valid against this schema.
  std::vector<std::string> violations(const PropertyAssignment& a) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : a.bindings) {
      const auto* def = find(k);
      if (!def) {
        out.push_back("unknown property '" + k + "'");
      } else if (std::find(def->domain.begin(), def->domain.end(), v) == def->domain.end()) {
        out.push_back("value '" + v + "' not in domain of '" + k + "'");
      }
    }
    return out;
  }

  std::string value_of(const PropertyAssignment& a, const std::string& name) const {
    if (const auto* v = a.find(name)) return *v;
    const auto* def = find(name);
    if (!def) throw Error("unknown property: " + name);
    return def->default_value;
  }

  /// Fully bound assignment with every property at its default.
  PropertyAssignment defaults() const {
    PropertyAssignment a;
    for (const auto& p : props_) a.bindings[p.name] = p.default_value;
    return a;
  }

  /// Binds every unbound property to its default.
  PropertyAssignment complete(const PropertyAssignment& a) const {
    PropertyAssignment out = defaults();
    for (const auto& [k, v] : a.bindings) out.bindings[k] = v;
    return out;
  }

private:
  void check() const {
    std::set<std::string> names;
    for (const auto& p : props_) {
      if (p.name.empty()) throw Error("property with empty name");
      if (!names.insert(p.name).second) throw Error("duplicate property name: " + p.name);
      if (p.domain.size() < 2) throw Error("property '" + p.name + "' needs at least two domain values");
      std::set<std::string> vals(p.domain.begin(), p.domain.end());
      if (vals.size() != p.domain.size()) throw Error("property '" + p.name + "' has duplicate domain values");
      if (!vals.count(p.default_value)) throw Error("default of '" + p.name + "' is not in its domain");
    }
    for (const auto& [a, b] : interactions_) {
      if (!names.count(a) || !names.count(b)) throw Error("interaction names unknown property: " + a + "/" + b);
      if (a == b) throw Error("interaction pair must name two distinct properties");
    }
  }

  std::vector<PropertyDef> props_;
  std::vector<std::pair<std::string, std::string>> interactions_;
};

/// Size of the full product space; throws if it does not fit in 64 bits.
inline std::uint64_t space_size(const PropertySchema& schema) {
  std::uint64_t n = 1;
  for (const auto& p : schema.properties()) {
    const std::uint64_t d = p.domain.size();
    if (n > UINT64_MAX / d) throw Error("property space size overflows 64 bits");
    n *= d;
  }
  return n;
}

/// The index-th point of the space in mixed-radix order (last property fastest).
inline PropertyAssignment assignment_at(const PropertySchema& schema, std::uint64_t index) {
  PropertyAssignment a;
  const auto& props = schema.properties();
  for (std::size_t i = props.size(); i-- > 0;) {
    const auto d = props[i].domain.size();
    a.bindings[props[i].name] = props[i].domain[index % d];
    index /= d;
  }
  return a;
}

enum class SubsetStrategy { DefaultsPlusSingleFlips, PairwiseInteractions, Random };

inline std::string to_string(SubsetStrategy s) {
  switch (s) {
    case SubsetStrategy::DefaultsPlusSingleFlips: return "defaults-plus-single-flips";
    case SubsetStrategy::PairwiseInteractions: return "pairwise-interactions";
    case SubsetStrategy::Random: return "random";
  }
  return "?";
}

inline SubsetStrategy parse_strategy(const std::string& s) {
  if (s == "defaults-plus-single-flips") return SubsetStrategy::DefaultsPlusSingleFlips;
  if (s == "pairwise-interactions") return SubsetStrategy::PairwiseInteractions;
  if (s == "random") return SubsetStrategy::Random;
  throw Error("unknown subset strategy: " + s);
}

struct PropertySubset {
  std::string name;
  std::vector<PropertyAssignment> assignments;
  bool operator==(const PropertySubset&) const = default;
};

struct SubsetCatalog {
  std::vector<PropertySubset> subsets;
  SubsetStrategy strategy = SubsetStrategy::DefaultsPlusSingleFlips;
  std::uint64_t seed = 0;

  bool operator==(const SubsetCatalog&) const = default;

  std::vector<PropertyAssignment> flattened() const {
    std::vector<PropertyAssignment> out;
    for (const auto& s : subsets) out.insert(out.end(), s.assignments.begin(), s.assignments.end());
    return out;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& s : subsets) n += s.assignments.size();
    return n;
  }
};

/// Builds the representative subset catalog. Deterministic for fixed inputs;
/// `seed` only influences the random strategy.
inline SubsetCatalog curate_subsets(const PropertySchema& schema, std::size_t k, SubsetStrategy strategy,
                                    std::uint64_t seed) {
  if (k < 1) throw Error("curate_subsets: k must be at least 1");
  SubsetCatalog cat;
  cat.strategy = strategy;
  cat.seed = seed;

  std::size_t budget = k;
  auto push = [&](const std::string& subset, PropertyAssignment a) {
    if (budget == 0) return;
    if (cat.subsets.empty() || cat.subsets.back().name != subset) cat.subsets.push_back({subset, {}});
    cat.subsets.back().assignments.push_back(std::move(a));
    --budget;
  };

  if (strategy == SubsetStrategy::Random) {
    const auto total = space_size(schema);
    if (k > total) throw Error("space exhausted: k=" + std::to_string(k) + " exceeds |V|=" + std::to_string(total));
    Rng rng(seed);
    std::set<std::uint64_t> seen;
    while (seen.size() < k) {
      const auto idx = uniform_index(rng, total);
      if (seen.insert(idx).second) push("random", assignment_at(schema, idx));
    }
    return cat;
  }

  const auto base = schema.defaults();
  push("defaults", base);
  for (const auto& p : schema.properties()) {
    for (const auto& v : p.domain) {
      if (v == p.default_value) continue;
      auto a = base;
      a.bindings[p.name] = v;
      push("flip:" + p.name, std::move(a));
    }
  }
  if (strategy == SubsetStrategy::PairwiseInteractions) {
    for (const auto& [first, second] : schema.interactions()) {
      const auto* pa = schema.find(first);
      const auto* pb = schema.find(second);
      for (const auto& va : pa->domain) {
        if (va == pa->default_value) continue;
        for (const auto& vb : pb->domain) {
          if (vb == pb->default_value) continue;
          auto a = base;
          a.bindings[first] = va;
          a.bindings[second] = vb;
          push("pair:" + first + "+" + second, std::move(a));
        }
      }
    }
  }
  return cat;
}

/// Uniform draw over the flattened catalog.
inline PropertyAssignment sample(const SubsetCatalog& catalog, Rng& rng) {
  const auto n = catalog.size();
  if (n == 0) throw Error("sample: catalog is empty");
  auto idx = uniform_index(rng, n);
  for (const auto& s : catalog.subsets) {
    if (idx < s.assignments.size()) return s.assignments[idx];
    idx -= s.assignments.size();
  }
  throw Error("sample: unreachable");
}

// ---------------------------------------------------------------------------
// Files: `conndiff-props v1` holds a schema, `conndiff-catalog v1` a catalog.

inline PropertySchema parse_schema(std::string_view text) {
  const auto doc = parse_records(text, "conndiff-props");
  std::vector<PropertyDef> props;
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& r : doc.records) {
    if (r.keyword == "property") {
      r.expect_fields({"name", "domain", "default"});
      props.push_back({r.get("name"), split(r.get("domain"), ','), r.get("default")});
    } else if (r.keyword == "interaction") {
      if (r.args.size() != 2 || !r.fields.empty()) throw ParseError("interaction takes exactly two names", r.line);
      pairs.emplace_back(r.args[0], r.args[1]);
    } else {
      throw ParseError("unknown record '" + r.keyword + "'", r.line);
    }
  }
  try {
    return PropertySchema(std::move(props), std::move(pairs));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what());
  }
}

inline std::string serialize_schema(const PropertySchema& schema) {
  RecordWriter w("conndiff-props", 1);
  for (const auto& p : schema.properties())
    w.begin("property").field("name", p.name).field("domain", join(p.domain, ",")).field("default", p.default_value);
  for (const auto& [a, b] : schema.interactions()) w.begin("interaction").arg(a).arg(b);
  return w.str();
}

inline std::string serialize_catalog(const SubsetCatalog& cat) {
  RecordWriter w("conndiff-catalog", 1);
  w.begin("catalog").field("strategy", to_string(cat.strategy)).field("seed", std::to_string(cat.seed));
  for (const auto& s : cat.subsets) {
    w.begin("subset").field("name", s.name);
    for (const auto& a : s.assignments) {
      w.begin("assign");
      for (const auto& [k, v] : a.bindings) w.field(k, v);
    }
  }
  return w.str();
}

/// Loads a catalog and checks every assignment against `schema`.
inline SubsetCatalog parse_catalog(std::string_view text, const PropertySchema& schema) {
  const auto doc = parse_records(text, "conndiff-catalog");
  SubsetCatalog cat;
  bool header = false;
  for (const auto& r : doc.records) {
    if (r.keyword == "catalog") {
      r.expect_fields({"strategy", "seed"});
      cat.strategy = parse_strategy(r.get("strategy"));
      cat.seed = static_cast<std::uint64_t>(r.get_int("seed"));
      header = true;
    } else if (r.keyword == "subset") {
      r.expect_fields({"name"});
      cat.subsets.push_back({r.get("name"), {}});
    } else if (r.keyword == "assign") {
      if (cat.subsets.empty()) throw ParseError("assign before any subset", r.line);
      PropertyAssignment a;
      for (const auto& [k, v] : r.fields) a.bindings[k] = v;
      if (auto bad = schema.violations(a); !bad.empty()) throw ParseError(bad.front(), r.line);
      auto& list = cat.subsets.back().assignments;
      if (std::find(list.begin(), list.end(), a) != list.end())
        throw ParseError("duplicate assignment in subset '" + cat.subsets.back().name + "'", r.line);
      list.push_back(std::move(a));
    } else {
      throw ParseError("unknown record '" + r.keyword + "'", r.line);
    }
  }
  if (!header) throw ParseError("missing catalog record");
  for (const auto& s : cat.subsets)
    if (s.assignments.empty()) throw ParseError("subset '" + s.name + "' is empty");
  return cat;
}

}  // namespace conndiff
