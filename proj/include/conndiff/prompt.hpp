#pragma once

// Prompt candidates. A four-part template (role, dynamic context, task steps,
// output requirements) is instantiated once per interface focus group; the
// resulting prompts are the bandit's arms. Rendering fills the dynamic
// context slots and is a pure function of (prompt, property assignment).

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conndiff/props.hpp"
#include "conndiff/trace.hpp"
#include "conndiff/util.hpp"

namespace conndiff {

enum class FocusGroup {
  BatchExecution,
  CursorNavigation,
  TransactionAtomicity,
  HoldabilityMetadata,
  ResourceLifecycle,
  MultiQuery
};

inline constexpr std::array<FocusGroup, 6> kAllFocusGroups = {
    FocusGroup::BatchExecution,      FocusGroup::CursorNavigation,  FocusGroup::TransactionAtomicity,
    FocusGroup::HoldabilityMetadata, FocusGroup::ResourceLifecycle, FocusGroup::MultiQuery};

inline std::string to_string(FocusGroup g) {
  switch (g) {
    case FocusGroup::BatchExecution: return "batch-execution";
    case FocusGroup::CursorNavigation: return "cursor-navigation";
    case FocusGroup::TransactionAtomicity: return "transaction-atomicity";
    case FocusGroup::HoldabilityMetadata: return "holdability-metadata";
    case FocusGroup::ResourceLifecycle: return "resource-lifecycle";
    case FocusGroup::MultiQuery: return "multi-query";
  }
  return "?";
}

inline FocusGroup parse_focus_group(std::string_view s) {
  for (auto g : kAllFocusGroups)
    if (to_string(g) == s) return g;
  throw Error("unknown focus group: " + std::string(s));
}

inline constexpr std::string_view kSlotConnectorPair = "target-connector-pair";
inline constexpr std::string_view kSlotPropertyAssignment = "property-assignment";
inline constexpr std::string_view kSlotFocusGroup = "focus-interface-group";
inline constexpr std::string_view kSlotSchemaHint = "schema-hint";

struct FocusSpec {
  std::string description;
  std::vector<std::string> steps;
  bool operator==(const FocusSpec&) const = default;
};

struct PromptTemplate {
  std::string role_definition;
  std::vector<std::string> dynamic_context_slots;
  std::vector<std::string> task_decomposition;
  std::string output_requirements;
  std::map<std::string, std::string> default_context;  // slot -> text shared by all prompts
  std::map<FocusGroup, FocusSpec> focus;

  bool operator==(const PromptTemplate&) const = default;
};

/// `{{name}}` placeholders in order of appearance.
inline std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("{{", pos)) != std::string_view::npos) {
    const auto end = text.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    out.emplace_back(text.substr(pos + 2, end - pos - 2));
    pos = end + 2;
  }
  return out;
}

inline std::vector<std::string> template_violations(const PromptTemplate& t) {
  std::vector<std::string> out;
  if (trim(t.role_definition).empty()) out.push_back("role definition is empty");
  if (t.dynamic_context_slots.empty()) out.push_back("no dynamic context slots");
  if (t.task_decomposition.empty()) out.push_back("task decomposition is empty");
  if (trim(t.output_requirements).empty()) out.push_back("output requirements are empty");
  const std::set<std::string> slots(t.dynamic_context_slots.begin(), t.dynamic_context_slots.end());
  if (slots.size() != t.dynamic_context_slots.size()) out.push_back("duplicate context slot");
  auto check = [&](std::string_view text, const std::string& where) {
    for (const auto& p : placeholders(text))
      if (!slots.count(p)) out.push_back(where + " references undeclared slot '" + p + "'");
  };
  check(t.role_definition, "role definition");
  for (const auto& s : t.task_decomposition) check(s, "task step");
  for (const auto& [g, spec] : t.focus)
    for (const auto& s : spec.steps) check(s, to_string(g) + " step");
  return out;
}

struct Prompt {
  std::string id;
  std::shared_ptr<const PromptTemplate> tmpl;
  FocusGroup focus_group = FocusGroup::BatchExecution;
  std::map<std::string, std::string> fixed_context;

  /// Content hash over everything that shapes the rendered text.
  std::string fingerprint() const {
    std::uint64_t h = fnv1a64(id);
    h = fnv1a64(tmpl->role_definition, h);
    for (const auto& s : tmpl->dynamic_context_slots) h = fnv1a64(s, h);
    for (const auto& s : tmpl->task_decomposition) h = fnv1a64(s, h);
    h = fnv1a64(tmpl->output_requirements, h);
    h = fnv1a64(to_string(focus_group), h);
    if (auto it = tmpl->focus.find(focus_group); it != tmpl->focus.end()) {
      h = fnv1a64(it->second.description, h);
      for (const auto& s : it->second.steps) h = fnv1a64(s, h);
    }
    for (const auto& [k, v] : fixed_context) h = fnv1a64(k + "=" + v, h);
    return hex64(h);
  }
};

/// One prompt per focus group, ids P1..PN in group order.
inline std::vector<Prompt> instantiate_candidates(std::shared_ptr<const PromptTemplate> tmpl,
                                                  const std::vector<FocusGroup>& groups) {
  if (!tmpl) throw Error("instantiate_candidates: no template");
  if (auto bad = template_violations(*tmpl); !bad.empty()) throw Error("invalid prompt template: " + bad.front());
  if (groups.empty()) throw Error("instantiate_candidates: no focus groups");
  std::set<FocusGroup> seen;
  std::vector<Prompt> out;
  for (auto g : groups) {
    if (!seen.insert(g).second) throw Error("duplicate focus group: " + to_string(g));
    Prompt p;
    p.id = "P" + std::to_string(out.size() + 1);
    p.tmpl = tmpl;
    p.focus_group = g;
    p.fixed_context = tmpl->default_context;
    auto it = tmpl->focus.find(g);
    p.fixed_context[std::string(kSlotFocusGroup)] =
        to_string(g) + (it != tmpl->focus.end() && !it->second.description.empty() ? ": " + it->second.description : "");
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string render_assignment(const PropertyAssignment& a) {
  if (a.bindings.empty()) return "(all defaults)";
  std::vector<std::string> parts;
  for (const auto& [k, v] : a.bindings) parts.push_back(k + "=" + v);
  return join(parts, ", ");
}

/// Final generator input: role, context, tasks, then the output requirements
/// verbatim as the last block.
inline std::string render(const Prompt& prompt, const PropertyAssignment& assignment) {
  const auto& t = *prompt.tmpl;
  std::map<std::string, std::string> values = prompt.fixed_context;
  values[std::string(kSlotPropertyAssignment)] = render_assignment(assignment);
  for (const auto& slot : t.dynamic_context_slots)
    if (!values.count(slot)) throw Error("unfilled slot: " + slot);

  auto fill = [&](std::string text) {
    for (const auto& slot : t.dynamic_context_slots) {
      const std::string key = "{{" + slot + "}}";
      for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + values[slot].size()))
        text.replace(pos, key.size(), values[slot]);
    }
    return text;
  };

  std::string out;
  out += "### Role\n" + fill(t.role_definition) + "\n\n";
  out += "### Context\n";
  for (const auto& slot : t.dynamic_context_slots) out += "- " + slot + ": " + values[slot] + "\n";
  out += "\n### Tasks\n";
  std::vector<std::string> steps = t.task_decomposition;
  if (auto it = t.focus.find(prompt.focus_group); it != t.focus.end())
    steps.insert(steps.end(), it->second.steps.begin(), it->second.steps.end());
  for (std::size_t i = 0; i < steps.size(); ++i) out += std::to_string(i + 1) + ". " + fill(steps[i]) + "\n";
  out += "\n### Output requirements\n" + t.output_requirements;
  return out;
}

// ---------------------------------------------------------------------------
// Grammar weights for the offline generator ship in the same file.

struct GrammarSpec {
  std::map<FocusGroup, std::map<std::string, double>> weights;  // op name -> multiplier
  std::map<FocusGroup, std::string> signatures;                 // op every trace of the group contains

  double weight(FocusGroup g, std::string_view op) const {
    auto it = weights.find(g);
    if (it == weights.end()) return 1.0;
    auto w = it->second.find(std::string(op));
    return w == it->second.end() ? 1.0 : w->second;
  }
  bool operator==(const GrammarSpec&) const = default;
};

struct PromptSet {
  std::shared_ptr<const PromptTemplate> tmpl;
  std::vector<FocusGroup> groups;  // declaration order
  GrammarSpec grammar;
};

inline constexpr std::string_view kPromptsMagic = "conndiff-prompts";

inline PromptSet parse_prompt_set(std::string_view text) {
  const auto doc = parse_records(text, kPromptsMagic);
  auto t = std::make_shared<PromptTemplate>();
  PromptSet set;
  auto single_arg = [](const Record& r) -> const std::string& {
    if (r.args.size() != 1 || !r.fields.empty()) throw ParseError("'" + r.keyword + "' takes one value", r.line);
    return r.args[0];
  };
  auto group_of = [](const Record& r) {
    try {
      return parse_focus_group(r.get("group"));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), r.line);
    }
  };
  for (const auto& r : doc.records) {
    if (r.keyword == "role") {
      t->role_definition = single_arg(r);
    } else if (r.keyword == "slot") {
      t->dynamic_context_slots.push_back(single_arg(r));
    } else if (r.keyword == "step") {
      t->task_decomposition.push_back(single_arg(r));
    } else if (r.keyword == "output") {
      t->output_requirements = single_arg(r);
    } else if (r.keyword == "context") {
      r.expect_fields({"slot", "text"});
      t->default_context[r.get("slot")] = r.get("text");
    } else if (r.keyword == "group") {
      r.expect_fields({"name", "description", "signature"});
      FocusGroup g;
      try {
        g = parse_focus_group(r.get("name"));
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        throw ParseError(e.what(), r.line);
      }
      if (t->focus.count(g)) throw ParseError("duplicate group " + to_string(g), r.line);
      t->focus[g].description = r.find("description") ? *r.find("description") : "";
      if (const auto* sig = r.find("signature")) {
        if (!op_index_of(*sig)) throw ParseError("unknown signature op '" + *sig + "'", r.line);
        set.grammar.signatures[g] = *sig;
      }
      set.groups.push_back(g);
    } else if (r.keyword == "group-step") {
      r.expect_fields({"group", "text"});
      const auto g = group_of(r);
      if (!t->focus.count(g)) throw ParseError("group-step before group declaration", r.line);
      t->focus[g].steps.push_back(r.get("text"));
    } else if (r.keyword == "weight") {
      r.expect_fields({"group", "op", "value"});
      const auto g = group_of(r);
      if (!op_index_of(r.get("op"))) throw ParseError("unknown op '" + r.get("op") + "'", r.line);
      double v = 0;
      try {
        v = std::stod(r.get("value"));
      } catch (...) {
        throw ParseError("weight value is not a number", r.line);
      }
      if (!(v >= 0)) throw ParseError("weight must be non-negative", r.line);
      set.grammar.weights[g][r.get("op")] = v;
    } else {
      throw ParseError("unknown record '" + r.keyword + "'", r.line);
    }
  }
  if (auto bad = template_violations(*t); !bad.empty()) throw ParseError("invalid prompt template: " + bad.front());
  set.tmpl = std::move(t);
  return set;
}

inline std::string serialize_prompt_set(const PromptSet& set) {
  const auto& t = *set.tmpl;
  RecordWriter w(kPromptsMagic, 1);
  w.begin("role").arg(t.role_definition);
  for (const auto& s : t.dynamic_context_slots) w.begin("slot").arg(s);
  for (const auto& s : t.task_decomposition) w.begin("step").arg(s);
  w.begin("output").arg(t.output_requirements);
  for (const auto& [k, v] : t.default_context) w.begin("context").field("slot", k).field("text", v);
  for (auto g : set.groups) {
    w.begin("group").field("name", to_string(g));
    if (auto it = t.focus.find(g); it != t.focus.end() && !it->second.description.empty())
      w.field("description", it->second.description);
    if (auto it = set.grammar.signatures.find(g); it != set.grammar.signatures.end()) w.field("signature", it->second);
    if (auto it = t.focus.find(g); it != t.focus.end())
      for (const auto& s : it->second.steps) w.begin("group-step").field("group", to_string(g)).field("text", s);
    if (auto it = set.grammar.weights.find(g); it != set.grammar.weights.end())
      for (const auto& [op, v] : it->second) {
        std::ostringstream ss;
        ss << v;
        w.begin("weight").field("group", to_string(g)).field("op", op).field("value", ss.str());
      }
  }
  return w.str();
}

}  // namespace conndiff
