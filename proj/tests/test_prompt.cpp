#include <gtest/gtest.h>

#include "conndiff/prompt.hpp"
#include "support.hpp"

using namespace conndiff;
using conndiff::testing::shipped_prompts;

namespace {

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(Template, ShippedSetIsValid) {
  const auto set = shipped_prompts();
  EXPECT_TRUE(template_violations(*set.tmpl).empty());
  EXPECT_EQ(set.groups.size(), 6u);
  EXPECT_EQ(set.grammar.signatures.size(), 6u);
  EXPECT_EQ(set.grammar.weight(FocusGroup::CursorNavigation, "CursorMove"), 5.0);
  EXPECT_EQ(set.grammar.weight(FocusGroup::MultiQuery, "CursorMove"), 1.0);
}

TEST(Template, Violations) {
  PromptTemplate t;
  EXPECT_EQ(template_violations(t).size(), 4u);
  t.role_definition = "role {{missing}}";
  t.dynamic_context_slots = {"a", "a"};
  t.task_decomposition = {"do {{a}}"};
  t.output_requirements = "out";
  const auto v = template_violations(t);
  EXPECT_EQ(v.size(), 2u);  // duplicate slot, undeclared slot
}

TEST(Placeholders, Extraction) {
  EXPECT_EQ(placeholders("x {{a}} y {{b}} {{a}} {{unterminated"), (std::vector<std::string>{"a", "b", "a"}));
}

TEST(Candidates, AllSixGroups) {
  const auto set = shipped_prompts();
  const auto ps = instantiate_candidates(set.tmpl, set.groups);
  ASSERT_EQ(ps.size(), 6u);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(ps[i].id, "P" + std::to_string(i + 1));
  // Stable under re-instantiation.
  const auto again = instantiate_candidates(set.tmpl, set.groups);
  for (std::size_t i = 0; i < ps.size(); ++i) EXPECT_EQ(again[i].fingerprint(), ps[i].fingerprint());
  std::set<std::string> prints;
  for (const auto& p : ps) prints.insert(p.fingerprint());
  EXPECT_EQ(prints.size(), 6u);
}

TEST(Candidates, SingleCursorGroup) {
  const auto set = shipped_prompts();
  const auto ps = instantiate_candidates(set.tmpl, {FocusGroup::CursorNavigation});
  ASSERT_EQ(ps.size(), 1u);
  const auto text = render(ps[0], {});
  for (const auto& step : set.tmpl->focus.at(FocusGroup::CursorNavigation).steps) EXPECT_TRUE(contains(text, step));
}

TEST(Candidates, Errors) {
  const auto set = shipped_prompts();
  EXPECT_THROW(instantiate_candidates(set.tmpl, {FocusGroup::MultiQuery, FocusGroup::MultiQuery}), Error);
  EXPECT_THROW(instantiate_candidates(set.tmpl, {}), Error);
  EXPECT_THROW(instantiate_candidates(nullptr, {FocusGroup::MultiQuery}), Error);
}

TEST(Candidates, FingerprintTracksContent) {
  auto set = shipped_prompts();
  const auto before = instantiate_candidates(set.tmpl, set.groups);
  auto edited = std::make_shared<PromptTemplate>(*set.tmpl);
  edited->focus[FocusGroup::BatchExecution].steps.push_back("One more step.");
  const auto after = instantiate_candidates(edited, set.groups);
  EXPECT_NE(before[0].fingerprint(), after[0].fingerprint());
  EXPECT_EQ(before[1].fingerprint(), after[1].fingerprint());
}

TEST(Render, BatchFocusWithAssignment) {
  const auto set = shipped_prompts();
  const auto ps = instantiate_candidates(set.tmpl, set.groups);
  const Prompt& batch = ps[0];
  ASSERT_EQ(batch.focus_group, FocusGroup::BatchExecution);
  PropertyAssignment a{{{"allowMultiQueries", "true"}}};
  const auto text = render(batch, a);
  EXPECT_TRUE(contains(text, "allowMultiQueries=true"));
  for (const auto& step : set.tmpl->focus.at(FocusGroup::BatchExecution).steps) EXPECT_TRUE(contains(text, step));
  EXPECT_FALSE(contains(text, "{{"));
  // Four parts, in order, output requirements verbatim at the end.
  const auto r = text.find("### Role"), c = text.find("### Context"), t = text.find("### Tasks"),
             o = text.find("### Output requirements");
  ASSERT_NE(r, std::string::npos);
  EXPECT_LT(r, c);
  EXPECT_LT(c, t);
  EXPECT_LT(t, o);
  const auto& req = set.tmpl->output_requirements;
  ASSERT_GE(text.size(), req.size());
  EXPECT_EQ(text.substr(text.size() - req.size()), req);
  EXPECT_EQ(render(batch, a), text);  // deterministic
}

TEST(Render, UnfilledSlot) {
  const auto set = shipped_prompts();
  auto p = instantiate_candidates(set.tmpl, set.groups)[0];
  p.fixed_context.erase("schema-hint");
  try {
    render(p, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "unfilled slot: schema-hint");
  }
}

TEST(Files, PromptSetRoundTrip) {
  const auto set = shipped_prompts();
  const auto text = serialize_prompt_set(set);
  const auto again = parse_prompt_set(text);
  EXPECT_EQ(*again.tmpl, *set.tmpl);
  EXPECT_EQ(again.groups, set.groups);
  EXPECT_EQ(again.grammar, set.grammar);
  EXPECT_EQ(serialize_prompt_set(again), text);
}

TEST(Files, Diagnostics) {
  const std::string head = "conndiff-prompts v1\nrole r\nslot s\nstep x\noutput o\n";
  EXPECT_NO_THROW(parse_prompt_set(head));
  EXPECT_THROW(parse_prompt_set(head + "group name=nonsense\n"), ParseError);
  EXPECT_THROW(parse_prompt_set(head + "group name=multi-query signature=Bogus\n"), ParseError);
  EXPECT_THROW(parse_prompt_set(head + "group-step group=multi-query text=t\n"), ParseError);
  EXPECT_THROW(parse_prompt_set(head + "group name=multi-query\nweight group=multi-query op=Nope value=1\n"), ParseError);
  EXPECT_THROW(parse_prompt_set(head + "group name=multi-query\nweight group=multi-query op=ReadRow value=-1\n"),
               ParseError);
  EXPECT_THROW(parse_prompt_set("conndiff-prompts v1\nrole r\n"), ParseError);
  EXPECT_THROW(parse_prompt_set(head + "step \"uses {{undeclared}}\"\n"), ParseError);
}
