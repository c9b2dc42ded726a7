#include <gtest/gtest.h>

#include "conndiff/differential.hpp"
#include "support.hpp"

using namespace conndiff;
using namespace conndiff::testing;

namespace {

DivergenceCatalog only(Rule r) { return DivergenceCatalog{{r}}; }

const outcome::ThrewException& exception_at(const ExecutionReport& r, std::size_t i) {
  return std::get<outcome::ThrewException>(r.outcomes.at(i).result);
}

PropertyAssignment amq(bool v) { return PropertyAssignment{{{"allowMultiQueries", v ? "true" : "false"}}}; }

const std::vector<std::string> kWitnesses = {
    "r1-forward-only-navigation", "r2-select-in-batch", "r3-statement-holdability", "r4-result-set-holdability",
    "r5-continue-past-failure",   "r6-rewritten-batch", "r7-close-statement-leak",  "r8-max-rows-message"};

}  // namespace

TEST(Backend, ReferenceRejectsForwardOnlyNavigation) {
  const auto r = make_reference()->execute(load_trace("witnesses/listing1.trace"));
  ASSERT_EQ(r.outcomes.size(), 4u);
  EXPECT_EQ(exception_at(r, 3).exception_class, "forward-only-violation");
  EXPECT_TRUE(r.outcomes[3].forward_only);
  EXPECT_EQ(r.outcomes[2].result, OutcomeResult(outcome::Rows{{{1}}}));
}

TEST(Backend, R1AllowsForwardOnlyNavigation) {
  const auto r = make_divergent(only(Rule::R1))->execute(load_trace("witnesses/listing1.trace"));
  EXPECT_EQ(r.outcomes.at(3).result, OutcomeResult(outcome::Unit{}));
  EXPECT_EQ(r.outcomes[3].rules, std::set<std::string>{"R1"});
}

TEST(Backend, R1NonNextMovesAllRefusedByReference) {
  for (auto kind : kAllCursorKinds) {
    Trace t = load_trace("witnesses/listing1.trace");
    std::get<op::CursorMove>(t.ops[3]).kind = kind;
    const auto ref = make_reference()->execute(t);
    const auto div = make_divergent(only(Rule::R1))->execute(t);
    if (kind == CursorKind::Next) {
      EXPECT_EQ(ref.outcomes[3].result, div.outcomes[3].result);
    } else {
      EXPECT_EQ(exception_at(ref, 3).exception_class, "forward-only-violation") << to_string(kind);
      EXPECT_FALSE(std::holds_alternative<outcome::ThrewException>(div.outcomes[3].result)) << to_string(kind);
    }
  }
}

TEST(Backend, R5Listing2WithMultiQueriesStopsAtFailure) {
  const auto r = make_divergent(only(Rule::R5))->execute(load_trace("witnesses/listing2.trace"));
  const auto& t0 = r.final_state.tables.at("t0");
  EXPECT_EQ(t0.rows, (std::vector<Row>{{1}}));
}

TEST(Backend, R5WithoutMultiQueriesContinuesPastFailure) {
  auto t = with_assignment(load_trace("witnesses/listing2.trace"), amq(false));
  const auto r = make_divergent(only(Rule::R5))->execute(t);
  EXPECT_EQ(r.final_state.tables.at("t0").rows, (std::vector<Row>{{1}, {2}}));
  const auto& e = exception_at(r, 6);
  EXPECT_EQ(e.exception_class, "batch-failure");
  EXPECT_EQ(e.update_counts, (std::vector<std::int64_t>{1, kExecuteFailed, 1}));
}

TEST(Backend, ReferenceBatchStopsAtFirstFailureRegardlessOfProperties) {
  for (bool v : {true, false}) {
    auto t = with_assignment(load_trace("witnesses/listing2.trace"), amq(v));
    const auto r = make_reference()->execute(t);
    const auto& e = exception_at(r, 6);
    EXPECT_EQ(e.exception_class, "batch-failure");
    EXPECT_EQ(e.update_counts, (std::vector<std::int64_t>{1}));
    EXPECT_EQ(r.final_state.tables.at("t0").rows, (std::vector<Row>{{1}}));
  }
}

TEST(Backend, GetHoldabilityReturnsConfiguredValue) {
  const auto t = load_trace("witnesses/r3-statement-holdability.trace");
  EXPECT_EQ(make_reference()->execute(t).outcomes.at(2).result,
            OutcomeResult(outcome::Value{"HoldOverCommit"}));
  const auto div = make_divergent(only(Rule::R3))->execute(t);
  EXPECT_EQ(exception_at(div, 2).exception_class, "feature-not-supported");
}

TEST(Backend, CloseStatementClosesResultSet) {
  const auto t = load_trace("witnesses/r7-close-statement-leak.trace");
  const auto ref = make_reference()->execute(t);
  EXPECT_EQ(ref.outcomes.at(4).result, OutcomeResult(outcome::Value{"true"}));
  EXPECT_FALSE(ref.final_state.ledger.result_set_open);
  const auto div = make_divergent(only(Rule::R7))->execute(t);
  EXPECT_EQ(div.outcomes.at(4).result, OutcomeResult(outcome::Value{"false"}));
  EXPECT_TRUE(div.final_state.ledger.result_set_open);
}

TEST(Backend, R2ReturnsIllegalCountForQueryInBatch) {
  const auto t = load_trace("witnesses/r2-select-in-batch.trace");
  const auto ref_r = make_reference()->execute(t);
  const auto& ref = exception_at(ref_r, 5);
  EXPECT_EQ(ref.exception_class, "batch-failure");
  EXPECT_EQ(ref.update_counts, (std::vector<std::int64_t>{1}));
  const auto div = make_divergent(only(Rule::R2))->execute(t);
  EXPECT_EQ(div.outcomes.at(5).result, OutcomeResult(outcome::UpdateCounts{{1, kIllegalCount}}));
}

TEST(Backend, R4ReportsWrongResultSetHoldability) {
  const auto t = load_trace("witnesses/r4-result-set-holdability.trace");
  EXPECT_EQ(make_reference()->execute(t).outcomes.at(3).result, OutcomeResult(outcome::Value{"CloseAtCommit"}));
  EXPECT_EQ(make_divergent(only(Rule::R4))->execute(t).outcomes.at(3).result,
            OutcomeResult(outcome::Value{"HoldOverCommit"}));
}

TEST(Backend, R6DropsFinalRowGroupWhenRewriting) {
  const auto t = load_trace("witnesses/r6-rewritten-batch.trace");
  const auto ref = make_reference()->execute(t);
  EXPECT_EQ(ref.final_state.tables.at("t0").rows, (std::vector<Row>{{1, 10}, {2, 20}}));
  const auto div = make_divergent(only(Rule::R6))->execute(t);
  EXPECT_EQ(div.final_state.tables.at("t0").rows, (std::vector<Row>{{1, 10}}));
  // Without the property the rule is dormant.
  const auto plain = make_divergent(only(Rule::R6))->execute(with_assignment(t, {}));
  EXPECT_EQ(plain.final_state, ref.final_state);
}

TEST(Backend, R8ChangesOnlyTheMessage) {
  const auto t = load_trace("witnesses/r8-max-rows-message.trace");
  const auto ref_r = make_reference()->execute(t);
  const auto& ref = exception_at(ref_r, 2);
  const auto div_r = make_divergent(only(Rule::R8))->execute(t);
  const auto& div = exception_at(div_r, 2);
  EXPECT_EQ(ref.exception_class, div.exception_class);
  EXPECT_EQ(ref.message, kMaxRowsMessage);
  EXPECT_EQ(div.message, kMaxRowsWrongMessage);
}

TEST(Backend, EachWitnessIsNeutralUntilItsRuleIsOn) {
  for (std::size_t i = 0; i < kWitnesses.size(); ++i) {
    const auto t = load_trace("witnesses/" + kWitnesses[i] + ".trace");
    const auto ref = make_reference()->execute(t);
    // every other rule on: the witness must not be affected by them alone
    DivergenceCatalog others = DivergenceCatalog::all();
    others.rules.erase(kAllRules[i]);
    const auto without = make_divergent(others)->execute(t);
    const auto with = make_divergent(only(kAllRules[i]))->execute(t);
    std::vector<OutcomeResult> a, b, c;
    for (const auto& o : ref.outcomes) a.push_back(o.result);
    for (const auto& o : without.outcomes) b.push_back(o.result);
    for (const auto& o : with.outcomes) c.push_back(o.result);
    EXPECT_EQ(a, b) << kWitnesses[i];
    EXPECT_EQ(ref.final_state, without.final_state) << kWitnesses[i];
    EXPECT_TRUE(a != c || ref.final_state != with.final_state) << kWitnesses[i];
  }
}

TEST(Backend, EmptyCatalogMatchesReference) {
  const auto ref = make_reference();
  const auto div = make_divergent({});
  for (const auto& t : stub_corpus(500)) {
    const auto a = ref->execute(t);
    const auto b = div->execute(t);
    ASSERT_EQ(a.outcomes.size(), b.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) EXPECT_EQ(a.outcomes[i].result, b.outcomes[i].result);
    EXPECT_EQ(a.final_state, b.final_state);
  }
}

TEST(Backend, ExecutionIsDeterministicAndIsolated) {
  const auto div = make_divergent(DivergenceCatalog::all());
  const auto corpus = stub_corpus(200);
  std::vector<FinalState> first;
  for (const auto& t : corpus) first.push_back(div->execute(t).final_state);
  // Re-running in reverse order must not leak state between executions.
  for (std::size_t i = corpus.size(); i-- > 0;) EXPECT_EQ(div->execute(corpus[i]).final_state, first[i]);
}

TEST(Backend, ReferenceIgnoresProperties) {
  const auto ref = make_reference();
  const auto assignments = curate_subsets(shipped_schema(), 8, SubsetStrategy::PairwiseInteractions, 7).flattened();
  for (const auto& t : stub_corpus(300)) {
    const auto base = ref->execute(with_assignment(t, {}));
    for (const auto& a : assignments) {
      const auto r = ref->execute(with_assignment(t, a));
      ASSERT_EQ(r.outcomes.size(), base.outcomes.size());
      for (std::size_t i = 0; i < r.outcomes.size(); ++i) EXPECT_EQ(r.outcomes[i].result, base.outcomes[i].result);
      EXPECT_EQ(r.final_state, base.final_state);
    }
  }
}

TEST(Backend, ValidTracesNeverHitStructuralErrors) {
  const auto ref = make_reference();
  for (const auto& t : stub_corpus(2000)) {
    ASSERT_TRUE(is_valid(t));
    for (const auto& o : ref->execute(t).outcomes)
      EXPECT_FALSE(std::holds_alternative<outcome::StructuralError>(o.result)) << serialize(t);
  }
}

TEST(Backend, StepBeforeConnectIsStructural) {
  Session s;
  const auto out = make_reference()->step(op::Commit{}, s, {});
  EXPECT_TRUE(std::holds_alternative<outcome::StructuralError>(out.result));
}

TEST(Backend, CatalogTags) {
  EXPECT_EQ(make_catalog({"R1", "R8"}).to_string(), "R1,R8");
  EXPECT_EQ(DivergenceCatalog{}.to_string(), "none");
  EXPECT_THROW(make_catalog({"R9"}), Error);
}
