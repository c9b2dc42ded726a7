#include <gtest/gtest.h>

#include "conndiff/backend.hpp"
#include "conndiff/trace.hpp"
#include "support.hpp"

using namespace conndiff;
using conndiff::testing::load_trace;
using conndiff::testing::stub_corpus;

namespace {

Trace make(std::vector<TraceOp> ops) {
  Trace t;
  t.id = "t";
  t.ops = std::move(ops);
  return t;
}

bool has(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Validate, MinimalTraceIsOk) { EXPECT_TRUE(validate(make({op::Connect{}})).empty()); }

TEST(Validate, MustBeginWithConnect) {
  const auto v = validate(make({op::ExecuteQuery{"SELECT 1"}}));
  EXPECT_TRUE(has(v, "must begin with Connect"));
}

TEST(Validate, Listing1IsOk) {
  const auto t = make({op::Connect{}, op::CreateStatement{ResultSetType::ForwardOnly, Holdability::HoldOverCommit},
                       op::ExecuteQuery{"SELECT 1"}, op::CursorMove{CursorKind::BeforeFirst, 0}});
  EXPECT_TRUE(validate(t).empty());
  EXPECT_EQ(load_trace("witnesses/listing1.trace").ops, t.ops);
}

TEST(Validate, ReportsEveryViolation) {
  Trace t = make({op::ReadRow{}, op::Connect{}, op::Connect{}, op::CursorMove{CursorKind::Next, 0}, op::ExecuteBatch{},
                  op::AddBatch{"INSERT INTO t VALUES (1)"}, op::ExecuteBatch{}, op::ExecuteBatch{},
                  op::SetMaxRows{-1}, op::ExecuteQuery{"INSERT INTO t VALUES (1)"}});
  t.id = "";
  const auto v = validate(t);
  EXPECT_TRUE(has(v, "trace id is empty"));
  EXPECT_TRUE(has(v, "must begin with Connect"));
  EXPECT_TRUE(has(v, "op 0: ReadRow without a preceding ExecuteQuery"));
  EXPECT_TRUE(has(v, "op 2: more than one Connect"));
  EXPECT_TRUE(has(v, "op 3: CursorMove without a preceding ExecuteQuery"));
  EXPECT_TRUE(has(v, "op 4: ExecuteBatch without AddBatch"));
  EXPECT_TRUE(has(v, "op 7: ExecuteBatch without AddBatch"));
  EXPECT_FALSE(has(v, "op 6:"));
  EXPECT_TRUE(has(v, "op 8: SetMaxRows requires n >= 0"));
  EXPECT_TRUE(has(v, "op 9: ExecuteQuery requires a SELECT"));
  EXPECT_EQ(validate(make({})), std::vector<std::string>{"trace has no ops"});
}

TEST(Validate, PayloadDomains) {
  EXPECT_FALSE(validate(make({op::Connect{}, op::ExecuteUpdate{"SELECT 1"}})).empty());
  EXPECT_FALSE(validate(make({op::Connect{}, op::AddBatch{"NOT SQL"}})).empty());
  EXPECT_FALSE(validate(make({op::Connect{}, op::ExecuteQuery{"SELECT 1"}, op::CursorMove{CursorKind::Next, 3}})).empty());
  EXPECT_TRUE(validate(make({op::Connect{}, op::ExecuteQuery{"SELECT 1"}, op::CursorMove{CursorKind::Absolute, -3}})).empty());
  // A SELECT inside a batch is allowed: it is the non-DML marker.
  EXPECT_TRUE(validate(make({op::Connect{}, op::AddBatch{"SELECT 1"}, op::ExecuteBatch{}})).empty());
}

TEST(Serialize, Listing2RoundTrip) {
  const auto t = load_trace("witnesses/listing2.trace");
  EXPECT_EQ(t.property_assignment.bindings.at("allowMultiQueries"), "true");
  EXPECT_EQ(parse_trace(serialize(t)), t);
}

TEST(Serialize, CanonicalText) {
  Trace t = make({op::Connect{}, op::CreateStatement{ResultSetType::ScrollInsensitive, Holdability::CloseAtCommit},
                  op::SetMaxRows{3}, op::ExecuteQuery{"SELECT c0 FROM t0"}, op::CursorMove{CursorKind::Absolute, -1},
                  op::SetAutoCommit{false}});
  t.id = "canon";
  t.property_assignment.bindings = {{"b", "2"}, {"a", "1"}};
  t.provenance = PromptProvenance{"P3", 17};
  EXPECT_EQ(serialize(t),
            "conndiff-trace v1\n"
            "trace id=canon\n"
            "provenance prompt=P3 round=17\n"
            "property a=1\n"
            "property b=2\n"
            "op Connect\n"
            "op CreateStatement result_set_type=ScrollInsensitive holdability=CloseAtCommit\n"
            "op SetMaxRows n=3\n"
            "op ExecuteQuery sql=\"SELECT c0 FROM t0\"\n"
            "op CursorMove kind=Absolute n=-1\n"
            "op SetAutoCommit on=false\n");
}

TEST(Serialize, RefusesInvalidTrace) { EXPECT_THROW(serialize(make({op::ReadRow{}})), Error); }

TEST(Parse, EmptyDocument) {
  try {
    parse_trace("");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.reason(), "empty document");
  }
}

TEST(Parse, UnknownOpNamesTheOpIndex) {
  try {
    parse_trace("conndiff-trace v1\ntrace id=x\nop Connect\nop CreateStatement result_set_type=ForwardOnly "
                "holdability=HoldOverCommit\nop execQuery sql=\"SELECT 1\"\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.op_index(), 2);
    EXPECT_EQ(e.line(), 5);
    EXPECT_NE(std::string(e.what()).find("execQuery"), std::string::npos);
  }
}

TEST(Parse, RejectsUnknownFieldsAndBadPayloads) {
  const std::string head = "conndiff-trace v1\ntrace id=x\nop Connect\n";
  EXPECT_THROW(parse_trace(head + "op SetMaxRows n=1 extra=2\n"), ParseError);
  EXPECT_THROW(parse_trace(head + "op SetMaxRows n=abc\n"), ParseError);
  EXPECT_THROW(parse_trace(head + "op ExecuteQuery sql=\"SELECT 1\"\nop CursorMove kind=Absolute n=x\n"), ParseError);
  EXPECT_THROW(parse_trace(head + "op ExecuteQuery sql=\"SELECT 1\"\nop CursorMove kind=Sideways\n"), ParseError);
  EXPECT_THROW(parse_trace(head + "op CreateStatement result_set_type=Forward holdability=HoldOverCommit\n"), ParseError);
  EXPECT_THROW(parse_trace(head + "op SetAutoCommit on=maybe\n"), ParseError);
  EXPECT_THROW(parse_trace(head + "bogus record\n"), ParseError);
  EXPECT_THROW(parse_trace("conndiff-trace v1\nop Connect\n"), ParseError);
  EXPECT_THROW(parse_trace("not-a-trace v1\n"), ParseError);
}

TEST(Parse, AbsoluteDefaultsAreRejectedWithoutN) {
  EXPECT_THROW(parse_trace("conndiff-trace v1\ntrace id=x\nop Connect\nop ExecuteQuery sql=\"SELECT 1\"\n"
                           "op CursorMove kind=Absolute\n"),
               ParseError);
}

TEST(Properties, RoundTripOverStubCorpus) {
  const auto corpus = stub_corpus(10000);
  for (const auto& t : corpus) {
    const auto text = serialize(t);
    const auto back = parse_trace(text);
    ASSERT_EQ(back, t) << text;
    ASSERT_EQ(serialize(back), text);  // byte-stable
  }
}

TEST(Properties, ValidationSoundness) {
  // Valid traces never produce a StructuralError on the reference backend.
  const auto reference = make_reference();
  for (const auto& t : stub_corpus(3000)) {
    ASSERT_TRUE(is_valid(t));
    for (const auto& o : reference->execute(t).outcomes)
      ASSERT_FALSE(std::holds_alternative<outcome::StructuralError>(o.result)) << serialize(t);
  }
}
