#include "famclass/smali.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace famclass;

TEST(Smali, SingleInvoke) {
  std::string text = R"(.class public La/B;
.super Ljava/lang/Object;
.method public go()V
    invoke-virtual {p0, v0, v1, v2, v3}, Landroid/telephony/SmsManager;->sendTextMessage(Ljava/lang/String;)V
.end method
)";
  auto methods = parse_smali_text(text);
  ASSERT_EQ(methods.size(), 1u);
  EXPECT_EQ(methods[0].method_id, "La/B;->go()V");
  ASSERT_EQ(methods[0].invocations.size(), 1u);
  EXPECT_EQ(methods[0].invocations[0],
            "Landroid/telephony/SmsManager;->sendTextMessage(Ljava/lang/String;)V");
}

TEST(Smali, NoMethodsYieldsEmpty) {
  auto methods = parse_smali_dir(testutil::fixture("smali/forms"));
  // empty.smali contributes nothing.
  auto empty_only = parse_smali_text(testutil::slurp(testutil::fixture("smali/forms/empty.smali")));
  EXPECT_TRUE(empty_only.empty());
  EXPECT_FALSE(methods.empty());
}

// Hand-enumerated fixture: 2 files, 3 methods, 7 invokes total (one /range),
// in file-path order then textual order.
TEST(Smali, PairFixtureHandEnumeration) {
  auto methods = parse_smali_dir(testutil::fixture("smali/pair"));
  ASSERT_EQ(methods.size(), 3u);

  EXPECT_EQ(methods[0].method_id, "Lcom/fixture/A;-><init>()V");
  std::vector<ApiId> want0{
      "Ljava/lang/Object;-><init>()V",
      "Lcom/fixture/A;->helper(Ljava/lang/String;)V",
      "Landroid/telephony/SmsManager;->getDefault()Landroid/telephony/SmsManager;",
      "Ljava/lang/Runnable;->run()V",
  };
  EXPECT_EQ(methods[0].invocations, want0);

  EXPECT_EQ(methods[1].method_id, "Lcom/fixture/A;->helper(Ljava/lang/String;)V");
  std::vector<ApiId> want1{
      "Ljava/lang/Object;->toString()Ljava/lang/String;",
      "Ljava/lang/System;->currentTimeMillis()J",
  };
  EXPECT_EQ(methods[1].invocations, want1);

  EXPECT_EQ(methods[2].method_id, "Lcom/fixture/B;->send([Ljava/lang/String;)V");
  ASSERT_EQ(methods[2].invocations.size(), 1u);
  EXPECT_EQ(methods[2].invocations[0],
            "Landroid/telephony/SmsManager;->sendTextMessage(Ljava/lang/String;Ljava/lang/"
            "String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V");

  std::size_t total = 0;
  for (const auto& m : methods) total += m.invocations.size();
  EXPECT_EQ(total, 7u);
}

// All five invoke forms plus their /range variants are recognized;
// invoke-polymorphic and invoke-custom are not.
TEST(Smali, AllInvokeForms) {
  auto methods =
      parse_smali_text(testutil::slurp(testutil::fixture("smali/forms/all_forms.smali")));
  ASSERT_EQ(methods.size(), 1u);
  std::vector<ApiId> want{
      "Lx/T;->v0()V", "Lx/T;->s0()V", "Lx/T;->d0()V", "Lx/T;->t0()V", "Lx/T;->i0()V",
      "Lx/T;->v1()V", "Lx/T;->s1()V", "Lx/T;->d1()V", "Lx/T;->t1()V", "Lx/T;->i1()V",
  };
  EXPECT_EQ(methods[0].invocations, want);
}

TEST(Smali, TruncatedMethodKeepsParsedInvokes) {
  auto methods =
      parse_smali_text(testutil::slurp(testutil::fixture("smali/forms/truncated.smali")));
  ASSERT_EQ(methods.size(), 1u);
  std::vector<ApiId> want{"Lx/T;->one()V", "Lx/T;->two()V"};
  EXPECT_EQ(methods[0].invocations, want);
}

TEST(Smali, WeirdDescriptorsAndJunk) {
  auto methods = parse_smali_text(testutil::slurp(testutil::fixture("smali/forms/weird.smali")));
  ASSERT_EQ(methods.size(), 1u);
  EXPECT_EQ(methods[0].method_id, "Lcom/fixture/a$b;-><clinit>()V");
  std::vector<ApiId> want{
      "Lcom/fixture/a$b;-><init>()V",
      "Ljava/util/List;->toArray([Ljava/lang/Object;)[Ljava/lang/Object;",
  };
  EXPECT_EQ(methods[0].invocations, want);
}

TEST(Smali, EveryEmittedApiIdMatchesCanonicalGrammar) {
  for (const char* dir : {"smali/pair", "smali/forms"}) {
    for (const auto& m : parse_smali_dir(testutil::fixture(dir)))
      for (const ApiId& api : m.invocations) EXPECT_TRUE(is_canonical_api_id(api)) << api;
  }
}

TEST(Smali, CanonicalGrammarGate) {
  EXPECT_TRUE(is_canonical_api_id("La/b/C;->m()V"));
  EXPECT_TRUE(is_canonical_api_id("La/b/C$D;-><init>(I[Ljava/lang/String;)V"));
  EXPECT_FALSE(is_canonical_api_id("a/b/C;->m()V"));    // missing L
  EXPECT_FALSE(is_canonical_api_id("La/b/C;->m"));      // no descriptor
  EXPECT_FALSE(is_canonical_api_id("La/b/C;m()V"));     // no arrow
  EXPECT_FALSE(is_canonical_api_id("L;->m()V"));        // empty class
  EXPECT_FALSE(is_canonical_api_id("La b;->m()V"));     // space in class
  EXPECT_FALSE(is_canonical_api_id(""));
}

TEST(Smali, MissingDirIsEmpty) {
  EXPECT_TRUE(parse_smali_dir(testutil::fixture("smali/does_not_exist")).empty());
}
