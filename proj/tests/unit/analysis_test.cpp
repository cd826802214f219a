#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "gbt/analysis.hpp"
#include "gbt/errors.hpp"
#include "gbt/rng.hpp"

using namespace gbt;

namespace {

std::vector<double> shifted(std::vector<double> v, double c) {
  for (double& x : v) x += c;
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("anova matches the closed-form two-group oracle") {
  AnovaResult r = one_way_anova({{1.0, 2.0}, {3.0, 4.0}});
  CHECK_FALSE(r.degenerate);
  CHECK(r.df1 == 1);
  CHECK(r.df2 == 2);
  CHECK(r.F == doctest::Approx(8.0).epsilon(1e-12));
  // For F(1, 2) the tail is 1 - sqrt(f / (f + 2)).
  CHECK(r.p == doctest::Approx(0.10557280900008414).epsilon(1e-12));
}

TEST_CASE("f_tail matches closed forms for small denominators") {
  CHECK(f_tail(3.0, 2, 4) == doctest::Approx(0.16).epsilon(1e-12));
  CHECK(f_tail(4.0, 2, 2) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(f_tail(2.5, 1, 2) == doctest::Approx(0.2546440075000701).epsilon(1e-12));
  CHECK(f_tail(0.0, 3, 10) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("betainc endpoints and symmetry") {
  CHECK(betainc(2.0, 3.0, 0.0) == 0.0);
  CHECK(betainc(2.0, 3.0, 1.0) == 1.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    double a = 0.5 + 5.0 * rng.next_unit();
    double b = 0.5 + 5.0 * rng.next_unit();
    double x = rng.next_unit();
    CHECK(betainc(a, b, x) == doctest::Approx(1.0 - betainc(b, a, 1.0 - x)).epsilon(1e-11));
  }
}

TEST_CASE("anova is invariant to affine transformations") {
  std::vector<std::vector<double>> groups = {
      {71.2, 70.9, 71.5}, {69.8, 70.1, 70.4}, {72.0, 71.7, 72.3}};
  AnovaResult base = one_way_anova(groups);
  auto scaled = groups;
  for (auto& g : scaled)
    for (double& x : g) x = 3.5 * x - 120.0;
  AnovaResult tr = one_way_anova(scaled);
  CHECK(tr.F == doctest::Approx(base.F).epsilon(1e-9));
  CHECK(tr.p == doctest::Approx(base.p).epsilon(1e-9));
}

TEST_CASE("anova flags zero within-group variance as degenerate") {
  AnovaResult r = one_way_anova({{1.0, 1.0}, {2.0, 2.0}});
  CHECK(r.degenerate);
  CHECK(std::isinf(r.F));
  CHECK(r.p == 0.0);

  AnovaResult flat = one_way_anova({{3.0, 3.0}, {3.0, 3.0}});
  CHECK(flat.degenerate);
  CHECK(flat.F == 0.0);
}

TEST_CASE("anova input validation") {
  CHECK_THROWS_AS(one_way_anova({{1.0, 2.0}}), BadArgument);
  CHECK_THROWS_AS(one_way_anova({{1.0}, {2.0, 3.0}}), BadArgument);
  CHECK_THROWS_AS(one_way_anova({{1.0, NAN}, {2.0, 3.0}}), BadArgument);
}

TEST_CASE("exact permutation p-values match hand enumeration") {
  PermResult r = exact_perm_test({1.0, 2.0}, {3.0, 4.0});
  CHECK(r.exact);
  CHECK(r.total == 6);
  CHECK(r.extreme == 2);
  CHECK(r.p == doctest::Approx(2.0 / 6.0).epsilon(1e-15));

  PermResult s = exact_perm_test({1, 2, 3, 4, 5}, {6, 7, 8, 9, 10});
  CHECK(s.total == 252);
  CHECK(s.p == doctest::Approx(2.0 / 252.0).epsilon(1e-15));

  PermResult t = exact_perm_test({1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
                                 {11, 12, 13, 14, 15, 16, 17, 18, 19, 20});
  CHECK(t.total == 184756);
  CHECK(t.p == doctest::Approx(2.0 / 184756.0).epsilon(1e-15));
}

TEST_CASE("identical groups give p equal to one") {
  PermResult r = exact_perm_test({5.0, 5.0, 5.0}, {5.0, 5.0, 5.0});
  CHECK(r.p == 1.0);
}

TEST_CASE("the permutation test is symmetric in its arguments") {
  std::vector<double> a = {0.3, 1.7, 2.2, 0.9};
  std::vector<double> b = {2.8, 3.1, 1.9};
  CHECK(exact_perm_test(a, b).p == exact_perm_test(b, a).p);
}

TEST_CASE("the permutation test is shift invariant") {
  std::vector<double> a = {0.3, 1.7, 2.2, 0.9};
  std::vector<double> b = {2.8, 3.1, 1.9};
  double base = exact_perm_test(a, b).p;
  CHECK(exact_perm_test(shifted(a, 41.0), shifted(b, 41.0)).p == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("widening the separation never raises the p-value") {
  std::vector<double> a = {1.0, 1.2, 0.8, 1.1};
  double last = 1.1;
  for (double gap : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    std::vector<double> b = shifted(a, gap);
    double p = exact_perm_test(a, b).p;
    CHECK(p <= last + 1e-15);
    last = p;
  }
}

TEST_CASE("group sizes above the enumeration cap are refused") {
  std::vector<double> a(14), b(14);
  for (int i = 0; i < 14; ++i) {
    a[i] = i;
    b[i] = i + 20;
  }
  CHECK_THROWS_AS(exact_perm_test(a, b), TooLargeForExact);
}

TEST_CASE("permutation tests reject empty groups and non-finite scores") {
  CHECK_THROWS_AS(exact_perm_test({}, {2.0, 3.0}), BadArgument);
  CHECK_THROWS_AS(exact_perm_test({1.0, NAN}, {2.0, 3.0}), BadArgument);
}

TEST_CASE("monte carlo agrees with exact enumeration within noise") {
  std::vector<double> a = {1.0, 2.0, 3.0, 4.0, 2.5};
  std::vector<double> b = {3.5, 4.5, 5.0, 4.2, 6.0};
  double exact = exact_perm_test(a, b).p;
  PermResult mc = mc_perm_test(a, b, 60000, 5);
  CHECK_FALSE(mc.exact);
  // Standard error is about sqrt(p(1-p)/n) ~ 0.0009 here; allow 5 sigma.
  CHECK(mc.p == doctest::Approx(exact).epsilon(0.15));
  PermResult again = mc_perm_test(a, b, 60000, 5);
  CHECK(mc.p == again.p);
}

TEST_CASE("score tables parse, round-trip and validate") {
  const char* csv =
      "model,run,score\n"
      "vilbert,1,70.5\n"
      "vilbert,2,71.0\n"
      "lxmert,1,69.1\n"
      "lxmert,2,69.9\n";
  std::istringstream in(csv);
  ScoreTable t = parse_score_table(in, "inline");
  CHECK(t.n_models() == 2);
  CHECK(t.scores[t.find("vilbert")].size() == 2);
  CHECK(t.scores[t.find("lxmert")][1] == 69.9);
}

TEST_CASE("score table parse errors carry the offending line") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_score_table(in, "bad.csv");
  };
  CHECK_THROWS_WITH_AS(parse("model;run;score\n"), doctest::Contains("bad.csv:1"), ParseError);
  CHECK_THROWS_WITH_AS(parse("model,run,score\nvilbert,1,seventy\n"), doctest::Contains("bad.csv:2"),
                       ParseError);
  CHECK_THROWS_WITH_AS(parse("model,run,score\nvilbert,one,70\n"), doctest::Contains("bad.csv:2"),
                       ParseError);
  CHECK_THROWS_AS(read_score_table("analysis_test_missing.csv"), IoError);
}

TEST_CASE("summarize reports per-model moments") {
  const char* csv =
      "model,run,score\n"
      "a,1,10\n"
      "a,2,14\n"
      "b,1,20\n";
  std::istringstream in(csv);
  ScoreTable t = parse_score_table(in, "inline");
  std::vector<GroupSummary> s = summarize(t);
  REQUIRE(s.size() == 2);
  CHECK(s[0].model == "a");
  CHECK(s[0].runs == 2);
  CHECK(s[0].mean == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(s[0].sd == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  CHECK(s[0].min == 10.0);
  CHECK(s[0].max == 14.0);
  CHECK(s[1].runs == 1);
  CHECK(s[1].sd == 0.0);
}

TEST_CASE("compare_models applies the family-wise correction") {
  ScoreTable t;
  t.add("a") = {1.0, 1.1, 0.9};
  t.add("b") = {1.05, 1.15, 0.95};
  t.add("c") = {9.0, 9.1, 8.9};
  Comparison cmp = compare_models(t, 0.05, {});
  CHECK(cmp.n_pairs == 3);
  CHECK(cmp.per_pair_alpha == doctest::Approx(0.05 / 3.0).epsilon(1e-15));
  for (const auto& row : cmp.mc)
    for (char used : row) CHECK(used == 0);

  int ia = 0, ib = 1, ic = 2;
  CHECK(cmp.p[ia][ia] == 1.0);
  CHECK(cmp.p[ia][ib] == cmp.p[ib][ia]);
  // a and b overlap heavily; both differ from c as much as 3+3 data can.
  CHECK(cmp.significant[ia][ib] == 0);
  const double min_p = 2.0 / 20.0;  // best attainable with 3 vs 3
  CHECK(cmp.p[ia][ic] == doctest::Approx(min_p).epsilon(1e-12));
  // 0.1 > 0.05/3, so even the extreme pair stays non-significant.
  CHECK(cmp.significant[ia][ic] == 0);

  Comparison loose = compare_models(t, 0.5, {});
  CHECK(loose.significant[ia][ic] == 1);
  CHECK(loose.significant[ia][ib] == 0);
}

TEST_CASE("compare_models falls back to monte carlo only when allowed") {
  ScoreTable t;
  std::vector<double> a(14), b(14);
  for (int i = 0; i < 14; ++i) {
    a[i] = i;
    b[i] = i + 0.5;
  }
  t.add("a") = a;
  t.add("b") = b;
  CHECK_THROWS_AS(compare_models(t, 0.05, {}), TooLargeForExact);

  CompareOptions opt;
  opt.allow_mc = true;
  opt.mc_draws = 2000;
  opt.seed = 3;
  Comparison cmp = compare_models(t, 0.05, opt);
  CHECK(cmp.mc[0][1] == 1);
  CHECK(cmp.p[0][1] > 0.0);
  CHECK(cmp.p[0][1] <= 1.0);
}

TEST_CASE("compare_models validates its inputs") {
  ScoreTable t;
  t.add("a") = {1.0, 2.0};
  Comparison solo = compare_models(t, 0.05, {});
  CHECK(solo.models.size() == 1);
  CHECK(solo.significant[0][0] == 0);
  t.add("b") = {1.5};
  CHECK_THROWS_AS(compare_models(t, 0.05, {}), BadArgument);  // single run
  ScoreTable ok;
  ok.add("a") = {1.0, 2.0};
  ok.add("b") = {1.5, 2.5};
  CHECK_THROWS_AS(compare_models(ok, 0.0, {}), BadArgument);
  CHECK_THROWS_AS(compare_models(ok, 1.0, {}), BadArgument);
}

TEST_SUITE_END();
