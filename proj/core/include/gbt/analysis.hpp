#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gbt/errors.hpp"

namespace gbt {

struct AnovaResult {
  double F = 0.0;
  double p = 1.0;
  bool degenerate = false;  // within-group variance exactly zero
  int df1 = 0;
  int df2 = 0;
};

// Classical between/within decomposition; p from the F distribution with
// (k-1, N-k) degrees of freedom. Zero within-group variance does not divide:
// the result is flagged degenerate with p = 0 (F is +inf when the group means
// differ, 0 when every observation is identical).
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction,
// exposed for the oracle tests.
double betainc(double a, double b, double x);

// P(F_{df1, df2} > f), upper tail.
double f_tail(double f, int df1, int df2);

struct PermResult {
  double p = 1.0;
  bool exact = true;
  uint64_t extreme = 0;  // relabelings at least as extreme as observed
  uint64_t total = 0;    // relabelings considered
};

// Enumeration cap: C(26, 13) partitions is the largest full enumeration run.
inline constexpr int kMaxExactPerm = 26;

// Two-sided exact permutation test on the difference of means: enumerates all
// C(|a|+|b|, |a|) relabelings and counts those whose |mean difference|
// reaches the observed one (ties count as extreme). Throws TooLargeForExact
// when |a|+|b| > kMaxExactPerm.
PermResult exact_perm_test(const std::vector<double>& a, const std::vector<double>& b);

// Flagged non-exact fallback for groups above the enumeration cap: samples
// `draws` random relabelings and reports (1 + extreme) / (1 + draws).
PermResult mc_perm_test(const std::vector<double>& a, const std::vector<double>& b, uint64_t draws, uint64_t seed);

struct ScoreTable {
  std::vector<std::string> models;            // first-appearance order
  std::vector<std::vector<double>> scores;    // aligned with models

  int find(const std::string& name) const;    // -1 when absent
  std::vector<double>& add(const std::string& name);
  int n_models() const { return static_cast<int>(models.size()); }
};

// CSV with the exact header `model,run,score`; rows group by first
// appearance. The run column must parse as an integer and the score as a
// finite real. Throws ParseError with the offending line number.
ScoreTable read_score_table(const std::string& path);
ScoreTable parse_score_table(std::istream& in, const std::string& origin);

struct Comparison {
  std::vector<std::string> models;
  std::vector<std::vector<double>> p;        // symmetric, diagonal 1
  std::vector<std::vector<char>> significant;  // symmetric, diagonal false
  std::vector<std::vector<char>> mc;         // pair used the Monte Carlo fallback
  double per_pair_alpha = 0.0;               // alpha / n_pairs
  int n_pairs = 0;
};

struct CompareOptions {
  bool allow_mc = false;       // above-cap pairs throw unless enabled
  uint64_t mc_draws = 100000;
  uint64_t seed = 0;
};

// Pairwise permutation tests with Bonferroni correction: pair (i, j) is
// significant iff its p-value is strictly below alpha / n_pairs, n_pairs the
// number of unordered pairs actually tested. Requires >= 2 runs per model and
// alpha in (0, 1).
Comparison compare_models(const ScoreTable& table, double alpha, const CompareOptions& opt = {});

struct GroupSummary {
  std::string model;
  int runs = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd; 0 for a single run
};

std::vector<GroupSummary> summarize(const ScoreTable& table);

}  // namespace gbt
