#include "gbt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

#include "gbt/rng.hpp"

namespace gbt {

namespace {

double betacf(double a, double b, double x) {
  constexpr double eps = 1e-15;
  constexpr double fpmin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  return h;  // converged to working precision long before 300 terms in practice
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double betainc(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw BadArgument("betainc needs positive shape parameters");
  if (!(x >= 0.0) || !(x <= 1.0)) throw BadArgument("betainc argument outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                                b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double f_tail(double f, int df1, int df2) {
  if (df1 < 1 || df2 < 1) throw BadArgument("degrees of freedom must be >= 1");
  if (!(f >= 0.0)) throw BadArgument("F statistic must be >= 0");
  const double d1 = df1, d2 = df2;
  // P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2), the numerically stable tail
  return betainc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw BadArgument("ANOVA needs at least two groups");
  int n_total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw BadArgument("every ANOVA group needs at least two observations");
    for (double x : g)
      if (!std::isfinite(x)) throw BadArgument("scores must be finite");
    n_total += static_cast<int>(g.size());
  }

  double grand = 0.0;
  for (const auto& g : groups)
    for (double x : g) grand += x;
  grand /= n_total;

  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ssw += (x - m) * (x - m);
  }

  AnovaResult r;
  r.df1 = k - 1;
  r.df2 = n_total - k;
  if (ssw == 0.0) {
    r.degenerate = true;
    r.p = 0.0;
    r.F = ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return r;
  }
  r.F = (ssb / r.df1) / (ssw / r.df2);
  r.p = f_tail(r.F, r.df1, r.df2);
  return r;
}

namespace {

struct PermScan {
  const std::vector<double>& pool;
  int n_a, n_b;
  double threshold;  // observed |mean diff| minus the tie slack
  double total_sum;
  uint64_t extreme = 0;
  uint64_t total = 0;

  // Walks every size-n_a subset with a running sum; remaining slots always
  // fit in the suffix, so each leaf is one relabeling.
  void run(size_t idx, int remaining, double sum) {
    if (remaining == 0) {
      ++total;
      const double diff = sum / n_a - (total_sum - sum) / n_b;
      if (std::fabs(diff) >= threshold) ++extreme;
      return;
    }
    if (pool.size() - idx < static_cast<size_t>(remaining)) return;
    run(idx + 1, remaining - 1, sum + pool[idx]);
    run(idx + 1, remaining, sum);
  }
};

double observed_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw BadArgument("permutation test groups must be non-empty");
  for (double x : a)
    if (!std::isfinite(x)) throw BadArgument("scores must be finite");
  for (double x : b)
    if (!std::isfinite(x)) throw BadArgument("scores must be finite");
  return std::fabs(mean_of(a) - mean_of(b));
}

double tie_threshold(double obs) { return obs - 1e-12 * std::max(1.0, obs); }

}  // namespace

PermResult exact_perm_test(const std::vector<double>& a, const std::vector<double>& b) {
  const double obs = observed_abs_diff(a, b);
  const int n = static_cast<int>(a.size() + b.size());
  if (n > kMaxExactPerm)
    throw TooLargeForExact(std::to_string(n) + " observations exceed the enumeration cap of " +
                           std::to_string(kMaxExactPerm));
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  double total_sum = 0.0;
  for (double x : pool) total_sum += x;

  PermScan scan{pool, static_cast<int>(a.size()), static_cast<int>(b.size()), tie_threshold(obs), total_sum};
  scan.run(0, scan.n_a, 0.0);

  PermResult r;
  r.extreme = scan.extreme;
  r.total = scan.total;
  r.p = static_cast<double>(scan.extreme) / static_cast<double>(scan.total);
  r.exact = true;
  return r;
}

PermResult mc_perm_test(const std::vector<double>& a, const std::vector<double>& b, uint64_t draws, uint64_t seed) {
  const double obs = observed_abs_diff(a, b);
  if (draws == 0) throw BadArgument("need at least one Monte Carlo draw");
  std::vector<double> pool = a;
  pool.insert(pool.end(), b.begin(), b.end());
  const int n = static_cast<int>(pool.size());
  const int n_a = static_cast<int>(a.size());
  const double threshold = tie_threshold(obs);

  Rng rng = Rng(seed).substream("perm-mc");
  uint64_t extreme = 0;
  std::vector<double> shuffled = pool;
  for (uint64_t d = 0; d < draws; ++d) {
    for (int i = n - 1; i > 0; --i)
      std::swap(shuffled[static_cast<size_t>(i)], shuffled[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);
    double sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < n_a; ++i) sum_a += shuffled[static_cast<size_t>(i)];
    for (int i = n_a; i < n; ++i) sum_b += shuffled[static_cast<size_t>(i)];
    const double diff = sum_a / n_a - sum_b / static_cast<double>(n - n_a);
    if (std::fabs(diff) >= threshold) ++extreme;
  }

  PermResult r;
  r.extreme = extreme;
  r.total = draws;
  r.p = static_cast<double>(1 + extreme) / static_cast<double>(1 + draws);
  r.exact = false;
  return r;
}

int ScoreTable::find(const std::string& name) const {
  for (size_t i = 0; i < models.size(); ++i)
    if (models[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<double>& ScoreTable::add(const std::string& name) {
  int i = find(name);
  if (i < 0) {
    models.push_back(name);
    scores.emplace_back();
    i = static_cast<int>(models.size()) - 1;
  }
  return scores[static_cast<size_t>(i)];
}

ScoreTable parse_score_table(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(origin + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "model,run,score") throw ParseError(origin + ":1: expected header model,run,score");

  ScoreTable table;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = origin + ":" + std::to_string(lineno);
    const size_t c1 = line.find(',');
    const size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw ParseError(where + ": expected exactly three fields");
    const std::string model = line.substr(0, c1);
    const std::string run = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string score = line.substr(c2 + 1);
    if (model.empty()) throw ParseError(where + ": empty model name");
    try {
      size_t used = 0;
      (void)std::stoll(run, &used);
      if (used != run.size()) throw std::invalid_argument(run);
    } catch (const std::exception&) {
      throw ParseError(where + ": run is not an integer: " + run);
    }
    double value = 0.0;
    try {
      size_t used = 0;
      value = std::stod(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception&) {
      throw ParseError(where + ": score is not a number: " + score);
    }
    if (!std::isfinite(value)) throw ParseError(where + ": score must be finite");
    table.add(model).push_back(value);
  }
  return table;
}

ScoreTable read_score_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return parse_score_table(in, path);
}

Comparison compare_models(const ScoreTable& table, double alpha, const CompareOptions& opt) {
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw BadArgument("alpha must be in (0, 1)");
  const int k = table.n_models();
  if (k < 1) throw BadArgument("empty score table");
  for (int i = 0; i < k; ++i)
    if (table.scores[static_cast<size_t>(i)].size() < 2)
      throw BadArgument("model " + table.models[static_cast<size_t>(i)] + " has fewer than two runs");

  Comparison cmp;
  cmp.models = table.models;
  cmp.n_pairs = k * (k - 1) / 2;
  cmp.per_pair_alpha = cmp.n_pairs > 0 ? alpha / cmp.n_pairs : alpha;
  cmp.p.assign(static_cast<size_t>(k), std::vector<double>(static_cast<size_t>(k), 1.0));
  cmp.significant.assign(static_cast<size_t>(k), std::vector<char>(static_cast<size_t>(k), 0));
  cmp.mc.assign(static_cast<size_t>(k), std::vector<char>(static_cast<size_t>(k), 0));

  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      const auto& a = table.scores[static_cast<size_t>(i)];
      const auto& b = table.scores[static_cast<size_t>(j)];
      PermResult r;
      if (static_cast<int>(a.size() + b.size()) <= kMaxExactPerm) {
        r = exact_perm_test(a, b);
      } else if (opt.allow_mc) {
        // one substream per unordered pair keeps the matrix reproducible
        r = mc_perm_test(a, b, opt.mc_draws, Rng(opt.seed).substream("pair", static_cast<uint64_t>(i) * static_cast<uint64_t>(k) + static_cast<uint64_t>(j)).next_u64());
      } else {
        r = exact_perm_test(a, b);  // throws TooLargeForExact
      }
      cmp.p[static_cast<size_t>(i)][static_cast<size_t>(j)] = r.p;
      cmp.p[static_cast<size_t>(j)][static_cast<size_t>(i)] = r.p;
      const char sig = r.p < cmp.per_pair_alpha ? 1 : 0;
      cmp.significant[static_cast<size_t>(i)][static_cast<size_t>(j)] = sig;
      cmp.significant[static_cast<size_t>(j)][static_cast<size_t>(i)] = sig;
      const char used_mc = r.exact ? 0 : 1;
      cmp.mc[static_cast<size_t>(i)][static_cast<size_t>(j)] = used_mc;
      cmp.mc[static_cast<size_t>(j)][static_cast<size_t>(i)] = used_mc;
    }
  }
  return cmp;
}

std::vector<GroupSummary> summarize(const ScoreTable& table) {
  std::vector<GroupSummary> out;
  out.reserve(table.models.size());
  for (size_t i = 0; i < table.models.size(); ++i) {
    const auto& s = table.scores[i];
    if (s.empty()) throw BadArgument("model " + table.models[i] + " has no runs");
    GroupSummary g;
    g.model = table.models[i];
    g.runs = static_cast<int>(s.size());
    g.min = *std::min_element(s.begin(), s.end());
    g.max = *std::max_element(s.begin(), s.end());
    g.mean = mean_of(s);
    if (s.size() > 1) {
      double ss = 0.0;
      for (double x : s) ss += (x - g.mean) * (x - g.mean);
      g.sd = std::sqrt(ss / (static_cast<double>(s.size()) - 1.0));
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gbt
