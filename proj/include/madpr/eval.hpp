/*
 * Copyright (c) 2026, the madpr authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "madpr/ranking.hpp"
#include "madpr/rng.hpp"

namespace madpr {

// ---------------------------------------------------------------------------
// Qrels: TREC format "qid iter docid rel", whitespace separated.
// ---------------------------------------------------------------------------

struct Qrels {
  // ordered by qid for reproducible iteration
  std::map<std::string, std::unordered_map<std::string, int>> judgments;

  bool has_query(const std::string& qid) const {
    return judgments.count(qid) > 0;
  }
  const std::unordered_map<std::string, int>& for_query(
      const std::string& qid) const {
    return judgments.at(qid);
  }
  size_t relevant_count(const std::string& qid) const {
    size_t r = 0;
    for (const auto& [pid, grade] : judgments.at(qid))
      if (grade >= 1) ++r;
    return r;
  }
};

inline Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open qrels: " + path);
  Qrels q;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::string qid, iter, docid;
    long long grade;
    if (!(ss >> qid >> iter >> docid >> grade))
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed qrels line");
    if (grade < 0)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": negative relevance grade");
    q.judgments[qid][docid] = static_cast<int>(grade);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Rank metrics. Relevance binarizes at grade >= 1 for recall and mAP; nDCG
// uses graded gains. All three read only the ordering of a ranked list, so
// any strictly increasing transform of the distances leaves them unchanged.
// ---------------------------------------------------------------------------

using QrelsForQuery = std::unordered_map<std::string, int>;

inline int grade_of(const QrelsForQuery& q, const std::string& pid) {
  auto it = q.find(pid);
  return it == q.end() ? 0 : it->second;
}

/// |relevant in top-k| / |relevant|; 0 when the query has no relevant passage
/// (such queries are excluded from averages upstream).
inline double recall_at_k(const RankedList& r, const QrelsForQuery& q, size_t k) {
  if (k < 1) throw ValidationError("recall_at_k requires k >= 1");
  size_t relevant = 0;
  for (const auto& [pid, grade] : q)
    if (grade >= 1) ++relevant;
  if (relevant == 0) return 0.0;
  size_t hit = 0;
  for (size_t i = 0; i < r.entries.size() && i < k; ++i)
    if (grade_of(q, r.entries[i].id) >= 1) ++hit;
  return static_cast<double>(hit) / static_cast<double>(relevant);
}

/// (1 / min(R, k)) * sum of Precision@i over relevant ranks i <= k,
/// the trec_eval-style cutoff MAP.
inline double map_at_k(const RankedList& r, const QrelsForQuery& q, size_t k) {
  if (k < 1) throw ValidationError("map_at_k requires k >= 1");
  size_t relevant = 0;
  for (const auto& [pid, grade] : q)
    if (grade >= 1) ++relevant;
  if (relevant == 0) return 0.0;
  double sum = 0.0;
  size_t hit = 0;
  for (size_t i = 0; i < r.entries.size() && i < k; ++i) {
    if (grade_of(q, r.entries[i].id) >= 1) {
      ++hit;
      sum += static_cast<double>(hit) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(std::min(relevant, k));
}

enum class NdcgGain { Exponential, Linear };

/// DCG@k / IDCG@k with discount 1/log2(rank+1); gains 2^grade - 1 by
/// default, or the raw grade in linear mode.
inline double ndcg_at_k(const RankedList& r, const QrelsForQuery& q, size_t k,
                        NdcgGain gain = NdcgGain::Exponential) {
  if (k < 1) throw ValidationError("ndcg_at_k requires k >= 1");
  auto gain_of = [&](int grade) {
    return gain == NdcgGain::Exponential
               ? std::pow(2.0, static_cast<double>(grade)) - 1.0
               : static_cast<double>(grade);
  };
  double dcg = 0.0;
  for (size_t i = 0; i < r.entries.size() && i < k; ++i)
    dcg += gain_of(grade_of(q, r.entries[i].id)) /
           std::log2(static_cast<double>(i + 2));
  std::vector<int> grades;
  grades.reserve(q.size());
  for (const auto& [pid, grade] : q) grades.push_back(grade);
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (size_t i = 0; i < grades.size() && i < k; ++i)
    idcg += gain_of(grades[i]) / std::log2(static_cast<double>(i + 2));
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

// ---------------------------------------------------------------------------
// Paired two-sided t-test; p-value via the regularized incomplete beta.
// ---------------------------------------------------------------------------

namespace detail {

inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero variance of the paired differences
};

/// Two-sided paired t-test. Zero-variance differences are flagged: p = 1
/// when all differences are zero, p = 0 (t = +-inf) for a constant nonzero
/// shift.
inline TTestResult paired_t_test(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("paired_t_test requires equal-length samples");
  size_t n = a.size();
  if (n < 2) throw ValidationError("paired_t_test requires n >= 2");
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);
  TTestResult res;
  if (var == 0.0) {
    res.degenerate = true;
    if (mean == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = mean > 0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  res.t = mean / std::sqrt(var / static_cast<double>(n));
  double nu = static_cast<double>(n - 1);
  res.p = detail::incomplete_beta(nu / 2.0, 0.5, nu / (nu + res.t * res.t));
  return res;
}

// ---------------------------------------------------------------------------
// Spearman rank correlation with average-rank ties; +inf values are valid
// inputs and tie among themselves at the end of the ranking.
// ---------------------------------------------------------------------------

inline std::vector<double> average_ranks(std::span<const double> v) {
  size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return v[x] < v[y];
  });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2)
    throw ValidationError("spearman requires equal-length samples, n >= 2");
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  size_t n = ra.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------
// Corpus-level metric report
// ---------------------------------------------------------------------------

struct MetricReport {
  struct Row {
    std::string metric;
    size_t cutoff;
    double mean = 0.0;
    std::vector<std::pair<std::string, double>> per_query;  // (qid, value)
  };
  std::vector<Row> rows;
  size_t evaluated = 0;
  size_t skipped = 0;  // no judgments, no positive grades, or absent from run
  std::vector<std::string> skipped_qids;

  const Row& row(const std::string& metric, size_t cutoff) const {
    for (const auto& r : rows)
      if (r.metric == metric && r.cutoff == cutoff) return r;
    throw ValidationError("no report row for " + metric + "@" +
                          std::to_string(cutoff));
  }
};

inline MetricReport evaluate_run(const std::vector<RankedList>& runs,
                                 const Qrels& qrels,
                                 const std::vector<size_t>& cutoffs,
                                 NdcgGain gain = NdcgGain::Exponential) {
  MetricReport rep;
  for (size_t c : cutoffs) {
    rep.rows.push_back({"recall", c, 0.0, {}});
    rep.rows.push_back({"map", c, 0.0, {}});
    rep.rows.push_back({"ndcg", c, 0.0, {}});
  }
  std::set<std::string> run_qids;
  for (const auto& r : runs) run_qids.insert(r.query_id);
  for (const auto& [qid, judged] : qrels.judgments) {
    if (!run_qids.count(qid)) {
      rep.skipped++;
      rep.skipped_qids.push_back(qid);
    }
  }
  for (const auto& r : runs) {
    if (!qrels.has_query(r.query_id) ||
        qrels.relevant_count(r.query_id) == 0) {
      rep.skipped++;
      rep.skipped_qids.push_back(r.query_id);
      continue;
    }
    const auto& judged = qrels.for_query(r.query_id);
    rep.evaluated++;
    size_t row_i = 0;
    for (size_t c : cutoffs) {
      rep.rows[row_i++].per_query.emplace_back(r.query_id,
                                               recall_at_k(r, judged, c));
      rep.rows[row_i++].per_query.emplace_back(r.query_id,
                                               map_at_k(r, judged, c));
      rep.rows[row_i++].per_query.emplace_back(r.query_id,
                                               ndcg_at_k(r, judged, c, gain));
    }
  }
  for (auto& row : rep.rows) {
    double sum = 0.0;
    for (auto& [qid, v] : row.per_query) sum += v;
    row.mean = row.per_query.empty()
                   ? 0.0
                   : sum / static_cast<double>(row.per_query.size());
  }
  return rep;
}

inline void write_report_csv(std::ostream& os, const MetricReport& rep) {
  os << "metric,cutoff,mean,evaluated,skipped\n";
  char buf[48];
  for (const auto& row : rep.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.mean);
    os << row.metric << ',' << row.cutoff << ',' << buf << ',' << rep.evaluated
       << ',' << rep.skipped << '\n';
  }
}

inline void write_per_query_csv(std::ostream& os, const MetricReport& rep) {
  os << "qid,metric,cutoff,value\n";
  char buf[48];
  for (const auto& row : rep.rows)
    for (const auto& [qid, v] : row.per_query) {
      std::snprintf(buf, sizeof(buf), "%.6f", v);
      os << qid << ',' << row.metric << ',' << row.cutoff << ',' << buf << '\n';
    }
}

inline std::string format_report_table(const MetricReport& rep) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "metric" << std::setw(8) << "cutoff"
     << std::setw(12) << "mean" << "\n";
  os << std::string(30, '-') << "\n";
  for (const auto& row : rep.rows) {
    os << std::left << std::setw(10) << row.metric << std::setw(8) << row.cutoff
       << std::fixed << std::setprecision(4) << row.mean << "\n";
  }
  os << "queries evaluated: " << rep.evaluated << ", skipped: " << rep.skipped
     << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Distance-scatter diagnostics: one row per judged (query, passage) pair plus
// a seeded sample of unjudged pairs, with flat euclidean and manifold
// distances side by side.
// ---------------------------------------------------------------------------

struct DiagRow {
  std::string qid;
  std::string pid;
  int relevant = 0;
  double d_euclidean = 0.0;
  double d_manifold = 0.0;
  int64_t hops = -1;
};

inline std::vector<DiagRow> distance_diagnostics(
    const ManifoldGraph& g, const EmbeddingMatrix& base,
    const SpectralEmbedding* spectral, const EmbeddingMatrix& queries,
    const Qrels& qrels, size_t k,
    QueryEdgeCost mode = QueryEdgeCost::Distance, size_t unjudged_sample = 0,
    uint64_t seed = 7) {
  std::unordered_map<std::string, uint32_t> pid_to_row;
  for (size_t i = 0; i < base.n_rows(); ++i)
    pid_to_row.emplace(base.id(i), static_cast<uint32_t>(i));
  std::unordered_map<std::string, uint32_t> qid_to_row;
  for (size_t i = 0; i < queries.n_rows(); ++i)
    qid_to_row.emplace(queries.id(i), static_cast<uint32_t>(i));

  std::vector<DiagRow> rows;
  size_t query_ordinal = 0;
  for (const auto& [qid, judged] : qrels.judgments) {
    auto qit = qid_to_row.find(qid);
    if (qit == qid_to_row.end()) continue;
    ++query_ordinal;
    auto att = attach_query(g, base, spectral, queries.row_span(qit->second),
                            k, mode);
    RankedList full = manifold_rank(g, att, 0);
    std::vector<double> d_man(base.n_rows(),
                              std::numeric_limits<double>::infinity());
    std::vector<int64_t> hops(base.n_rows(), -1);
    for (const auto& e : full.entries) {
      d_man[e.index] = e.distance;
      hops[e.index] = e.hops;
    }
    std::vector<std::string> pids;
    pids.reserve(judged.size());
    for (const auto& [pid, grade] : judged) pids.push_back(pid);
    std::sort(pids.begin(), pids.end());
    std::set<uint32_t> judged_rows;
    for (const auto& pid : pids) {
      auto pit = pid_to_row.find(pid);
      if (pit == pid_to_row.end()) {
        log_warn("qrels passage \"" + pid + "\" not in the corpus; skipped");
        continue;
      }
      uint32_t row = pit->second;
      judged_rows.insert(row);
      rows.push_back({qid, pid, judged.at(pid) >= 1 ? 1 : 0,
                      std::sqrt(att.query_sqeuclidean[row]), d_man[row],
                      hops[row]});
    }
    if (unjudged_sample > 0 && base.n_rows() > judged_rows.size()) {
      CounterRng rng(seed, 100 + query_ordinal);
      size_t want =
          std::min(unjudged_sample, base.n_rows() - judged_rows.size());
      std::set<uint32_t> sampled;
      uint64_t counter = 0;
      while (sampled.size() < want) {
        auto idx = static_cast<uint32_t>(rng.word(counter++) % base.n_rows());
        if (judged_rows.count(idx) || sampled.count(idx)) continue;
        sampled.insert(idx);
      }
      for (uint32_t row : sampled)
        rows.push_back({qid, base.id(row), 0,
                        std::sqrt(att.query_sqeuclidean[row]), d_man[row],
                        hops[row]});
    }
  }
  return rows;
}

inline void write_diagnostics_csv(std::ostream& os,
                                  const std::vector<DiagRow>& rows) {
  os << "qid,pid,relevant,d_euclidean,d_manifold,hops\n";
  char e[48], m[48];
  for (const auto& r : rows) {
    std::snprintf(e, sizeof(e), "%.9g", r.d_euclidean);
    if (std::isinf(r.d_manifold))
      std::snprintf(m, sizeof(m), "inf");
    else
      std::snprintf(m, sizeof(m), "%.9g", r.d_manifold);
    os << r.qid << ',' << r.pid << ',' << r.relevant << ',' << e << ',' << m
       << ',';
    if (r.hops >= 0) os << r.hops;
    os << '\n';
  }
}

}  // namespace madpr
