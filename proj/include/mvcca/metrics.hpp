#pragma once

// Retrieval metrics over ground-truth ranks and the Otsu equivalence-class
// analysis of per-question candidate correlations.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mvcca {

inline constexpr std::size_t kDefaultOtsuBins = 256;

double mean_rank(const std::vector<std::size_t>& ranks);
double mrr(const std::vector<std::size_t>& ranks);
double recall_at(const std::vector<std::size_t>& ranks, std::size_t k);

struct NdcgResult {
  double value = 0.0;
  std::size_t questions_used = 0;
  std::size_t questions_skipped = 0;  // no positive relevance
};

/// Mean NDCG over questions. Each entry lists candidate relevances in
/// predicted order; the cutoff K is the count of positive relevances.
/// Throws EmptyInput when every question is skipped.
NdcgResult ndcg(const std::vector<std::vector<double>>& ranked_relevances);

/// NDCG of one predicted ordering; nullopt when no relevance is positive.
std::optional<double> ndcg_single(const std::vector<double>& ranked_relevance);

/// Histogram-based Otsu threshold over [min, max] with equal-width bins.
/// The result is the interior bin edge maximizing w0 w1 (mu0 - mu1)^2, the
/// lowest on ties. Throws DegenerateInput for < 2 values or all equal.
double otsu_threshold(const std::vector<double>& values, std::size_t bins = kDefaultOtsuBins);

struct QuestionCorrelations {
  std::vector<double> candidates;  // correlation of every candidate with the question
  double ground_truth = 0.0;
};

struct OtsuStats {
  double avg_variance_low_split = 0.0;
  double avg_variance_high_split = 0.0;
  double gt_above_threshold_fraction = 0.0;
  std::size_t questions_used = 0;
  std::size_t questions_skipped = 0;
};

/// Splits each question's candidates at its Otsu threshold (high: value >
/// threshold) and averages the split variances and the GT-above fraction
/// over the questions whose values are not all equal.
OtsuStats otsu_statistics(const std::vector<QuestionCorrelations>& questions,
                          std::size_t bins = kDefaultOtsuBins);

struct EvalReport {
  double mr = 0.0;
  double mrr = 0.0;
  std::map<std::size_t, double> recall_at;
  std::optional<double> ndcg;
  std::size_t question_count = 0;
  std::optional<OtsuStats> otsu;
  // Not serialized; shown in the table.
  std::size_t ndcg_skipped = 0;
};

/// Per-question inputs to a report; question_id fixes the summation order.
struct QuestionOutcome {
  std::string question_id;
  std::size_t gt_rank = 0;
  std::optional<std::vector<double>> ranked_relevance;
  std::optional<QuestionCorrelations> correlations;
};

struct ReportOptions {
  bool ndcg = false;
  bool otsu = false;
  std::size_t otsu_bins = kDefaultOtsuBins;
  std::vector<std::size_t> recall_ks{1, 5, 10};
};

/// Aggregates outcomes in sorted question_id order, so the result does not
/// depend on the input order.
EvalReport build_report(std::vector<QuestionOutcome> outcomes, const ReportOptions& options);

/// JSON object with the report's field names; recall_at keys are strings.
std::string to_json(const EvalReport& report);

/// Fixed-width table: MR, R@1, R@5, R@10, MRR, NDCG (recalls in percent).
std::string to_table(const EvalReport& report, const std::string& label);

}  // namespace mvcca
