#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "mvcca/error.hpp"
#include "mvcca/metrics.hpp"

namespace mvcca {

EvalReport build_report(std::vector<QuestionOutcome> outcomes, const ReportOptions& options) {
  if (outcomes.empty()) throw Error(ErrorKind::EmptyInput, "no questions to report on");
  std::stable_sort(outcomes.begin(), outcomes.end(),
                   [](const QuestionOutcome& a, const QuestionOutcome& b) {
                     if (a.question_id != b.question_id) return a.question_id < b.question_id;
                     return a.gt_rank < b.gt_rank;
                   });

  std::vector<std::size_t> ranks;
  ranks.reserve(outcomes.size());
  for (const auto& o : outcomes) ranks.push_back(o.gt_rank);

  EvalReport report;
  report.question_count = outcomes.size();
  report.mr = mean_rank(ranks);
  report.mrr = mrr(ranks);
  for (const auto k : options.recall_ks) report.recall_at[k] = recall_at(ranks, k);

  if (options.ndcg) {
    std::vector<std::vector<double>> relevances;
    for (const auto& o : outcomes) {
      if (!o.ranked_relevance) {
        throw Error(ErrorKind::ConfigError,
                    "NDCG requested but question " + o.question_id + " has no relevance scores");
      }
      relevances.push_back(*o.ranked_relevance);
    }
    const NdcgResult n = ndcg(relevances);
    report.ndcg = n.value;
    report.ndcg_skipped = n.questions_skipped;
  }
  if (options.otsu) {
    std::vector<QuestionCorrelations> correlations;
    for (const auto& o : outcomes) {
      if (!o.correlations) {
        throw Error(ErrorKind::ConfigError,
                    "Otsu analysis requested but question " + o.question_id + " has no correlations");
      }
      correlations.push_back(*o.correlations);
    }
    report.otsu = otsu_statistics(correlations, options.otsu_bins);
  }
  return report;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["mr"] = report.mr;
  j["mrr"] = report.mrr;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  j["recall_at"] = recall;
  j["ndcg"] = report.ndcg ? nlohmann::ordered_json(*report.ndcg) : nlohmann::ordered_json(nullptr);
  j["question_count"] = report.question_count;
  if (report.otsu) {
    nlohmann::ordered_json o;
    o["avg_variance_low_split"] = report.otsu->avg_variance_low_split;
    o["avg_variance_high_split"] = report.otsu->avg_variance_high_split;
    o["gt_above_threshold_fraction"] = report.otsu->gt_above_threshold_fraction;
    o["questions_used"] = report.otsu->questions_used;
    j["otsu"] = o;
  } else {
    j["otsu"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string to_table(const EvalReport& report, const std::string& label) {
  const auto recall = [&](std::size_t k) -> std::string {
    const auto it = report.recall_at.find(k);
    if (it == report.recall_at.end()) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * it->second);
    return buf;
  };
  std::string ndcg = "-";
  if (report.ndcg) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *report.ndcg);
    ndcg = buf;
  }

  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %8s %8s %8s\n", "model", "MR", "R@1",
                "R@5", "R@10", "MRR", "NDCG");
  out += line;
  std::snprintf(line, sizeof line, "%-16s %8.2f %8s %8s %8s %8.4f %8s\n", label.c_str(),
                report.mr, recall(1).c_str(), recall(5).c_str(), recall(10).c_str(), report.mrr,
                ndcg.c_str());
  out += line;
  std::snprintf(line, sizeof line, "questions: %zu", report.question_count);
  out += line;
  if (report.ndcg && report.ndcg_skipped > 0) {
    std::snprintf(line, sizeof line, "  (ndcg skipped %zu without positive relevance)",
                  report.ndcg_skipped);
    out += line;
  }
  out += "\n";
  if (report.otsu) {
    std::snprintf(line, sizeof line,
                  "otsu: var(low split) %.4f  var(high split) %.4f  gt above %.2f%%  "
                  "used %zu  skipped %zu\n",
                  report.otsu->avg_variance_low_split, report.otsu->avg_variance_high_split,
                  100.0 * report.otsu->gt_above_threshold_fraction, report.otsu->questions_used,
                  report.otsu->questions_skipped);
    out += line;
  }
  return out;
}

}  // namespace mvcca
