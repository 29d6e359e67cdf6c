#include "mvcca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mvcca/error.hpp"

namespace mvcca {

namespace {

void require_ranks(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) throw Error(ErrorKind::EmptyInput, "no ranks given");
  for (const auto r : ranks) {
    if (r < 1) throw Error(ErrorKind::ConfigError, "ranks are 1-based");
  }
}

double population_variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double acc = 0.0;
  for (const double x : xs) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(xs.size());
}

}  // namespace

double mean_rank(const std::vector<std::size_t>& ranks) {
  require_ranks(ranks);
  double sum = 0.0;
  for (const auto r : ranks) sum += static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

double mrr(const std::vector<std::size_t>& ranks) {
  require_ranks(ranks);
  double sum = 0.0;
  for (const auto r : ranks) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

double recall_at(const std::vector<std::size_t>& ranks, std::size_t k) {
  require_ranks(ranks);
  if (k < 1) throw Error(ErrorKind::ConfigError, "recall cutoff must be >= 1");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::optional<double> ndcg_single(const std::vector<double>& ranked_relevance) {
  for (const double r : ranked_relevance) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::ConfigError, "relevance outside [0, 1]");
  }
  const auto cutoff = static_cast<std::size_t>(
      std::count_if(ranked_relevance.begin(), ranked_relevance.end(), [](double r) { return r > 0.0; }));
  if (cutoff == 0) return std::nullopt;

  std::vector<double> ideal = ranked_relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0.0;
  double idcg = 0.0;
  for (std::size_t i = 0; i < cutoff; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += ranked_relevance[i] / discount;
    idcg += ideal[i] / discount;
  }
  return dcg / idcg;
}

NdcgResult ndcg(const std::vector<std::vector<double>>& ranked_relevances) {
  NdcgResult out;
  double sum = 0.0;
  for (const auto& rel : ranked_relevances) {
    if (const auto v = ndcg_single(rel)) {
      sum += *v;
      ++out.questions_used;
    } else {
      ++out.questions_skipped;
    }
  }
  if (out.questions_used == 0) {
    throw Error(ErrorKind::EmptyInput, "no question has a positive relevance");
  }
  out.value = sum / static_cast<double>(out.questions_used);
  return out;
}

double otsu_threshold(const std::vector<double>& values, std::size_t bins) {
  if (bins < 2) throw Error(ErrorKind::ConfigError, "Otsu needs at least 2 bins");
  if (values.size() < 2) throw Error(ErrorKind::DegenerateInput, "Otsu needs at least 2 values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorKind::DegenerateInput, "all values are equal");
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorKind::DegenerateInput, "non-finite value");
  }

  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> count(bins, 0.0);
  std::vector<double> sum(bins, 0.0);
  for (const double v : values) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
    count[b] += 1.0;
    sum[b] += v;
  }

  const double n = static_cast<double>(values.size());
  double total = 0.0;
  for (const double s : sum) total += s;

  double best = -1.0;
  std::size_t best_edge = 1;
  double n0 = 0.0;
  double s0 = 0.0;
  for (std::size_t edge = 1; edge < bins; ++edge) {
    n0 += count[edge - 1];
    s0 += sum[edge - 1];
    const double n1 = n - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (total - s0) / n1;
    const double between = (n0 / n) * (n1 / n) * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_edge = edge;
    }
  }
  return lo + static_cast<double>(best_edge) * width;
}

OtsuStats otsu_statistics(const std::vector<QuestionCorrelations>& questions, std::size_t bins) {
  if (questions.empty()) throw Error(ErrorKind::EmptyInput, "no questions for Otsu analysis");
  OtsuStats out;
  double low_var = 0.0;
  double high_var = 0.0;
  double above = 0.0;
  std::vector<double> low;
  std::vector<double> high;
  for (const auto& q : questions) {
    double threshold = 0.0;
    try {
      threshold = otsu_threshold(q.candidates, bins);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateInput) throw;
      ++out.questions_skipped;
      continue;
    }
    low.clear();
    high.clear();
    for (const double v : q.candidates) (v > threshold ? high : low).push_back(v);
    low_var += population_variance(low);
    high_var += population_variance(high);
    if (q.ground_truth > threshold) above += 1.0;
    ++out.questions_used;
  }
  if (out.questions_used == 0) {
    throw Error(ErrorKind::EmptyInput, "every question has degenerate correlations");
  }
  const double used = static_cast<double>(out.questions_used);
  out.avg_variance_low_split = low_var / used;
  out.avg_variance_high_split = high_var / used;
  out.gt_above_threshold_fraction = above / used;
  return out;
}

}  // namespace mvcca
