#pragma once

// Centered-cosine correlation scoring, candidate ranking, nearest-neighbour
// answer retrieval and the nearest-neighbour ranking baselines.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvcca/cca.hpp"

namespace mvcca {

struct RankingViews {
  std::string question = "question";
  std::string answer = "answer";
  std::string image = "image";
};

struct RankResult {
  std::string question_id;
  std::vector<std::size_t> order;  // candidate positions, best first
  std::vector<double> scores;      // aligned with order, non-increasing
  std::size_t gt_rank = 0;         // 1-based

  bool operator==(const RankResult&) const = default;
};

struct RetrievalResult {
  std::string question_id;
  std::vector<std::size_t> rows;  // train-bank rows, best first
  std::vector<double> scores;
  std::size_t k_used = 0;
  bool k_clamped = false;
};

/// Cosine of two vectors; 0 when either has zero norm. Clamped to [-1, 1].
double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// embed(x) minus the view's stored training embedding mean.
Vector centered_embedding(const CcaModel& model, std::string_view view,
                          const Eigen::Ref<const Vector>& x);

/// Column-wise centered embeddings (p x M).
Matrix centered_embeddings(const CcaModel& model, std::string_view view,
                           const Eigen::Ref<const Matrix>& xs);

/// Correlation between two samples of (possibly different) views.
double score(const CcaModel& model, std::string_view view_a,
             const Eigen::Ref<const Vector>& x_a, std::string_view view_b,
             const Eigen::Ref<const Vector>& x_b);

/// Orders positions by descending score, lower position first on ties.
std::vector<std::size_t> ranked_order(const std::vector<double>& scores);

/// Builds a RankResult from per-candidate scores.
RankResult rank_scores(const std::vector<double>& scores, std::size_t gt_index,
                       std::string question_id = {});

/// Ranks candidate answers (columns of `candidates`) against a question using
/// only the question view, as for both A-Q and A-QI models.
RankResult rank_candidates(const CcaModel& model,
                           const Eigen::Ref<const Vector>& question,
                           const Eigen::Ref<const Matrix>& candidates,
                           std::size_t gt_index, const RankingViews& views = {});

/// Unit-norm centered embeddings of a whole bank (p x M); zero-norm columns
/// stay zero and therefore score 0 against everything.
Matrix unit_embeddings(const CcaModel& model, std::string_view view,
                       const Eigen::Ref<const Matrix>& xs);

/// Ranks bank columns `rows` of pre-embedded answers against a pre-embedded
/// question. Equivalent to rank_candidates on the gathered raw vectors.
RankResult rank_embedded(const Eigen::Ref<const Vector>& unit_question,
                         const Eigen::Ref<const Matrix>& unit_answers,
                         const std::vector<std::uint64_t>& rows, std::size_t gt_index,
                         std::string question_id = {});

/// Indices of the k largest scores (ties: lower index first), best first.
std::vector<std::size_t> top_k(const Eigen::Ref<const Vector>& scores, std::size_t k);

/// Precomputed train banks for answer retrieval: find the k training
/// questions most correlated with the query, then rank their aligned answers
/// against the query by question-answer correlation.
class NnRetriever {
 public:
  /// Banks hold samples in columns; answer j answers question j.
  NnRetriever(std::shared_ptr<const CcaModel> model,
              const Eigen::Ref<const Matrix>& train_questions,
              const Eigen::Ref<const Matrix>& train_answers, RankingViews views = {});

  std::size_t bank_size() const { return static_cast<std::size_t>(questions_.cols()); }

  RetrievalResult retrieve(const Eigen::Ref<const Vector>& question, std::size_t k,
                           std::size_t top) const;

 private:
  std::shared_ptr<const CcaModel> model_;
  RankingViews views_;
  Matrix questions_;  // unit-norm centered question embeddings
  Matrix answers_;    // unit-norm centered answer embeddings
};

RetrievalResult nn_retrieve(const CcaModel& model, const Eigen::Ref<const Vector>& question,
                            const Eigen::Ref<const Matrix>& train_questions,
                            const Eigen::Ref<const Matrix>& train_answers,
                            std::size_t k = 100, std::size_t top = 10,
                            const RankingViews& views = {});

/// Nearest-neighbour ranking baseline: average the answers of the k training
/// questions nearest to the query and rank candidates by cosine to that
/// average. Without a model the representations are raw features centered by
/// the bank means; with a model they are centered CCA embeddings. When image
/// banks are given, the unit-normalized image representation is appended to
/// the unit-normalized question representation for the neighbour search.
class NnBaseline {
 public:
  NnBaseline(std::shared_ptr<const CcaModel> model,
             const Eigen::Ref<const Matrix>& train_questions,
             const Eigen::Ref<const Matrix>& train_answers,
             std::optional<Matrix> train_images = std::nullopt, RankingViews views = {});

  std::size_t bank_size() const { return static_cast<std::size_t>(keys_.cols()); }
  bool uses_images() const { return with_images_; }

  RankResult rank(const Eigen::Ref<const Vector>& question,
                  const std::optional<Vector>& image,
                  const Eigen::Ref<const Matrix>& candidates, std::size_t gt_index,
                  std::size_t k) const;

  /// Representation used for candidate answers (columns in, columns out).
  Matrix answer_representation(const Eigen::Ref<const Matrix>& answers) const;

 private:
  Matrix question_key(const Eigen::Ref<const Matrix>& questions,
                      const std::optional<Matrix>& images) const;

  std::shared_ptr<const CcaModel> model_;
  RankingViews views_;
  Vector question_mean_;
  Vector answer_mean_;
  std::optional<Vector> image_mean_;  // raw image centering
  bool image_view_ = false;           // model has an image view
  bool with_images_ = false;
  Matrix keys_;     // unit-norm neighbour-search keys
  Matrix answers_;  // answer representations (not normalized)
};

}  // namespace mvcca
