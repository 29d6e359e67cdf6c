#include "mvcca/ranking.hpp"

#include <algorithm>
#include <numeric>

namespace mvcca {

namespace {

Matrix unit_columns(Matrix m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double norm = m.col(j).norm();
    if (norm > 0.0) {
      m.col(j) /= norm;
    } else {
      m.col(j).setZero();
    }
  }
  return m;
}

Vector unit(Vector v) {
  const double norm = v.norm();
  if (norm > 0.0) return v / norm;
  return Vector::Zero(v.size());
}

void require_gt(std::size_t gt_index, Eigen::Index candidates) {
  if (candidates < 1) throw Error(ErrorKind::EmptyInput, "no candidates to rank");
  if (gt_index >= static_cast<std::size_t>(candidates)) {
    throw Error(ErrorKind::ConfigError,
                "gt_index " + std::to_string(gt_index) + " out of range for " +
                    std::to_string(candidates) + " candidates");
  }
}

}  // namespace

double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::DimensionMismatch, "cosine of vectors with different sizes");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Vector centered_embedding(const CcaModel& model, std::string_view view,
                          const Eigen::Ref<const Vector>& x) {
  return embed(model, view, x) - model.embedding_means[model.view_index(view)];
}

Matrix centered_embeddings(const CcaModel& model, std::string_view view,
                           const Eigen::Ref<const Matrix>& xs) {
  return embed_columns(model, view, xs).colwise() -
         model.embedding_means[model.view_index(view)];
}

double score(const CcaModel& model, std::string_view view_a,
             const Eigen::Ref<const Vector>& x_a, std::string_view view_b,
             const Eigen::Ref<const Vector>& x_b) {
  return cosine(centered_embedding(model, view_a, x_a),
                centered_embedding(model, view_b, x_b));
}

std::vector<std::size_t> ranked_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

RankResult rank_scores(const std::vector<double>& scores, std::size_t gt_index,
                       std::string question_id) {
  require_gt(gt_index, static_cast<Eigen::Index>(scores.size()));
  RankResult out;
  out.question_id = std::move(question_id);
  out.order = ranked_order(scores);
  out.scores.reserve(scores.size());
  for (std::size_t pos = 0; pos < out.order.size(); ++pos) {
    out.scores.push_back(scores[out.order[pos]]);
    if (out.order[pos] == gt_index) out.gt_rank = pos + 1;
  }
  return out;
}

Matrix unit_embeddings(const CcaModel& model, std::string_view view,
                       const Eigen::Ref<const Matrix>& xs) {
  return unit_columns(centered_embeddings(model, view, xs));
}

RankResult rank_embedded(const Eigen::Ref<const Vector>& unit_question,
                         const Eigen::Ref<const Matrix>& unit_answers,
                         const std::vector<std::uint64_t>& rows, std::size_t gt_index,
                         std::string question_id) {
  std::vector<double> scores;
  scores.reserve(rows.size());
  for (const auto row : rows) {
    if (row >= static_cast<std::uint64_t>(unit_answers.cols())) {
      throw Error(ErrorKind::DimensionMismatch,
                  "answer row " + std::to_string(row) + " out of range for bank of " +
                      std::to_string(unit_answers.cols()));
    }
    scores.push_back(std::clamp(
        unit_answers.col(static_cast<Eigen::Index>(row)).dot(unit_question), -1.0, 1.0));
  }
  return rank_scores(scores, gt_index, std::move(question_id));
}

RankResult rank_candidates(const CcaModel& model, const Eigen::Ref<const Vector>& question,
                           const Eigen::Ref<const Matrix>& candidates, std::size_t gt_index,
                           const RankingViews& views) {
  require_gt(gt_index, candidates.cols());
  const Vector q = unit(centered_embedding(model, views.question, question));
  const Matrix a = unit_columns(centered_embeddings(model, views.answer, candidates));
  std::vector<double> scores(static_cast<std::size_t>(a.cols()));
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    scores[static_cast<std::size_t>(j)] = std::clamp(a.col(j).dot(q), -1.0, 1.0);
  }
  return rank_scores(scores, gt_index);
}

std::vector<std::size_t> top_k(const Eigen::Ref<const Vector>& scores, std::size_t k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double sa = scores(static_cast<Eigen::Index>(a));
                      const double sb = scores(static_cast<Eigen::Index>(b));
                      return sa > sb || (sa == sb && a < b);
                    });
  idx.resize(k);
  return idx;
}

// ---------------------------------------------------------------------------

NnRetriever::NnRetriever(std::shared_ptr<const CcaModel> model,
                         const Eigen::Ref<const Matrix>& train_questions,
                         const Eigen::Ref<const Matrix>& train_answers, RankingViews views)
    : model_(std::move(model)), views_(std::move(views)) {
  if (!model_) throw Error(ErrorKind::ConfigError, "retrieval needs a model");
  if (train_questions.cols() == 0 || train_answers.cols() == 0) {
    throw Error(ErrorKind::EmptyBank, "training bank is empty");
  }
  if (train_questions.cols() != train_answers.cols()) {
    throw Error(ErrorKind::SampleCountMismatch,
                "bank has " + std::to_string(train_questions.cols()) + " questions but " +
                    std::to_string(train_answers.cols()) + " answers");
  }
  questions_ = unit_columns(centered_embeddings(*model_, views_.question, train_questions));
  answers_ = unit_columns(centered_embeddings(*model_, views_.answer, train_answers));
}

RetrievalResult NnRetriever::retrieve(const Eigen::Ref<const Vector>& question, std::size_t k,
                                      std::size_t top) const {
  if (k < 1 || top < 1) throw Error(ErrorKind::ConfigError, "k and top must be >= 1");
  RetrievalResult out;
  out.k_clamped = k > bank_size();
  out.k_used = std::min(k, bank_size());

  const Vector q = unit(centered_embedding(*model_, views_.question, question));
  const Vector similarity = questions_.transpose() * q;
  std::vector<std::size_t> neighbours = top_k(similarity, out.k_used);

  std::vector<double> answer_scores;
  answer_scores.reserve(neighbours.size());
  for (const auto row : neighbours) {
    answer_scores.push_back(
        std::clamp(answers_.col(static_cast<Eigen::Index>(row)).dot(q), -1.0, 1.0));
  }
  // Candidate positions follow bank-row order so ties resolve to lower rows.
  std::vector<std::size_t> by_row(neighbours.size());
  std::iota(by_row.begin(), by_row.end(), std::size_t{0});
  std::sort(by_row.begin(), by_row.end(),
            [&](std::size_t a, std::size_t b) { return neighbours[a] < neighbours[b]; });
  std::vector<double> row_scores;
  for (const auto i : by_row) row_scores.push_back(answer_scores[i]);

  const auto order = ranked_order(row_scores);
  const std::size_t keep = std::min(top, order.size());
  for (std::size_t i = 0; i < keep; ++i) {
    out.rows.push_back(neighbours[by_row[order[i]]]);
    out.scores.push_back(row_scores[order[i]]);
  }
  return out;
}

RetrievalResult nn_retrieve(const CcaModel& model, const Eigen::Ref<const Vector>& question,
                            const Eigen::Ref<const Matrix>& train_questions,
                            const Eigen::Ref<const Matrix>& train_answers, std::size_t k,
                            std::size_t top, const RankingViews& views) {
  const NnRetriever retriever(std::make_shared<const CcaModel>(model), train_questions,
                              train_answers, views);
  return retriever.retrieve(question, k, top);
}

// ---------------------------------------------------------------------------

NnBaseline::NnBaseline(std::shared_ptr<const CcaModel> model,
                       const Eigen::Ref<const Matrix>& train_questions,
                       const Eigen::Ref<const Matrix>& train_answers,
                       std::optional<Matrix> train_images, RankingViews views)
    : model_(std::move(model)), views_(std::move(views)) {
  if (train_questions.cols() == 0 || train_answers.cols() == 0) {
    throw Error(ErrorKind::EmptyBank, "training bank is empty");
  }
  if (train_questions.cols() != train_answers.cols() ||
      (train_images && train_images->cols() != train_questions.cols())) {
    throw Error(ErrorKind::SampleCountMismatch, "training banks are not row-aligned");
  }
  with_images_ = train_images.has_value();
  if (!model_) {
    question_mean_ = train_questions.rowwise().mean();
    answer_mean_ = train_answers.rowwise().mean();
  }
  if (with_images_) {
    image_view_ = false;
    if (model_) {
      for (const auto& v : model_->views) image_view_ = image_view_ || v.name == views_.image;
    }
    if (!image_view_) image_mean_ = train_images->rowwise().mean();
  }
  keys_ = question_key(train_questions, train_images);
  answers_ = answer_representation(train_answers);
}

Matrix NnBaseline::answer_representation(const Eigen::Ref<const Matrix>& answers) const {
  if (model_) return centered_embeddings(*model_, views_.answer, answers);
  if (answers.rows() != answer_mean_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "answer dimension differs from the bank");
  }
  return answers.colwise() - answer_mean_;
}

Matrix NnBaseline::question_key(const Eigen::Ref<const Matrix>& questions,
                                const std::optional<Matrix>& images) const {
  Matrix q;
  if (model_) {
    q = centered_embeddings(*model_, views_.question, questions);
  } else {
    if (questions.rows() != question_mean_.size()) {
      throw Error(ErrorKind::DimensionMismatch, "question dimension differs from the bank");
    }
    q = questions.colwise() - question_mean_;
  }
  q = unit_columns(std::move(q));
  if (!with_images_) return q;
  if (!images || images->cols() != questions.cols()) {
    throw Error(ErrorKind::ConfigError, "image features required for the image baseline");
  }
  Matrix img;
  if (image_view_) {
    img = centered_embeddings(*model_, views_.image, *images);
  } else {
    if (images->rows() != image_mean_->size()) {
      throw Error(ErrorKind::DimensionMismatch, "image dimension differs from the bank");
    }
    img = images->colwise() - *image_mean_;
  }
  img = unit_columns(std::move(img));
  Matrix key(q.rows() + img.rows(), q.cols());
  key.topRows(q.rows()) = q;
  key.bottomRows(img.rows()) = img;
  return unit_columns(std::move(key));
}

RankResult NnBaseline::rank(const Eigen::Ref<const Vector>& question,
                            const std::optional<Vector>& image,
                            const Eigen::Ref<const Matrix>& candidates, std::size_t gt_index,
                            std::size_t k) const {
  if (k < 1) throw Error(ErrorKind::ConfigError, "k must be >= 1");
  require_gt(gt_index, candidates.cols());
  std::optional<Matrix> image_col;
  if (image) image_col = Matrix(*image);
  const Matrix key = question_key(Matrix(question), image_col);
  const Vector similarity = keys_.transpose() * key.col(0);
  const auto neighbours = top_k(similarity, std::min(k, bank_size()));

  Vector reference = Vector::Zero(answers_.rows());
  for (const auto row : neighbours) reference += answers_.col(static_cast<Eigen::Index>(row));
  reference /= static_cast<double>(neighbours.size());

  const Matrix reps = answer_representation(candidates);
  std::vector<double> scores(static_cast<std::size_t>(reps.cols()));
  for (Eigen::Index j = 0; j < reps.cols(); ++j) {
    scores[static_cast<std::size_t>(j)] = cosine(reps.col(j), reference);
  }
  return rank_scores(scores, gt_index);
}

}  // namespace mvcca
