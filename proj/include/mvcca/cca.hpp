#pragma once

// Multi-view CCA: correlation-block assembly, the generalized eigenproblem
// fit, eigenvalue-weighted embeddings and the binary model file.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mvcca/linalg.hpp"

namespace mvcca {

inline constexpr std::size_t kMaxViews = 8;

struct ViewSpec {
  std::string name;
  Eigen::Index dim = 0;

  bool operator==(const ViewSpec&) const = default;
};

struct CcaConfig {
  Eigen::Index p = 300;
  double q = 1.0;
  /// Relative ridge: each diagonal block C_ii receives
  /// epsilon * trace(C_ii) / n_i on its diagonal, in both A and B.
  double epsilon = 1e-6;

  bool operator==(const CcaConfig&) const = default;
};

/// Fitted projections. Immutable once built; safe to share across threads.
struct CcaModel {
  std::vector<ViewSpec> views;
  std::vector<Matrix> projections;      // n_i x p
  Vector eigenvalues;                   // p, descending, unclamped
  std::vector<Vector> input_means;      // n_i
  std::vector<Vector> embedding_means;  // p
  CcaConfig config;
  std::uint64_t sample_count = 0;

  /// Index of the named view; throws UnknownView.
  std::size_t view_index(std::string_view name) const;

  /// sum_i n_i * p
  std::uint64_t parameter_count() const;

  /// diag(lambda_k^q) with lambda below 1e-10 (or negative) clamped to 0.
  Vector weights() const;
};

struct CenteredViews {
  std::vector<Matrix> views;  // n_i x N, zero row means
  std::vector<Vector> means;  // n_i
};

struct CorrelationBlocks {
  Matrix a;  // full block matrix [C_ij]
  Matrix b;  // block-diag(C_11, ..., C_mm)
  std::vector<Eigen::Index> offsets;  // first row of each view's block
};

struct FitResult {
  CcaModel model;
  Vector spectrum;  // every generalized eigenvalue, descending
};

/// Subtracts each view's per-row mean. Views are n_i x N with samples in
/// columns; all must share N >= 2.
CenteredViews center_views(const std::vector<Matrix>& views);

/// C_ij = X_i X_j^T / (N - 1) with the relative ridge on the diagonal blocks.
/// A and B are exactly symmetric.
CorrelationBlocks correlation_matrices(const std::vector<Matrix>& centered,
                                       double epsilon);

void validate(const CcaConfig& config, const std::vector<ViewSpec>& specs);

CcaModel fit(const std::vector<Matrix>& views,
             const std::vector<ViewSpec>& specs, const CcaConfig& config);

FitResult fit_detailed(const std::vector<Matrix>& views,
                       const std::vector<ViewSpec>& specs,
                       const CcaConfig& config);

/// (W_i D_p^q)^T (x - mu_i).
Vector embed(const CcaModel& model, std::string_view view,
             const Eigen::Ref<const Vector>& x);

/// Column-wise embed of an n_i x M block; returns p x M.
Matrix embed_columns(const CcaModel& model, std::string_view view,
                     const Eigen::Ref<const Matrix>& xs);

void save_model(const CcaModel& model, const std::filesystem::path& path);
CcaModel load_model(const std::filesystem::path& path);

}  // namespace mvcca
