#pragma once

// On-disk formats (VDF1 feature matrices, JSON-lines candidate sets, token
// embedding tables), sentence pooling and the synthetic dataset generator.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvcca/linalg.hpp"

namespace mvcca {

inline constexpr std::size_t kDefaultCandidateCount = 100;
inline constexpr std::size_t kDefaultMaxTokens = 16;

// ---------------------------------------------------------------------------
// VDF1 feature files: "VDF1", u32 rows, u32 cols, rows*cols f32 little-endian,
// row-major. One row per sample.

Matrix read_feature_matrix(const std::filesystem::path& path);
void write_feature_matrix(const std::filesystem::path& path, const Matrix& m);

// ---------------------------------------------------------------------------
// Token embedding table.

class EmbeddingTable {
 public:
  /// 0 until the first vector is inserted.
  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool empty() const { return vectors_.empty(); }
  std::size_t duplicate_count() const { return duplicates_; }

  /// Last insert wins on duplicate tokens. Throws FormatError on a dimension
  /// mismatch.
  void insert(std::string token, Vector v);

  /// nullptr when absent. Throws EmptyInput on an empty table.
  const Vector* find(std::string_view token) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::unordered_map<std::string, Vector, Hash, std::equal_to<>> vectors_;
  Eigen::Index dim_ = 0;
  std::size_t duplicates_ = 0;
};

/// One token per line followed by d space-separated reals.
EmbeddingTable load_embedding_table(const std::filesystem::path& path);

/// Lowercase, split on runs of non-alphanumeric ASCII. Bytes >= 0x80 are
/// kept as word characters.
std::vector<std::string> tokenize(std::string_view text);

enum class Pooling {
  PresentMean,  // mean over the in-vocabulary tokens that survive truncation
  Fixed,        // zero-padded to max_len: sum / max_len
};

Pooling parse_pooling(std::string_view name);

/// Truncates to max_len tokens, drops OOV tokens and pools the rest. Returns
/// the zero vector when nothing remains.
Vector sentence_embedding(const std::vector<std::string>& tokens,
                          const EmbeddingTable& table,
                          std::size_t max_len = kDefaultMaxTokens,
                          Pooling pooling = Pooling::PresentMean);

// ---------------------------------------------------------------------------
// Candidate sets (JSON lines).

struct CandidateRecord {
  std::string question_id;
  std::uint64_t question_row = 0;
  std::vector<std::uint64_t> candidate_rows;
  std::uint64_t gt_index = 0;
  std::optional<std::vector<double>> relevance;

  bool operator==(const CandidateRecord&) const = default;
};

/// Validates a record against a candidate count. Throws FormatError.
void validate(const CandidateRecord& record, std::size_t candidate_count);

/// When candidate_count is empty it is taken from the first record and then
/// enforced on every line.
std::vector<CandidateRecord> read_candidates(
    const std::filesystem::path& path,
    std::optional<std::size_t> candidate_count = std::nullopt);

void write_candidates(const std::filesystem::path& path,
                      const std::vector<CandidateRecord>& records);

// ---------------------------------------------------------------------------
// Synthetic data with a known latent correlation structure.

struct SynthConfig {
  Eigen::Index latent_dim = 4;
  /// Question, answer and optionally image dimensionality, in that order.
  std::vector<Eigen::Index> dims{16, 16};
  /// One target canonical correlation per latent direction, shared by every
  /// view pair.
  std::vector<double> rho{0.9, 0.6, 0.3, 0.1};
  Eigen::Index samples = 5000;         // training split size
  Eigen::Index question_count = 1000;  // held-out questions with candidate sets
  std::size_t candidate_count = kDefaultCandidateCount;
  double noise_scale = 1.0;
  std::uint64_t seed = 1;
  bool relevance = false;
};

void validate(const SynthConfig& config);

struct SynthData {
  /// Per view, samples in columns (dims[i] x samples).
  std::vector<Matrix> train;
  /// Per view, held-out questions in columns (dims[i] x question_count).
  std::vector<Matrix> test;
  /// Candidate sets over the held-out split: question_row j is test sample j,
  /// candidate rows index test answers.
  std::vector<CandidateRecord> records;
};

SynthData synth_generate(const SynthConfig& config);

}  // namespace mvcca
