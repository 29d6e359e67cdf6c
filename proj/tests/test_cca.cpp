#include <gtest/gtest.h>

#include <fstream>

#include "mvcca/cca.hpp"
#include "mvcca/dataio.hpp"
#include "mvcca/ranking.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace mvcca {
namespace {

using testing::random_matrix;
using testing::random_vector;

void expect_error(ErrorKind kind, const auto& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

std::vector<ViewSpec> specs_for(const std::vector<Matrix>& views) {
  static const char* names[] = {"answer", "question", "image", "v3"};
  std::vector<ViewSpec> specs;
  for (std::size_t i = 0; i < views.size(); ++i) specs.push_back({names[i], views[i].rows()});
  return specs;
}

// Two views whose first `latent` coordinates share a factor with the given
// correlations.
std::vector<Matrix> correlated_views(std::uint64_t seed, Eigen::Index n1, Eigen::Index n2,
                                     std::vector<double> rho, Eigen::Index samples) {
  SynthConfig c;
  c.latent_dim = static_cast<Eigen::Index>(rho.size());
  c.dims = {n1, n2};
  c.rho = std::move(rho);
  c.samples = samples;
  c.question_count = 0;
  c.seed = seed;
  return synth_generate(c).train;
}

TEST(CenterViews, HandExample) {
  Matrix x(2, 2);
  x << 1, 3, 2, 4;
  const auto c = center_views({x});
  Matrix expected(2, 2);
  expected << -1, 1, -1, 1;
  EXPECT_EQ(c.views[0], expected);
  EXPECT_EQ(c.means[0], (Vector(2) << 2, 3).finished());
}

TEST(CenterViews, ZeroMeanInputUnchanged) {
  Matrix x(2, 3);
  x << -1, 0, 1, 2, -4, 2;
  const auto c = center_views({x});
  EXPECT_EQ(c.views[0], x);
  EXPECT_EQ(c.means[0], Vector::Zero(2));
}

TEST(CenterViews, RandomRowMeansVanish) {
  std::mt19937_64 rng(1);
  const auto c = center_views({random_matrix(rng, 3, 5), random_matrix(rng, 4, 5)});
  for (const auto& v : c.views) EXPECT_LE(v.rowwise().mean().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CenterViews, Errors) {
  expect_error(ErrorKind::SampleCountMismatch,
               [] { center_views({Matrix::Ones(2, 4), Matrix::Ones(2, 5)}); });
  expect_error(ErrorKind::TooFewSamples, [] { center_views({Matrix::Ones(2, 1)}); });
}

TEST(CorrelationMatrices, IdenticalViewsGiveIdenticalBlocks) {
  std::mt19937_64 rng(2);
  const auto c = center_views({random_matrix(rng, 3, 10)});
  const auto blocks = correlation_matrices({c.views[0], c.views[0]}, 0.0);
  const Matrix c11 = blocks.a.block(0, 0, 3, 3);
  EXPECT_LE((blocks.a.block(0, 3, 3, 3) - c11).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((blocks.a.block(3, 3, 3, 3) - c11).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(blocks.b.block(0, 0, 3, 3), c11);
  EXPECT_EQ(blocks.b.block(0, 3, 3, 3), Matrix::Zero(3, 3));
}

TEST(CorrelationMatrices, TwoSamplesHandValue) {
  Matrix x(1, 2);
  x << -1, 1;
  EXPECT_EQ(correlation_matrices({x}, 0.0).a(0, 0), 2.0);
  // Relative ridge: epsilon * trace / n.
  EXPECT_DOUBLE_EQ(correlation_matrices({x}, 0.5).a(0, 0), 3.0);
}

TEST(CorrelationMatrices, RandomThreeViewsSymmetricAndRidgedIdentically) {
  std::mt19937_64 rng(3);
  const auto c = center_views(
      {random_matrix(rng, 3, 20), random_matrix(rng, 4, 20), random_matrix(rng, 2, 20)});
  const auto blocks = correlation_matrices(c.views, 1e-3);
  EXPECT_LE((blocks.a - blocks.a.transpose()).norm(), 1e-12);
  EXPECT_EQ(blocks.b, blocks.b.transpose());
  const Matrix diff = blocks.a - blocks.b;
  EXPECT_EQ(diff.block(0, 0, 3, 3), Matrix::Zero(3, 3));
  EXPECT_EQ(diff.block(3, 3, 4, 4), Matrix::Zero(4, 4));
  EXPECT_EQ(diff.block(7, 7, 2, 2), Matrix::Zero(2, 2));
  // Off-diagonal block is X_1 X_2^T / (N - 1).
  const Matrix c12 = c.views[0] * c.views[1].transpose() / 19.0;
  EXPECT_LE((blocks.a.block(0, 3, 3, 4) - c12).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Fit, IdenticalViewsTopEigenvalueIsTwo) {
  std::mt19937_64 rng(4);
  const Matrix x = random_matrix(rng, 3, 50);
  const auto result = fit_detailed({x, x}, {{"answer", 3}, {"question", 3}}, {2, 1.0, 0.0});
  EXPECT_NEAR(result.model.eigenvalues(0), 2.0, 1e-10);
  EXPECT_NEAR(result.model.eigenvalues(1), 2.0, 1e-10);
  EXPECT_NEAR(result.spectrum(5), 0.0, 1e-10);
}

TEST(Fit, ParameterCountIsSumOfViewDimsTimesP) {
  CcaModel m;
  m.views = {{"answer", 300}, {"question", 300}};
  m.config.p = 300;
  EXPECT_EQ(m.parameter_count(), 180000u);
  m.views.push_back({"image", 512});
  EXPECT_EQ(m.parameter_count(), 333600u);
}

TEST(Fit, TwoViewSpectrumMatchesClassicalOracle) {
  const auto views = correlated_views(7, 3, 4, {0.8, 0.5, 0.2}, 600);
  const auto result = fit_detailed(views, specs_for(views), {3, 1.0, 0.0});
  const auto rho = testing::classical_cca(views[0], views[1]);
  const Vector& s = result.spectrum;
  ASSERT_EQ(s.size(), 7);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(s(static_cast<Eigen::Index>(k)), 1.0 + rho[k], 1e-8);
    EXPECT_NEAR(s(6 - static_cast<Eigen::Index>(k)), 1.0 - rho[k], 1e-8);
  }
  // The unpaired direction of the larger view sits at 1.
  EXPECT_NEAR(s(3), 1.0, 1e-8);
}

TEST(Fit, ConstraintHoldsWithoutRidge) {
  const auto views = correlated_views(8, 5, 6, {0.9, 0.4}, 2000);
  const auto model = fit(views, specs_for(views), {5, 1.0, 0.0});
  const auto c = center_views(views);
  for (std::size_t i = 0; i < 2; ++i) {
    const Matrix cii = c.views[i] * c.views[i].transpose() / 1999.0;
    const Matrix gram = model.projections[i].transpose() * cii * model.projections[i];
    EXPECT_LE((gram - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Fit, ThreeViewGramMatricesAverageToIdentity) {
  std::mt19937_64 rng(19);
  const std::vector<Matrix> views{random_matrix(rng, 3, 400), random_matrix(rng, 4, 400),
                                  random_matrix(rng, 3, 400)};
  const auto model = fit(views, specs_for(views), {3, 1.0, 0.0});
  const auto c = center_views(views);
  Matrix sum = Matrix::Zero(3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const Matrix cii = c.views[i] * c.views[i].transpose() / 399.0;
    sum += model.projections[i].transpose() * cii * model.projections[i];
  }
  EXPECT_LE((sum / 3.0 - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Fit, EigenvaluesWithinZeroAndViewCount) {
  std::mt19937_64 rng(9);
  const std::vector<Matrix> views{random_matrix(rng, 3, 40), random_matrix(rng, 4, 40),
                                  random_matrix(rng, 2, 40)};
  const auto result = fit_detailed(views, specs_for(views), {2, 1.0, 0.0});
  EXPECT_GE(result.spectrum.minCoeff(), -1e-8);
  EXPECT_LE(result.spectrum.maxCoeff(), 3.0 + 1e-8);
}

TEST(Fit, TruncationIsBitIdenticalPrefix) {
  const auto views = correlated_views(10, 6, 5, {0.9, 0.7, 0.3}, 500);
  const auto full = fit(views, specs_for(views), {5, 1.0, 1e-6});
  const auto part = fit(views, specs_for(views), {3, 1.0, 1e-6});
  EXPECT_EQ(part.eigenvalues, full.eigenvalues.head(3));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(part.projections[i], full.projections[i].leftCols(3));
    EXPECT_EQ(part.embedding_means[i], full.embedding_means[i].head(3));
  }
}

TEST(Fit, InvariantToInvertibleMapOfOneView) {
  const auto views = correlated_views(12, 4, 4, {0.9, 0.6, 0.3, 0.1}, 3000);
  std::mt19937_64 rng(13);
  const Matrix t = random_matrix(rng, 4, 4) + 3.0 * Matrix::Identity(4, 4);
  const std::vector<Matrix> mapped{t * views[0], views[1]};
  const CcaConfig config{4, 1.0, 0.0};
  const auto base = fit_detailed(views, specs_for(views), config);
  const auto moved = fit_detailed(mapped, specs_for(mapped), config);
  EXPECT_LE((base.spectrum - moved.spectrum).cwiseAbs().maxCoeff(), 1e-6);

  for (int trial = 0; trial < 20; ++trial) {
    const Vector a = random_vector(rng, 4);
    const Vector q = random_vector(rng, 4);
    const double s0 = score(base.model, "answer", a, "question", q);
    const double s1 = score(moved.model, "answer", t * a, "question", q);
    EXPECT_NEAR(s0, s1, 1e-6);
  }
}

TEST(Fit, ConfigErrors) {
  std::mt19937_64 rng(14);
  const std::vector<Matrix> views{random_matrix(rng, 3, 10), random_matrix(rng, 4, 10)};
  expect_error(ErrorKind::ConfigError, [&] { fit(views, specs_for(views), {4, 1.0, 0.0}); });
  expect_error(ErrorKind::ConfigError, [&] { fit(views, specs_for(views), {0, 1.0, 0.0}); });
  expect_error(ErrorKind::ConfigError, [&] { fit(views, specs_for(views), {2, 1.0, -1.0}); });
  expect_error(ErrorKind::ConfigError,
               [&] { fit(views, {{"a", 3}, {"a", 4}}, {2, 1.0, 0.0}); });
  expect_error(ErrorKind::DimensionMismatch,
               [&] { fit(views, {{"a", 4}, {"b", 4}}, {2, 1.0, 0.0}); });
}

TEST(Fit, RankDeficientViewNeedsRidge) {
  std::mt19937_64 rng(15);
  Matrix x = random_matrix(rng, 3, 30);
  x.row(2) = x.row(0) + x.row(1);
  const Matrix y = random_matrix(rng, 3, 30);
  expect_error(ErrorKind::NotPositiveDefinite,
               [&] { fit({x, y}, {{"answer", 3}, {"question", 3}}, {2, 1.0, 0.0}); });
  EXPECT_NO_THROW(fit({x, y}, {{"answer", 3}, {"question", 3}}, {2, 1.0, 1e-6}));
}

CcaModel hand_model() {
  CcaModel m;
  m.views = {{"answer", 2}, {"question", 2}};
  m.config = {2, 1.0, 0.0};
  m.projections = {Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  m.eigenvalues = (Vector(2) << 2, 1).finished();
  m.input_means = {Vector::Zero(2), Vector::Zero(2)};
  m.embedding_means = {Vector::Zero(2), Vector::Zero(2)};
  m.sample_count = 10;
  return m;
}

TEST(Embed, HandFormula) {
  const auto m = hand_model();
  EXPECT_EQ(embed(m, "answer", Vector::Ones(2)), (Vector(2) << 2, 1).finished());
}

TEST(Embed, ZeroExponentIsPlainProjection) {
  const auto views = correlated_views(16, 4, 3, {0.7}, 200);
  const auto model = fit(views, specs_for(views), {3, 0.0, 1e-6});
  std::mt19937_64 rng(16);
  const Vector x = random_vector(rng, 4);
  const Vector expected = model.projections[0].transpose() * (x - model.input_means[0]);
  EXPECT_EQ(embed(model, "answer", x), expected);
}

TEST(Embed, MatchesExplicitProductOracle) {
  const auto views = correlated_views(17, 5, 4, {0.8, 0.4}, 300);
  const auto model = fit(views, specs_for(views), {4, 1.0, 1e-6});
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = random_vector(rng, 5);
    const Vector got = embed(model, "answer", x);
    for (Eigen::Index k = 0; k < 4; ++k) {
      double acc = 0.0;
      for (Eigen::Index r = 0; r < 5; ++r) {
        acc += model.projections[0](r, k) * (x(r) - model.input_means[0](r));
      }
      EXPECT_NEAR(got(k), std::pow(model.eigenvalues(k), 1.0) * acc, 1e-12);
    }
    const Matrix batch = embed_columns(model, "answer", x);
    EXPECT_LE((batch.col(0) - got).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Embed, Errors) {
  const auto m = hand_model();
  expect_error(ErrorKind::UnknownView, [&] { embed(m, "image", Vector::Ones(2)); });
  expect_error(ErrorKind::DimensionMismatch, [&] { embed(m, "answer", Vector::Ones(3)); });
}

TEST(Embed, ClampsTinyAndNegativeEigenvalues) {
  auto m = hand_model();
  m.eigenvalues << 1e-12, -0.5;
  m.config.q = 0.5;
  EXPECT_EQ(m.weights(), Vector::Zero(2));
  m.config.q = 0.0;
  EXPECT_EQ(m.weights(), Vector::Ones(2));
}

TEST(ModelFile, RoundTripIsBitExact) {
  testing::TempDir dir("model");
  const auto views = correlated_views(18, 5, 4, {0.8, 0.4}, 300);
  const auto model = fit(views, specs_for(views), {3, 0.7, 1e-4});
  save_model(model, dir / "m.bin");
  const auto loaded = load_model(dir / "m.bin");
  EXPECT_EQ(loaded.views, model.views);
  EXPECT_EQ(loaded.config, model.config);
  EXPECT_EQ(loaded.sample_count, model.sample_count);
  EXPECT_EQ(loaded.eigenvalues, model.eigenvalues);
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector a = random_vector(rng, 5);
    const Vector q = random_vector(rng, 4);
    EXPECT_EQ(embed(loaded, "answer", a), embed(model, "answer", a));
    EXPECT_EQ(embed(loaded, "question", q), embed(model, "question", q));
  }
}

TEST(ModelFile, LayoutHeader) {
  testing::TempDir dir("model");
  save_model(hand_model(), dir / "m.bin");
  std::ifstream in(dir / "m.bin", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MVCM");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 2);  // view count
  // 4+4+4 + 2*(2+len+4) + 4 + 8 + 8 + 8 + p*8 + per view (2 + 2 + 4)*8
  const std::size_t header = 12 + (2 + 6 + 4) + (2 + 8 + 4) + 4 + 24;
  EXPECT_EQ(bytes.size(), header + 2 * 8 + 2 * (2 + 2 + 4) * 8);
}

TEST(ModelFile, CorruptFilesAreFormatErrors) {
  testing::TempDir dir("model");
  save_model(hand_model(), dir / "m.bin");
  std::ifstream in(dir / "m.bin", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});

  const auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    out << content;
    return dir / name;
  };
  expect_error(ErrorKind::FormatError,
               [&] { load_model(write("trunc.bin", bytes.substr(0, bytes.size() - 3))); });
  expect_error(ErrorKind::FormatError,
               [&] { load_model(write("short.bin", bytes.substr(0, 10))); });
  expect_error(ErrorKind::FormatError,
               [&] { load_model(write("magic.bin", "XXXX" + bytes.substr(4))); });
  std::string bad_version = bytes;
  bad_version[4] = 2;
  expect_error(ErrorKind::FormatError, [&] { load_model(write("ver.bin", bad_version)); });
  expect_error(ErrorKind::FormatError, [&] { load_model(write("tail.bin", bytes + "x")); });
  expect_error(ErrorKind::IoError, [&] { load_model(dir / "missing.bin"); });
}

}  // namespace
}  // namespace mvcca
