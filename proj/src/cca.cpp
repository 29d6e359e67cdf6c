#include "mvcca/cca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mvcca/binary_io.hpp"

namespace mvcca {

namespace {

constexpr char kModelMagic[5] = "MVCM";
constexpr std::uint32_t kModelVersion = 1;
constexpr double kEigenvalueFloor = 1e-10;

void require_views(const std::vector<Matrix>& views) {
  if (views.empty()) throw Error(ErrorKind::ConfigError, "no views given");
  const Eigen::Index n = views.front().cols();
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].cols() != n) {
      throw Error(ErrorKind::SampleCountMismatch,
                  "view " + std::to_string(i) + " has " +
                      std::to_string(views[i].cols()) + " samples, view 0 has " +
                      std::to_string(n));
    }
    if (views[i].rows() < 1) {
      throw Error(ErrorKind::DimensionMismatch,
                  "view " + std::to_string(i) + " has no features");
    }
  }
  if (n < 2) {
    throw Error(ErrorKind::TooFewSamples,
                "need at least 2 samples, got " + std::to_string(n));
  }
}

}  // namespace

std::size_t CcaModel::view_index(std::string_view name) const {
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].name == name) return i;
  }
  throw Error(ErrorKind::UnknownView, "no view named \"" + std::string(name) + "\"");
}

std::uint64_t CcaModel::parameter_count() const {
  std::uint64_t total = 0;
  for (const auto& v : views) {
    total += static_cast<std::uint64_t>(v.dim) *
             static_cast<std::uint64_t>(config.p);
  }
  return total;
}

Vector CcaModel::weights() const {
  Vector d(eigenvalues.size());
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    if (eigenvalues(k) < kEigenvalueFloor) {
      // 0^q, with 0^0 = 1 and negative q suppressing the direction instead of
      // blowing it up.
      d(k) = config.q == 0.0 ? 1.0 : 0.0;
    } else {
      d(k) = std::pow(eigenvalues(k), config.q);
    }
  }
  return d;
}

CenteredViews center_views(const std::vector<Matrix>& views) {
  require_views(views);
  CenteredViews out;
  out.views.reserve(views.size());
  out.means.reserve(views.size());
  for (const auto& x : views) {
    Vector mean = x.rowwise().mean();
    out.views.emplace_back(x.colwise() - mean);
    out.means.push_back(std::move(mean));
  }
  return out;
}

CorrelationBlocks correlation_matrices(const std::vector<Matrix>& centered,
                                       double epsilon) {
  require_views(centered);
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorKind::ConfigError, "epsilon must be finite and >= 0");
  }
  const Eigen::Index samples = centered.front().cols();

  CorrelationBlocks out;
  Eigen::Index total = 0;
  for (const auto& x : centered) {
    out.offsets.push_back(total);
    total += x.rows();
  }
  Matrix stacked(total, samples);
  for (std::size_t i = 0; i < centered.size(); ++i) {
    stacked.middleRows(out.offsets[i], centered[i].rows()) = centered[i];
  }

  out.a = stacked * stacked.transpose() / static_cast<double>(samples - 1);
  out.a = ((out.a + out.a.transpose()) / 2.0).eval();

  out.b = Matrix::Zero(total, total);
  for (std::size_t i = 0; i < centered.size(); ++i) {
    const Eigen::Index off = out.offsets[i];
    const Eigen::Index dim = centered[i].rows();
    auto block = out.a.block(off, off, dim, dim);
    const double ridge = epsilon * block.trace() / static_cast<double>(dim);
    block.diagonal().array() += ridge;
    out.b.block(off, off, dim, dim) = block;
  }
  return out;
}

void validate(const CcaConfig& config, const std::vector<ViewSpec>& specs) {
  if (specs.size() < 2 || specs.size() > kMaxViews) {
    throw Error(ErrorKind::ConfigError,
                "need between 2 and " + std::to_string(kMaxViews) +
                    " views, got " + std::to_string(specs.size()));
  }
  std::set<std::string> names;
  Eigen::Index min_dim = specs.front().dim;
  for (const auto& s : specs) {
    if (s.name.empty() || s.name.size() > 0xFFFF) {
      throw Error(ErrorKind::ConfigError, "view name must be 1..65535 bytes");
    }
    if (!names.insert(s.name).second) {
      throw Error(ErrorKind::ConfigError, "duplicate view name \"" + s.name + "\"");
    }
    if (s.dim < 1) {
      throw Error(ErrorKind::ConfigError, "view \"" + s.name + "\" has dim < 1");
    }
    min_dim = std::min(min_dim, s.dim);
  }
  if (config.p < 1 || config.p > min_dim) {
    throw Error(ErrorKind::ConfigError,
                "p = " + std::to_string(config.p) + " must satisfy 1 <= p <= " +
                    std::to_string(min_dim) + " (smallest view dimension)");
  }
  if (!std::isfinite(config.q)) {
    throw Error(ErrorKind::ConfigError, "q must be finite");
  }
  if (!(config.epsilon >= 0.0) || !std::isfinite(config.epsilon)) {
    throw Error(ErrorKind::ConfigError, "epsilon must be finite and >= 0");
  }
}

FitResult fit_detailed(const std::vector<Matrix>& views,
                       const std::vector<ViewSpec>& specs,
                       const CcaConfig& config) {
  validate(config, specs);
  if (views.size() != specs.size()) {
    throw Error(ErrorKind::ConfigError,
                std::to_string(views.size()) + " views but " +
                    std::to_string(specs.size()) + " view specs");
  }
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].rows() != specs[i].dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "view \"" + specs[i].name + "\" declared dim " +
                      std::to_string(specs[i].dim) + " but data has " +
                      std::to_string(views[i].rows()) + " rows");
    }
  }

  const CenteredViews centered = center_views(views);
  const CorrelationBlocks blocks = correlation_matrices(centered.views, config.epsilon);
  const EigenDecomposition<double> eig =
      linalg::generalized_symmetric_eigen(blocks.a, blocks.b);

  FitResult result;
  CcaModel& model = result.model;
  model.views = specs;
  model.config = config;
  model.sample_count = static_cast<std::uint64_t>(views.front().cols());
  model.eigenvalues = eig.eigenvalues.head(config.p);
  model.input_means = centered.means;

  // The eigenvectors are B-orthonormal, so the per-view Gram matrices sum to
  // I. Scaling by sqrt(m) makes each one I for two views and their average I
  // in general.
  const double scale = std::sqrt(static_cast<double>(views.size()));
  const Vector d = model.weights();
  for (std::size_t i = 0; i < views.size(); ++i) {
    model.projections.emplace_back(
        scale * eig.eigenvectors.block(blocks.offsets[i], 0, specs[i].dim, config.p));
    // Mean training embedding, one column at a time so a smaller p yields
    // the leading entries bit-for-bit.
    const Vector residual_mean = centered.views[i].rowwise().mean();
    Vector em(config.p);
    for (Eigen::Index k = 0; k < config.p; ++k) {
      em(k) = d(k) * model.projections[i].col(k).dot(residual_mean);
    }
    model.embedding_means.push_back(std::move(em));
  }
  result.spectrum = eig.eigenvalues;
  return result;
}

CcaModel fit(const std::vector<Matrix>& views, const std::vector<ViewSpec>& specs,
             const CcaConfig& config) {
  return fit_detailed(views, specs, config).model;
}

Vector embed(const CcaModel& model, std::string_view view,
             const Eigen::Ref<const Vector>& x) {
  const std::size_t i = model.view_index(view);
  if (x.size() != model.views[i].dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "view \"" + model.views[i].name + "\" expects dim " +
                    std::to_string(model.views[i].dim) + ", got " +
                    std::to_string(x.size()));
  }
  Vector centered = x - model.input_means[i];
  return model.weights().cwiseProduct(model.projections[i].transpose() * centered);
}

Matrix embed_columns(const CcaModel& model, std::string_view view,
                     const Eigen::Ref<const Matrix>& xs) {
  const std::size_t i = model.view_index(view);
  if (xs.rows() != model.views[i].dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "view \"" + model.views[i].name + "\" expects dim " +
                    std::to_string(model.views[i].dim) + ", got " +
                    std::to_string(xs.rows()));
  }
  Matrix centered = xs.colwise() - model.input_means[i];
  return model.weights().asDiagonal() * (model.projections[i].transpose() * centered);
}

void save_model(const CcaModel& model, const std::filesystem::path& path) {
  validate(model.config, model.views);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");

  binary::write_magic(out, kModelMagic);
  binary::write(out, kModelVersion);
  binary::write(out, static_cast<std::uint32_t>(model.views.size()));
  for (const auto& v : model.views) {
    binary::write(out, static_cast<std::uint16_t>(v.name.size()));
    out.write(v.name.data(), static_cast<std::streamsize>(v.name.size()));
    binary::write(out, static_cast<std::uint32_t>(v.dim));
  }
  binary::write(out, static_cast<std::uint32_t>(model.config.p));
  binary::write(out, model.config.q);
  binary::write(out, model.config.epsilon);
  binary::write(out, model.sample_count);
  for (Eigen::Index k = 0; k < model.eigenvalues.size(); ++k) {
    binary::write(out, model.eigenvalues(k));
  }
  for (std::size_t i = 0; i < model.views.size(); ++i) {
    for (Eigen::Index r = 0; r < model.input_means[i].size(); ++r) {
      binary::write(out, model.input_means[i](r));
    }
    for (Eigen::Index k = 0; k < model.embedding_means[i].size(); ++k) {
      binary::write(out, model.embedding_means[i](k));
    }
    const Matrix& w = model.projections[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) binary::write(out, w(r, c));
    }
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

CcaModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  binary::expect_magic(in, kModelMagic);
  const auto version = binary::read<std::uint32_t>(in, "version");
  if (version != kModelVersion) {
    throw Error(ErrorKind::FormatError,
                "unsupported model version " + std::to_string(version));
  }
  const auto m = binary::read<std::uint32_t>(in, "view count");
  if (m < 2 || m > kMaxViews) {
    throw Error(ErrorKind::FormatError, "view count " + std::to_string(m) + " out of range");
  }

  CcaModel model;
  for (std::uint32_t i = 0; i < m; ++i) {
    const auto len = binary::read<std::uint16_t>(in, "view name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) {
      throw Error(ErrorKind::FormatError, "unexpected end of file reading view name");
    }
    const auto dim = binary::read<std::uint32_t>(in, "view dim");
    model.views.push_back({std::move(name), static_cast<Eigen::Index>(dim)});
  }
  model.config.p = binary::read<std::uint32_t>(in, "p");
  model.config.q = binary::read<double>(in, "q");
  model.config.epsilon = binary::read<double>(in, "epsilon");
  model.sample_count = binary::read<std::uint64_t>(in, "sample count");
  try {
    validate(model.config, model.views);
  } catch (const Error& e) {
    throw Error(ErrorKind::FormatError, std::string("invalid header: ") + e.what());
  }

  const auto p = static_cast<std::uint64_t>(model.config.p);
  std::uint64_t doubles = p;
  for (const auto& v : model.views) {
    doubles += static_cast<std::uint64_t>(v.dim) * (1 + p) + p;
  }
  const auto header_end = static_cast<std::uint64_t>(in.tellg());
  if (file_size - header_end != doubles * sizeof(double)) {
    throw Error(ErrorKind::FormatError,
                "payload holds " + std::to_string(file_size - header_end) +
                    " bytes, header implies " + std::to_string(doubles * sizeof(double)));
  }

  model.eigenvalues.resize(model.config.p);
  for (Eigen::Index k = 0; k < model.config.p; ++k) {
    model.eigenvalues(k) = binary::read<double>(in, "eigenvalues");
  }
  for (const auto& v : model.views) {
    Vector mu(v.dim);
    for (Eigen::Index r = 0; r < v.dim; ++r) mu(r) = binary::read<double>(in, "input mean");
    Vector em(model.config.p);
    for (Eigen::Index k = 0; k < model.config.p; ++k) {
      em(k) = binary::read<double>(in, "embedding mean");
    }
    Matrix w(v.dim, model.config.p);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = binary::read<double>(in, "projection");
    }
    model.input_means.push_back(std::move(mu));
    model.embedding_means.push_back(std::move(em));
    model.projections.push_back(std::move(w));
  }
  return model;
}

}  // namespace mvcca
