#include "mvcca/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mvcca/binary_io.hpp"

namespace mvcca {

namespace {

constexpr char kFeatureMagic[5] = "VDF1";

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  binary::expect_magic(in, kFeatureMagic);
  const auto rows = binary::read<std::uint32_t>(in, "rows");
  const auto cols = binary::read<std::uint32_t>(in, "cols");
  if (rows == 0 || cols == 0) {
    throw Error(ErrorKind::FormatError, path.string() + ": empty dimensions " +
                                            std::to_string(rows) + "x" + std::to_string(cols));
  }
  const std::uint64_t expected = std::uint64_t{rows} * cols * sizeof(float);
  const std::uint64_t payload = file_size - 12;
  if (payload != expected) {
    throw Error(ErrorKind::FormatError,
                path.string() + ": header claims " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " (" + std::to_string(expected) +
                    " bytes) but payload holds " + std::to_string(payload) + " bytes");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = static_cast<double>(binary::read<float>(in, "payload"));
    }
  }
  return m;
}

void write_feature_matrix(const std::filesystem::path& path, const Matrix& m) {
  if (m.rows() < 1 || m.cols() < 1 || m.rows() > 0xFFFFFFFFLL || m.cols() > 0xFFFFFFFFLL) {
    throw Error(ErrorKind::FormatError, "feature matrix dimensions out of range");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  binary::write_magic(out, kFeatureMagic);
  binary::write(out, static_cast<std::uint32_t>(m.rows()));
  binary::write(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      binary::write(out, static_cast<float>(m(r, c)));
    }
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

void EmbeddingTable::insert(std::string token, Vector v) {
  if (v.size() < 1) throw Error(ErrorKind::FormatError, "empty vector for \"" + token + "\"");
  if (dim_ == 0) {
    dim_ = v.size();
  } else if (v.size() != dim_) {
    throw Error(ErrorKind::FormatError,
                "token \"" + token + "\" has " + std::to_string(v.size()) +
                    " values, table dimension is " + std::to_string(dim_));
  }
  auto [it, inserted] = vectors_.insert_or_assign(std::move(token), std::move(v));
  if (!inserted) ++duplicates_;
}

const Vector* EmbeddingTable::find(std::string_view token) const {
  if (vectors_.empty()) throw Error(ErrorKind::EmptyInput, "embedding table is empty");
  const auto it = vectors_.find(token);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::string_view rest(line);
    const auto token_end = rest.find(' ');
    if (token_end == std::string_view::npos || token_end == 0) {
      throw Error(ErrorKind::FormatError, at_line(path, line_no) + "expected token followed by values");
    }
    std::string token(rest.substr(0, token_end));
    rest.remove_prefix(token_end);

    values.clear();
    while (true) {
      const auto start = rest.find_first_not_of(' ');
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      const auto end = std::min(rest.find(' '), rest.size());
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + end, v);
      if (ec != std::errc() || ptr != rest.data() + end || !std::isfinite(v)) {
        throw Error(ErrorKind::FormatError,
                    at_line(path, line_no) + "cannot parse value \"" +
                        std::string(rest.substr(0, end)) + "\"");
      }
      values.push_back(v);
      rest.remove_prefix(end);
    }
    if (values.empty()) {
      throw Error(ErrorKind::FormatError, at_line(path, line_no) + "token without values");
    }
    try {
      table.insert(std::move(token), Eigen::Map<const Vector>(values.data(),
                                                              static_cast<Eigen::Index>(values.size())));
    } catch (const Error& e) {
      throw Error(ErrorKind::FormatError, at_line(path, line_no) + e.what());
    }
  }
  return table;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto byte = static_cast<unsigned char>(ch);
    const bool word = byte >= 0x80 || (byte >= '0' && byte <= '9') ||
                      (byte >= 'a' && byte <= 'z') || (byte >= 'A' && byte <= 'Z');
    if (word) {
      current.push_back(byte >= 'A' && byte <= 'Z' ? static_cast<char>(byte - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Pooling parse_pooling(std::string_view name) {
  if (name == "present-mean") return Pooling::PresentMean;
  if (name == "fixed-16" || name == "fixed") return Pooling::Fixed;
  throw Error(ErrorKind::ConfigError, "unknown pooling \"" + std::string(name) +
                                          "\" (expected present-mean or fixed-16)");
}

Vector sentence_embedding(const std::vector<std::string>& tokens,
                          const EmbeddingTable& table, std::size_t max_len,
                          Pooling pooling) {
  if (table.empty()) throw Error(ErrorKind::EmptyInput, "embedding table is empty");
  Vector sum = Vector::Zero(table.dim());
  std::size_t present = 0;
  const std::size_t window = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < window; ++i) {
    if (const Vector* v = table.find(tokens[i])) {
      sum += *v;
      ++present;
    }
  }
  if (present == 0) return sum;
  const std::size_t divisor = pooling == Pooling::PresentMean ? present : max_len;
  return sum / static_cast<double>(divisor);
}

// ---------------------------------------------------------------------------

void validate(const CandidateRecord& record, std::size_t candidate_count) {
  const std::size_t n = record.candidate_rows.size();
  if (n == 0) throw Error(ErrorKind::FormatError, "candidate_rows is empty");
  if (n != candidate_count) {
    throw Error(ErrorKind::FormatError,
                "expected " + std::to_string(candidate_count) + " candidates, got " +
                    std::to_string(n));
  }
  if (record.gt_index >= n) {
    throw Error(ErrorKind::FormatError,
                "gt_index " + std::to_string(record.gt_index) + " out of range for " +
                    std::to_string(n) + " candidates");
  }
  if (record.relevance) {
    if (record.relevance->size() != n) {
      throw Error(ErrorKind::FormatError,
                  "relevance has " + std::to_string(record.relevance->size()) +
                      " entries for " + std::to_string(n) + " candidates");
    }
    for (const double r : *record.relevance) {
      if (!(r >= 0.0 && r <= 1.0)) {
        throw Error(ErrorKind::FormatError, "relevance value outside [0, 1]");
      }
    }
  }
}

namespace {

CandidateRecord parse_record(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::FormatError, "line is not a JSON object");
  CandidateRecord r;
  const auto& id = j.at("question_id");
  if (id.is_string()) {
    r.question_id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    r.question_id = id.dump();
  } else {
    throw Error(ErrorKind::FormatError, "question_id must be a string or integer");
  }
  r.question_row = j.at("question_row").get<std::uint64_t>();
  r.candidate_rows = j.at("candidate_rows").get<std::vector<std::uint64_t>>();
  r.gt_index = j.at("gt_index").get<std::uint64_t>();
  if (const auto it = j.find("relevance"); it != j.end() && !it->is_null()) {
    r.relevance = it->get<std::vector<double>>();
  }
  return r;
}

}  // namespace

std::vector<CandidateRecord> read_candidates(const std::filesystem::path& path,
                                             std::optional<std::size_t> candidate_count) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<CandidateRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      CandidateRecord r = parse_record(nlohmann::json::parse(line));
      if (!candidate_count) candidate_count = r.candidate_rows.size();
      validate(r, *candidate_count);
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::FormatError, at_line(path, line_no) + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::FormatError, at_line(path, line_no) + e.what());
    }
  }
  return records;
}

void write_candidates(const std::filesystem::path& path,
                      const std::vector<CandidateRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["question_id"] = r.question_id;
    j["question_row"] = r.question_row;
    j["candidate_rows"] = r.candidate_rows;
    j["gt_index"] = r.gt_index;
    if (r.relevance) j["relevance"] = *r.relevance;
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------

void validate(const SynthConfig& c) {
  if (c.dims.size() < 2 || c.dims.size() > 3) {
    throw Error(ErrorKind::ConfigError, "synth needs 2 or 3 view dims (question, answer[, image])");
  }
  if (c.latent_dim < 1) throw Error(ErrorKind::ConfigError, "latent_dim must be >= 1");
  for (const auto d : c.dims) {
    if (d < c.latent_dim) {
      throw Error(ErrorKind::ConfigError, "latent_dim exceeds a view dimension");
    }
  }
  if (c.rho.size() != static_cast<std::size_t>(c.latent_dim)) {
    throw Error(ErrorKind::ConfigError, "need one rho per latent direction (" +
                                            std::to_string(c.latent_dim) + "), got " +
                                            std::to_string(c.rho.size()));
  }
  for (const double r : c.rho) {
    if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorKind::ConfigError, "rho must lie in [0, 1)");
  }
  if (c.samples < 2) throw Error(ErrorKind::ConfigError, "samples must be >= 2");
  if (c.candidate_count < 1) throw Error(ErrorKind::ConfigError, "candidate_count must be >= 1");
  if (c.question_count < 0 ||
      (c.question_count > 0 && static_cast<std::size_t>(c.question_count) < c.candidate_count)) {
    throw Error(ErrorKind::ConfigError,
                "question_count must be 0 or at least candidate_count");
  }
  if (!(c.noise_scale > 0.0) || !std::isfinite(c.noise_scale)) {
    throw Error(ErrorKind::ConfigError, "noise scale must be positive");
  }
}

SynthData synth_generate(const SynthConfig& c) {
  validate(c);
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t views = c.dims.size();

  std::vector<Matrix> lifts;
  for (const auto d : c.dims) {
    Matrix g(d, d);
    for (Eigen::Index j = 0; j < d; ++j) {
      for (Eigen::Index i = 0; i < d; ++i) g(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    lifts.emplace_back(qr.householderQ());
  }

  const auto draw = [&](Eigen::Index count, Matrix& latents) {
    std::vector<Matrix> out;
    for (const auto d : c.dims) out.emplace_back(d, count);
    latents.resize(c.latent_dim, count);
    Vector z(c.latent_dim);
    for (Eigen::Index s = 0; s < count; ++s) {
      for (Eigen::Index k = 0; k < c.latent_dim; ++k) z(k) = normal(rng);
      latents.col(s) = z;
      for (std::size_t v = 0; v < views; ++v) {
        Vector signal(c.dims[v]);
        for (Eigen::Index k = 0; k < c.dims[v]; ++k) {
          const double e = normal(rng);
          if (k < c.latent_dim) {
            const double r = c.rho[static_cast<std::size_t>(k)];
            signal(k) = std::sqrt(r) * z(k) + std::sqrt(1.0 - r) * e;
          } else {
            signal(k) = e;
          }
        }
        out[v].col(s) = c.noise_scale * (lifts[v] * signal);
      }
    }
    return out;
  };

  SynthData data;
  Matrix train_latents;
  Matrix test_latents;
  data.train = draw(c.samples, train_latents);
  data.test = draw(c.question_count, test_latents);

  const auto count = static_cast<std::uint64_t>(c.question_count);
  const std::size_t width = std::max<std::size_t>(6, std::to_string(count).size());
  std::uniform_int_distribution<std::uint64_t> pick_row(0, count == 0 ? 0 : count - 1);
  std::uniform_int_distribution<std::uint64_t> pick_slot(0, c.candidate_count - 1);
  for (std::uint64_t j = 0; j < count; ++j) {
    CandidateRecord rec;
    std::string id = std::to_string(j);
    rec.question_id = "q" + std::string(width - id.size(), '0') + id;
    rec.question_row = j;

    std::set<std::uint64_t> used{j};
    std::vector<std::uint64_t> distractors;
    while (distractors.size() + 1 < c.candidate_count) {
      const std::uint64_t r = pick_row(rng);
      if (used.insert(r).second) distractors.push_back(r);
    }
    rec.gt_index = pick_slot(rng);
    rec.candidate_rows = std::move(distractors);
    rec.candidate_rows.insert(rec.candidate_rows.begin() + static_cast<std::ptrdiff_t>(rec.gt_index), j);

    if (c.relevance) {
      std::vector<double> rel;
      const auto zq = test_latents.col(static_cast<Eigen::Index>(j));
      for (const auto row : rec.candidate_rows) {
        if (row == j) {
          rel.push_back(1.0);
          continue;
        }
        const auto za = test_latents.col(static_cast<Eigen::Index>(row));
        const double denom = zq.norm() * za.norm();
        const double cosine = denom > 0.0 ? zq.dot(za) / denom : 0.0;
        rel.push_back(std::clamp(cosine, 0.0, 1.0));
      }
      rec.relevance = std::move(rel);
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

}  // namespace mvcca
