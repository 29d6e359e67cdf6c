#include "mvcca/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvcca/parallel.hpp"
#include "mvcca/ranking.hpp"

namespace mvcca::cli {

namespace {

namespace fs = std::filesystem;

const fs::path& required(const std::optional<fs::path>& path, const char* flag) {
  if (!path) throw Error(ErrorKind::ConfigError, std::string("missing required flag ") + flag);
  return *path;
}

void require_inputs(std::initializer_list<const std::optional<fs::path>*> paths) {
  for (const auto* p : paths) {
    if (*p && !fs::is_regular_file(**p)) {
      throw Error(ErrorKind::IoError, "input file not found: " + (*p)->string());
    }
  }
}

/// Feature files store one sample per row; the library wants samples in columns.
Matrix load_samples(const fs::path& path) { return read_feature_matrix(path).transpose(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

void check_rows(const CandidateRecord& r, Eigen::Index questions, Eigen::Index answers) {
  if (r.question_row >= static_cast<std::uint64_t>(questions)) {
    throw Error(ErrorKind::DimensionMismatch,
                "question " + r.question_id + ": question_row " + std::to_string(r.question_row) +
                    " out of bounds for " + std::to_string(questions) + " questions");
  }
  for (const auto row : r.candidate_rows) {
    if (row >= static_cast<std::uint64_t>(answers)) {
      throw Error(ErrorKind::DimensionMismatch,
                  "question " + r.question_id + ": candidate row " + std::to_string(row) +
                      " out of bounds for " + std::to_string(answers) + " answers");
    }
  }
}

nlohmann::ordered_json rank_json(const RankResult& r, const CandidateRecord& rec) {
  nlohmann::ordered_json j;
  j["question_id"] = rec.question_id;
  j["order"] = r.order;
  std::vector<std::uint64_t> rows;
  for (const auto pos : r.order) rows.push_back(rec.candidate_rows[pos]);
  j["candidate_rows"] = rows;
  j["scores"] = r.scores;
  j["gt_rank"] = r.gt_rank;
  return j;
}

QuestionOutcome outcome_of(const RankResult& r, const CandidateRecord& rec) {
  QuestionOutcome o;
  o.question_id = rec.question_id;
  o.gt_rank = r.gt_rank;
  if (rec.relevance) {
    std::vector<double> ranked;
    for (const auto pos : r.order) ranked.push_back((*rec.relevance)[pos]);
    o.ranked_relevance = std::move(ranked);
  }
  std::vector<double> by_position(r.order.size());
  for (std::size_t i = 0; i < r.order.size(); ++i) by_position[r.order[i]] = r.scores[i];
  o.correlations = QuestionCorrelations{by_position, by_position[rec.gt_index]};
  return o;
}

bool all_have_relevance(const std::vector<CandidateRecord>& records) {
  return std::all_of(records.begin(), records.end(),
                     [](const CandidateRecord& r) { return r.relevance.has_value(); });
}

void emit_report(const RunConfig& c, const EvalReport& report, const std::string& label,
                 std::ostream& out, std::ostream& err) {
  if (c.out) {
    write_text(*c.out, to_json(report));
    out << to_table(report, label);
  } else {
    out << to_json(report);
    err << to_table(report, label);
  }
}

std::string join(const std::vector<Eigen::Index>& xs) {
  std::string s;
  for (const auto x : xs) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

}  // namespace

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  required(c.questions, "--questions");
  required(c.answers, "--answers");
  const fs::path& model_path = required(c.out, "--out");
  require_inputs({&c.questions, &c.answers, &c.images});

  std::vector<Matrix> views;
  std::vector<ViewSpec> specs;
  const auto add = [&](const fs::path& path, const char* name) {
    views.push_back(load_samples(path));
    specs.push_back({name, views.back().rows()});
    if (c.verbose) {
      err << "loaded " << name << ": " << views.back().cols() << " samples x "
          << views.back().rows() << " dims\n";
    }
  };
  add(*c.answers, "answer");
  add(*c.questions, "question");
  if (c.images) add(*c.images, "image");

  const auto start = std::chrono::steady_clock::now();
  const FitResult fitted = fit_detailed(views, specs, c.cca);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_model(fitted.model, model_path);

  const CcaModel& m = fitted.model;
  out << "views:";
  for (const auto& v : m.views) out << ' ' << v.name << '=' << v.dim;
  out << "\np=" << m.config.p << " q=" << m.config.q << " epsilon=" << m.config.epsilon
      << " samples=" << m.sample_count << "\neigenvalues:";
  char buf[32];
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(5, m.eigenvalues.size()); ++k) {
    std::snprintf(buf, sizeof buf, " %.6f", m.eigenvalues(k));
    out << buf;
  }
  out << "\nparameters: " << m.parameter_count() << "\n";
  std::snprintf(buf, sizeof buf, "%.3f", seconds);
  err << "fit time: " << buf << " s\n";
  return 0;
}

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  required(c.model, "--model");
  required(c.questions, "--questions");
  required(c.answers, "--answers");
  required(c.candidates, "--candidates");
  require_inputs({&c.model, &c.questions, &c.answers, &c.candidates});

  const CcaModel model = load_model(*c.model);
  const Matrix questions = load_samples(*c.questions);
  const Matrix answers = load_samples(*c.answers);
  const auto records = read_candidates(*c.candidates);
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "candidate file has no records");
  const bool want_ndcg = c.ndcg || all_have_relevance(records);
  if (c.ndcg && !all_have_relevance(records)) {
    throw Error(ErrorKind::ConfigError,
                "--ndcg needs relevance scores on every candidate record; " +
                    c.candidates->string() + " lacks them");
  }
  for (const auto& r : records) check_rows(r, questions.cols(), answers.cols());

  const Matrix unit_q = unit_embeddings(model, "question", questions);
  const Matrix unit_a = unit_embeddings(model, "answer", answers);
  if (c.verbose) err << "ranking " << records.size() << " questions\n";

  std::vector<QuestionOutcome> outcomes(records.size());
  parallel_for(records.size(), c.threads, [&](std::size_t i) {
    const auto& rec = records[i];
    const RankResult r = rank_embedded(unit_q.col(static_cast<Eigen::Index>(rec.question_row)),
                                       unit_a, rec.candidate_rows, rec.gt_index, rec.question_id);
    outcomes[i] = outcome_of(r, rec);
  });

  const EvalReport report =
      build_report(std::move(outcomes), {.ndcg = want_ndcg, .otsu = c.otsu, .otsu_bins = c.bins});
  emit_report(c, report, model.views.size() > 2 ? "CCA A-QI (Q)" : "CCA A-Q", out, err);
  return 0;
}

int cmd_rank(const RunConfig& c, std::ostream& out, std::ostream& err) {
  required(c.model, "--model");
  required(c.questions, "--questions");
  required(c.answers, "--answers");
  required(c.candidates, "--candidates");
  require_inputs({&c.model, &c.questions, &c.answers, &c.candidates});

  const CcaModel model = load_model(*c.model);
  const Matrix questions = load_samples(*c.questions);
  const Matrix answers = load_samples(*c.answers);
  const auto records = read_candidates(*c.candidates);
  for (const auto& r : records) check_rows(r, questions.cols(), answers.cols());
  const Matrix unit_q = unit_embeddings(model, "question", questions);
  const Matrix unit_a = unit_embeddings(model, "answer", answers);

  std::vector<std::string> lines(records.size());
  parallel_for(records.size(), c.threads, [&](std::size_t i) {
    const auto& rec = records[i];
    const RankResult r = rank_embedded(unit_q.col(static_cast<Eigen::Index>(rec.question_row)),
                                       unit_a, rec.candidate_rows, rec.gt_index, rec.question_id);
    lines[i] = rank_json(r, rec).dump();
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  if (c.out) {
    write_text(*c.out, text);
  } else {
    out << text;
  }
  if (c.verbose) err << "ranked " << records.size() << " questions\n";
  return 0;
}

int cmd_nn_retrieve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  required(c.model, "--model");
  required(c.queries, "--queries");
  required(c.train_questions, "--train-questions");
  required(c.train_answers, "--train-answers");
  require_inputs({&c.model, &c.queries, &c.train_questions, &c.train_answers});

  auto model = std::make_shared<const CcaModel>(load_model(*c.model));
  const Matrix queries = load_samples(*c.queries);
  const NnRetriever retriever(model, load_samples(*c.train_questions),
                              load_samples(*c.train_answers));
  if (c.k > retriever.bank_size()) {
    err << "warning: k = " << c.k << " exceeds the bank size; using k = "
        << retriever.bank_size() << "\n";
  }

  std::vector<std::string> lines(static_cast<std::size_t>(queries.cols()));
  parallel_for(lines.size(), c.threads, [&](std::size_t i) {
    const RetrievalResult r = retriever.retrieve(queries.col(static_cast<Eigen::Index>(i)), c.k, c.top);
    nlohmann::ordered_json j;
    j["question_id"] = std::to_string(i);
    j["rows"] = r.rows;
    j["scores"] = r.scores;
    j["k"] = r.k_used;
    lines[i] = j.dump();
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  if (c.out) {
    write_text(*c.out, text);
  } else {
    out << text;
  }
  return 0;
}

int cmd_nn_baseline(const RunConfig& c, std::ostream& out, std::ostream& err) {
  required(c.train_questions, "--train-questions");
  required(c.train_answers, "--train-answers");
  required(c.questions, "--questions");
  required(c.answers, "--answers");
  required(c.candidates, "--candidates");
  if (c.images.has_value() != c.train_images.has_value()) {
    throw Error(ErrorKind::ConfigError, "--images and --train-images must be given together");
  }
  require_inputs({&c.train_questions, &c.train_answers, &c.train_images, &c.questions,
                  &c.answers, &c.images, &c.candidates, &c.model});

  std::shared_ptr<const CcaModel> model;
  if (c.model) model = std::make_shared<const CcaModel>(load_model(*c.model));
  std::optional<Matrix> train_images;
  if (c.train_images) train_images = load_samples(*c.train_images);
  const NnBaseline baseline(model, load_samples(*c.train_questions),
                            load_samples(*c.train_answers), std::move(train_images));
  if (c.k > baseline.bank_size()) {
    err << "warning: k = " << c.k << " exceeds the bank size; using k = "
        << baseline.bank_size() << "\n";
  }

  const Matrix questions = load_samples(*c.questions);
  const Matrix answers = load_samples(*c.answers);
  std::optional<Matrix> images;
  if (c.images) images = load_samples(*c.images);
  const auto records = read_candidates(*c.candidates);
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "candidate file has no records");
  for (const auto& r : records) {
    check_rows(r, questions.cols(), answers.cols());
    if (images && r.question_row >= static_cast<std::uint64_t>(images->cols())) {
      throw Error(ErrorKind::DimensionMismatch,
                  "question " + r.question_id + ": no image row " + std::to_string(r.question_row));
    }
  }
  const Matrix answer_reps = baseline.answer_representation(answers);
  (void)answer_reps;

  std::vector<std::string> lines(records.size());
  std::vector<QuestionOutcome> outcomes(records.size());
  parallel_for(records.size(), c.threads, [&](std::size_t i) {
    const auto& rec = records[i];
    Matrix candidates(answers.rows(), static_cast<Eigen::Index>(rec.candidate_rows.size()));
    for (std::size_t j = 0; j < rec.candidate_rows.size(); ++j) {
      candidates.col(static_cast<Eigen::Index>(j)) =
          answers.col(static_cast<Eigen::Index>(rec.candidate_rows[j]));
    }
    std::optional<Vector> image;
    if (images) image = images->col(static_cast<Eigen::Index>(rec.question_row));
    RankResult r = baseline.rank(questions.col(static_cast<Eigen::Index>(rec.question_row)), image,
                                 candidates, rec.gt_index, c.k);
    r.question_id = rec.question_id;
    lines[i] = rank_json(r, rec).dump();
    outcomes[i] = outcome_of(r, rec);
  });

  std::string text;
  for (const auto& l : lines) text += l + "\n";
  if (c.out) {
    write_text(*c.out, text);
  } else {
    out << text;
  }
  const EvalReport report = build_report(
      std::move(outcomes), {.ndcg = c.ndcg || all_have_relevance(records), .otsu = false});
  if (c.report) write_text(*c.report, to_json(report));
  err << to_table(report, baseline.uses_images() ? "NN-A-QI" : "NN-A-Q");
  return 0;
}

int cmd_synth(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const fs::path& dir = required(c.out, "--out");
  SynthConfig config = c.synth;
  config.seed = c.seed;
  const SynthData data = synth_generate(config);
  fs::create_directories(dir);

  static constexpr const char* kNames[] = {"questions", "answers", "images"};
  for (std::size_t v = 0; v < data.train.size(); ++v) {
    const fs::path train = dir / ("train_" + std::string(kNames[v]) + ".vdf");
    write_feature_matrix(train, data.train[v].transpose());
    out << train.string() << "\n";
    if (data.test[v].cols() > 0) {
      const fs::path test = dir / ("test_" + std::string(kNames[v]) + ".vdf");
      write_feature_matrix(test, data.test[v].transpose());
      out << test.string() << "\n";
    }
  }
  if (!data.records.empty()) {
    const fs::path cand = dir / "test_candidates.jsonl";
    write_candidates(cand, data.records);
    out << cand.string() << "\n";
  }
  if (c.verbose) {
    err << "synth: dims " << join(config.dims) << ", " << config.samples << " train samples, "
        << data.records.size() << " test questions\n";
  }
  return 0;
}

int cmd_pool_text(const RunConfig& c, std::ostream& out, std::ostream& err) {
  required(c.text, "--text");
  required(c.table, "--table");
  const fs::path& dest = required(c.out, "--out");
  require_inputs({&c.text, &c.table});

  const EmbeddingTable table = load_embedding_table(*c.table);
  if (table.empty()) throw Error(ErrorKind::EmptyInput, "embedding table is empty");
  if (table.duplicate_count() > 0) {
    err << "warning: " << table.duplicate_count() << " duplicate tokens (last occurrence kept)\n";
  }
  std::ifstream in(*c.text);
  std::vector<Vector> rows;
  std::string line;
  while (std::getline(in, line)) {
    rows.push_back(sentence_embedding(tokenize(line), table, c.max_tokens, c.pooling));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyInput, "text file has no lines");
  Matrix m(static_cast<Eigen::Index>(rows.size()), table.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  write_feature_matrix(dest, m);
  out << dest.string() << ": " << m.rows() << " x " << m.cols() << "\n";
  return 0;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view CCA for question/answer(/image) ranking"};
  app.require_subcommand(1);
  RunConfig c;
  if (const char* env = std::getenv("MVCCA_THREADS")) {
    try {
      c.threads = std::max<std::size_t>(1, std::stoul(env));
    } catch (const std::exception&) {
      err << "warning: ignoring unparsable MVCCA_THREADS\n";
      c.threads = default_thread_count();
    }
  } else {
    c.threads = default_thread_count();
  }
  std::string pooling = "present-mean";
  Eigen::Index p = c.cca.p;
  std::vector<Eigen::Index> dims = c.synth.dims;
  Eigen::Index latent = c.synth.latent_dim;
  Eigen::Index samples = c.synth.samples;
  Eigen::Index num_questions = c.synth.question_count;

  const auto path_opt = [](CLI::App* sub, const std::string& name,
                           std::optional<fs::path>& target, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&target](const std::string& v) { target = fs::path(v); }, help);
  };
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--threads", c.threads, "worker threads (default: MVCCA_THREADS or cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_flag("--verbose", c.verbose, "progress lines on stderr");
    path_opt(sub, "--out", c.out, "output path");
  };
  const auto cca_opts = [&](CLI::App* sub) {
    sub->add_option("--p", p, "projection dimension");
    sub->add_option("--q", c.cca.q, "eigenvalue weighting exponent");
    sub->add_option("--epsilon", c.cca.epsilon, "relative ridge on the diagonal blocks");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit an A-Q (or A-QI with --images) model");
  path_opt(fit_cmd, "--questions", c.questions, "question features (VDF1)");
  path_opt(fit_cmd, "--answers", c.answers, "answer features (VDF1)");
  path_opt(fit_cmd, "--images", c.images, "image features (VDF1), enables A-QI");
  cca_opts(fit_cmd);
  common(fit_cmd);

  CLI::App* eval_cmd = app.add_subcommand("evaluate", "rank candidate sets and report metrics");
  CLI::App* rank_cmd = app.add_subcommand("rank", "write ranked candidates as JSON lines");
  for (CLI::App* sub : {eval_cmd, rank_cmd}) {
    path_opt(sub, "--model", c.model, "model file");
    path_opt(sub, "--questions", c.questions, "question features (VDF1)");
    path_opt(sub, "--answers", c.answers, "answer features (VDF1)");
    path_opt(sub, "--candidates", c.candidates, "candidate sets (JSON lines)");
    common(sub);
  }
  eval_cmd->add_flag("--otsu", c.otsu, "run the Otsu equivalence-class analysis");
  eval_cmd->add_flag("--ndcg", c.ndcg, "require relevance scores and report NDCG");
  eval_cmd->add_option("--bins", c.bins, "Otsu histogram bins")->check(CLI::Range(2, 1 << 20));

  CLI::App* retrieve_cmd =
      app.add_subcommand("nn-retrieve", "answers of the k most correlated training questions");
  path_opt(retrieve_cmd, "--model", c.model, "model file");
  path_opt(retrieve_cmd, "--queries", c.queries, "query question features (VDF1)");
  path_opt(retrieve_cmd, "--train-questions", c.train_questions, "training questions (VDF1)");
  path_opt(retrieve_cmd, "--train-answers", c.train_answers, "training answers (VDF1)");
  retrieve_cmd->add_option("--k", c.k, "neighbour count")->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--top", c.top, "results kept per query")->check(CLI::PositiveNumber);
  common(retrieve_cmd);

  CLI::App* baseline_cmd =
      app.add_subcommand("nn-baseline", "nearest-neighbour ranking baseline (NN-A-Q / NN-A-QI)");
  path_opt(baseline_cmd, "--model", c.model, "optional model; raw features when absent");
  path_opt(baseline_cmd, "--questions", c.questions, "test question features (VDF1)");
  path_opt(baseline_cmd, "--answers", c.answers, "test answer features (VDF1)");
  path_opt(baseline_cmd, "--images", c.images, "test image features (VDF1), enables NN-A-QI");
  path_opt(baseline_cmd, "--candidates", c.candidates, "candidate sets (JSON lines)");
  path_opt(baseline_cmd, "--train-questions", c.train_questions, "training questions (VDF1)");
  path_opt(baseline_cmd, "--train-answers", c.train_answers, "training answers (VDF1)");
  path_opt(baseline_cmd, "--train-images", c.train_images, "training images (VDF1)");
  path_opt(baseline_cmd, "--report", c.report, "write the metric report (JSON) here");
  baseline_cmd->add_option("--k", c.k, "neighbour count")->check(CLI::PositiveNumber);
  baseline_cmd->add_flag("--ndcg", c.ndcg, "require relevance scores and report NDCG");
  common(baseline_cmd);

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset directory");
  synth_cmd->add_option("--dims", dims, "question,answer[,image] dimensions")->delimiter(',');
  synth_cmd->add_option("--latent-dim", latent, "shared latent dimension");
  synth_cmd->add_option("--rho", c.synth.rho, "target correlation per latent direction")
      ->delimiter(',');
  synth_cmd->add_option("--samples", samples, "training samples");
  synth_cmd->add_option("--num-questions", num_questions, "held-out questions");
  synth_cmd->add_option("--num-candidates", c.synth.candidate_count, "candidates per question");
  synth_cmd->add_option("--noise", c.synth.noise_scale, "feature scale");
  synth_cmd->add_flag("--relevance", c.synth.relevance, "emit graded relevance scores");
  common(synth_cmd);

  CLI::App* pool_cmd = app.add_subcommand("pool-text", "mean-pool token vectors per text line");
  path_opt(pool_cmd, "--text", c.text, "one sentence per line");
  path_opt(pool_cmd, "--table", c.table, "token embedding table");
  pool_cmd->add_option("--pooling", pooling, "present-mean | fixed-16");
  pool_cmd->add_option("--max-tokens", c.max_tokens, "truncation length");
  common(pool_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    c.cca.p = p;
    c.pooling = parse_pooling(pooling);
    c.synth.dims = dims;
    c.synth.latent_dim = latent;
    c.synth.samples = samples;
    c.synth.question_count = num_questions;
    if (fit_cmd->parsed()) return cmd_fit(c, out, err);
    if (eval_cmd->parsed()) return cmd_evaluate(c, out, err);
    if (rank_cmd->parsed()) return cmd_rank(c, out, err);
    if (retrieve_cmd->parsed()) return cmd_nn_retrieve(c, out, err);
    if (baseline_cmd->parsed()) return cmd_nn_baseline(c, out, err);
    if (synth_cmd->parsed()) return cmd_synth(c, out, err);
    if (pool_cmd->parsed()) return cmd_pool_text(c, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mvcca"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mvcca::cli
