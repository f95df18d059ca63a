#include "pgen/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "pgen/analysis.hpp"
#include "pgen/checkpoint.hpp"
#include "pgen/corpus.hpp"
#include "pgen/error.hpp"
#include "pgen/generator.hpp"
#include "pgen/gradcheck.hpp"
#include "pgen/trainer.hpp"
#include "pgen/utf8.hpp"

namespace pgen::cli {

namespace {

struct TrainOptions {
  std::vector<std::string> corpora;
  std::size_t epochs = 500;
  std::size_t window = 20;
  std::string preset = "deep";
  std::string cell = "gru";
  std::size_t hidden = 256;
  std::size_t dense = 128;
  double dropout = 0.2;
  std::size_t batch = 32;
  double lr = 1e-3;
  double clip = 5.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string curve;
  std::size_t checkpoint_every = 0;
  double holdout = 0.0;
  std::string normalize = "on";
};

struct GenerateOptions {
  std::string model;
  std::string seed_text;
  std::string seed_file;
  std::size_t limit = 200;
  std::string mode = "temp";
  double temperature = 0.8;
  std::uint64_t seed = 1;
  std::string out;
};

struct AnalyzeOptions {
  std::string real;
  std::string generated;
  std::size_t top_k = 50;
  std::string out_prefix;
  std::string normalize = "on";
};

struct GradcheckOptions {
  std::string preset = "all";
  std::string cell = "all";
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  std::size_t points = 3;
};

Normalization parse_normalization(const std::string& text) {
  return text == "off" ? Normalization::kOff : Normalization::kOn;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return std::string{std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) throw Error(ErrorCode::kIo, "write failed for " + path);
}

int run_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  const Normalization normalization = parse_normalization(o.normalize);
  CorpusText corpus = load_corpus(o.corpora.front(), normalization);
  for (std::size_t i = 1; i < o.corpora.size(); ++i) {
    corpus = merge_corpora(corpus, load_corpus(o.corpora[i], normalization));
  }
  const Vocabulary vocab = build_vocabulary(corpus);
  const PatternDataset dataset = extract_patterns(corpus, vocab, {o.window});

  NetworkConfig config;
  config.preset = parse_preset(o.preset);
  config.cell = parse_cell(o.cell);
  config.vocab_size = vocab.size();
  config.hidden1 = config.hidden2 = o.hidden;
  config.dense1 = config.dense2 = o.dense;
  config.dropout = o.dropout;
  config.window_length = o.window;
  config.validate();

  TrainConfig train_cfg;
  train_cfg.epochs = o.epochs;
  train_cfg.batch_size = o.batch;
  train_cfg.adam.learning_rate = o.lr;
  train_cfg.clip_norm = o.clip;
  train_cfg.shuffle_seed = derive_seed(o.seed, 2);
  train_cfg.checkpoint_every = o.checkpoint_every;
  train_cfg.holdout_fraction = o.holdout;
  train_cfg.validate();

  err << "config: corpora=" << o.corpora.size() << " characters=" << corpus.size()
      << " vocab=" << vocab.size() << " patterns=" << dataset.size()
      << " preset=" << to_string(config.preset) << " cell=" << to_string(config.cell)
      << " window=" << config.window_length << " hidden=" << config.hidden1
      << " dense=" << config.dense1 << " dropout=" << config.dropout
      << " params=" << parameter_count(config) << " epochs=" << train_cfg.epochs
      << " batch=" << train_cfg.batch_size << " lr=" << train_cfg.adam.learning_rate
      << " beta1=" << train_cfg.adam.beta1 << " beta2=" << train_cfg.adam.beta2
      << " eps=" << train_cfg.adam.epsilon << " clip=" << train_cfg.clip_norm
      << " holdout=" << train_cfg.holdout_fraction << " normalize=" << o.normalize
      << " seed-rng=" << o.seed << " out=" << o.out << '\n';

  TrainState state = TrainState::fresh(config, o.seed);
  auto snapshot = [&]() {
    Checkpoint c;
    c.config = config;
    c.normalization = normalization;
    c.vocab = vocab;
    c.params = state.params;
    c.adam = state.adam;
    c.epoch = state.epoch;
    c.rng_state = state.rng.state();
    save_checkpoint(c, o.out);
  };

  LearningCurve curve;
  for (std::size_t e = 0; e < train_cfg.epochs; ++e) {
    const EpochReport r = train_epoch(dataset, state, config, train_cfg);
    curve.push_back(r);
    err << "epoch " << r.epoch_index << " loss " << r.mean_loss << " accuracy "
        << r.accuracy;
    if (r.holdout_accuracy) err << " holdout " << *r.holdout_accuracy;
    err << " seconds " << r.wall_seconds << '\n';
    if (train_cfg.checkpoint_every > 0 && r.epoch_index % train_cfg.checkpoint_every == 0) {
      snapshot();
    }
  }
  snapshot();
  if (!o.curve.empty()) emit_learning_curve(curve, o.curve);
  out << "saved " << o.out << " after " << state.epoch << " epochs, final accuracy "
      << curve.back().accuracy << '\n';
  return kExitOk;
}

int run_generate(const GenerateOptions& o, std::ostream& out, std::ostream& err) {
  const Checkpoint model = load_checkpoint(o.model);
  const std::string seed_bytes = o.seed_file.empty() ? o.seed_text : read_bytes(o.seed_file);

  GenerationRequest request;
  request.seed = normalize_text(utf8::decode(seed_bytes), model.normalization);
  request.limit = o.limit;
  request.mode = o.mode == "greedy" ? DecodeMode::kGreedy : DecodeMode::kTemperature;
  request.temperature = o.temperature;
  request.rng_seed = o.seed;

  err << "config: model=" << o.model << " limit=" << request.limit << " mode=" << o.mode
      << " temperature=" << request.temperature << " seed-rng=" << request.rng_seed
      << " window=" << model.config.window_length << " vocab=" << model.vocab.size() << '\n';

  const GenerationResult result = generate(model.params, model.config, model.vocab, request);
  const std::string text = utf8::encode(result.text);
  if (o.out.empty()) {
    out << text;
    out.flush();
  } else {
    write_bytes(o.out, text);
  }
  return kExitOk;
}

int run_analyze(const AnalyzeOptions& o, std::ostream& out, std::ostream& err) {
  const Normalization normalization = parse_normalization(o.normalize);
  const CorpusText real = load_corpus(o.real, normalization);
  const CorpusText generated = load_corpus(o.generated, normalization);
  err << "config: real=" << o.real << " generated=" << o.generated << " top-k=" << o.top_k
      << " normalize=" << o.normalize << " out-prefix=" << o.out_prefix << '\n';

  const FrequencyTable real_table = word_frequencies(real.chars);
  const FrequencyTable generated_table = word_frequencies(generated.chars);
  const SimilarityReport report = compare_frequencies(real_table, generated_table, o.top_k);
  if (!o.out_prefix.empty()) {
    emit_frequency_table(real_table, o.top_k, o.out_prefix + ".real.tsv");
    emit_frequency_table(generated_table, o.top_k, o.out_prefix + ".generated.tsv");
  }
  char cosine[32];
  std::snprintf(cosine, sizeof cosine, "%.6f", report.cosine);
  out << "cosine=" << cosine << " top_k=" << report.top_k
      << " shared=" << report.shared_tokens << " real_tokens=" << real_table.total()
      << " generated_tokens=" << generated_table.total() << '\n';
  return kExitOk;
}

int run_gradcheck(const GradcheckOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<Preset> presets;
  if (o.preset != "deep") presets.push_back(Preset::kBaseline);
  if (o.preset != "baseline") presets.push_back(Preset::kDeep);
  std::vector<CellType> cells;
  if (o.cell != "lstm") cells.push_back(CellType::kGru);
  if (o.cell != "gru") cells.push_back(CellType::kLstm);

  err << "config: preset=" << o.preset << " cell=" << o.cell << " epsilon=" << o.epsilon
      << " tolerance=" << o.tolerance << " points=" << o.points << " seed-rng=" << o.seed
      << '\n';
  bool ok = true;
  for (Preset preset : presets) {
    for (CellType cell : cells) {
      const NetworkConfig config = gradcheck_config(preset, cell);
      for (std::size_t point = 0; point < o.points; ++point) {
        const GradCheckResult r = gradient_check(config, derive_seed(o.seed, point), o.epsilon);
        const bool pass = r.max_relative_error < o.tolerance;
        ok = ok && pass;
        out << (pass ? "PASS " : "FAIL ") << to_string(preset) << '/' << to_string(cell)
            << " point " << point << " max_rel_error=" << r.max_relative_error
            << " worst=" << r.worst_tensor << '[' << r.worst_index << "] coordinates="
            << r.coordinates << '\n';
      }
    }
  }
  return ok ? kExitOk : kExitRuntimeError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Character-level recurrent poetry model: train, generate, analyze"};
  app.name("pgen");
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on one or more corpora");
  train_cmd->add_option("--corpus", train.corpora, "UTF-8 corpus; repeat to blend, merged in order")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--window", train.window, "Pattern length in characters")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--preset", train.preset, "Architecture")
      ->check(CLI::IsMember({"baseline", "deep"}))->capture_default_str();
  train_cmd->add_option("--cell", train.cell, "Recurrent cell")
      ->check(CLI::IsMember({"gru", "lstm"}))->capture_default_str();
  train_cmd->add_option("--hidden", train.hidden, "Recurrent width")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--dense", train.dense, "Width of the two hidden dense layers (deep)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--dropout", train.dropout, "Dropout rate in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  train_cmd->add_option("--batch", train.batch, "Minibatch size")->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "Adam learning rate")->check(CLI::PositiveNumber)
      ->capture_default_str();
  train_cmd->add_option("--clip", train.clip, "Global gradient-norm clip")
      ->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--seed-rng", train.seed, "Seed for all randomness")->capture_default_str();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--curve", train.curve, "Learning-curve CSV path");
  train_cmd->add_option("--checkpoint-every", train.checkpoint_every,
                        "Also save every N epochs (0: only at the end)")
      ->capture_default_str();
  train_cmd->add_option("--holdout", train.holdout, "Trailing fraction held out for accuracy")
      ->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  train_cmd->add_option("--normalize", train.normalize, "NFC and Persian glyph folding")
      ->check(CLI::IsMember({"on", "off"}))->capture_default_str();

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate text from a checkpoint");
  gen_cmd->add_option("--model", gen.model, "Checkpoint path")->required()
      ->check(CLI::ExistingFile);
  auto* seed_text = gen_cmd->add_option("--seed-text", gen.seed_text, "Seed text");
  auto* seed_file = gen_cmd->add_option("--seed-file", gen.seed_file, "File holding the seed")
      ->check(CLI::ExistingFile);
  seed_text->excludes(seed_file);
  gen_cmd->add_option("--limit", gen.limit, "Characters to generate")->capture_default_str();
  gen_cmd->add_option("--mode", gen.mode, "Decoding rule")
      ->check(CLI::IsMember({"greedy", "temp"}))->capture_default_str();
  gen_cmd->add_option("--temperature", gen.temperature, "Sampling temperature (temp mode)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--seed-rng", gen.seed, "Sampling seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output file (default: standard output)");

  AnalyzeOptions analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Compare word frequencies of two texts");
  analyze_cmd->add_option("--real", analyze.real, "Reference text")->required()
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--generated", analyze.generated, "Generated text")->required()
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--top-k", analyze.top_k, "Tokens kept per table")
      ->check(CLI::PositiveNumber)->capture_default_str();
  analyze_cmd->add_option("--out-prefix", analyze.out_prefix,
                          "Write <prefix>.real.tsv and <prefix>.generated.tsv");
  analyze_cmd->add_option("--normalize", analyze.normalize, "NFC and Persian glyph folding")
      ->check(CLI::IsMember({"on", "off"}))->capture_default_str();

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  grad_cmd->add_option("--preset", grad.preset, "baseline, deep or all")
      ->check(CLI::IsMember({"baseline", "deep", "all"}))->capture_default_str();
  grad_cmd->add_option("--cell", grad.cell, "gru, lstm or all")
      ->check(CLI::IsMember({"gru", "lstm", "all"}))->capture_default_str();
  grad_cmd->add_option("--epsilon", grad.epsilon, "Central-difference step")
      ->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance, "Maximum relative error")
      ->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--points", grad.points, "Random parameter points per model")
      ->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--seed-rng", grad.seed, "Seed for parameter points")->capture_default_str();

  std::vector<std::string> argv_storage{"pgen"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }
  if (gen_cmd->parsed() && gen.seed_text.empty() && gen.seed_file.empty()) {
    err << "error: generate needs --seed-text or --seed-file\n" << gen_cmd->help();
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(train, out, err);
    if (gen_cmd->parsed()) return run_generate(gen, out, err);
    if (analyze_cmd->parsed()) return run_analyze(analyze, out, err);
    return run_gradcheck(grad, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace pgen::cli
