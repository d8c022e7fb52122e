#include <CLI11.hpp>

#include <algorithm>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "hicl/bench.hpp"
#include "hicl/errors.hpp"
#include "hicl/eval.hpp"
#include "hicl/hierarchy.hpp"
#include "hicl/losses.hpp"
#include "hicl/textproc.hpp"
#include "hicl/training.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Options {
  // shared
  std::string corpus_path;
  std::string vocab_path;
  std::string checkpoint_path;
  std::uint64_t seed = 0;
  std::size_t slice_len = 32;
  std::size_t d = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::string pooling = "weighted";

  // train
  std::string dev_path;
  std::string out_path = "model.ckpt";
  std::string log_path;
  std::string vocab_out;
  std::size_t batch_size = 16;
  std::size_t steps = 800;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  std::size_t eval_every = 125;
  double tau = 0.05;
  double alpha = 0.05;
  double beta = 0.0;
  std::string variant = "hicl";
  std::string relationship = "neither";
  std::string strategy = "dropout";
  double repetition_rate = 0.25;
  std::size_t queue_capacity = 0;
  double dropout = 0.1;
  std::size_t vocab_words = 30000;

  // eval
  std::string data_path;

  // bench
  std::size_t repetitions = 5;
  std::size_t seq_len = 256;
  std::size_t seq_count = 8;
  bool parallel = false;

  // synth
  std::string out_dir = ".";
  std::size_t pairs = 200;
  std::size_t dev_pairs = 200;
  std::size_t test_pairs = 200;
  std::size_t synth_vocab = 200;
  std::size_t body_length = 24;
};

hicl::hier::PoolingMode parse_pooling(const std::string& s) {
  if (s == "weighted") return hicl::hier::PoolingMode::kWeighted;
  if (s == "unweighted") return hicl::hier::PoolingMode::kUnweighted;
  throw hicl::ConfigError("unknown pooling mode: " + s);
}

hicl::loss::Relationship parse_relationship(const std::string& s) {
  if (s == "neither") return hicl::loss::Relationship::kNeither;
  if (s == "negative") return hicl::loss::Relationship::kNegative;
  if (s == "positive") return hicl::loss::Relationship::kPositive;
  throw hicl::ConfigError("unknown relationship mode: " + s);
}

hicl::loss::Variant parse_variant(const std::string& s) {
  if (s == "hicl") return hicl::loss::Variant::kHicl;
  if (s == "hiclv2") return hicl::loss::Variant::kHiclV2;
  if (s == "global_only") return hicl::loss::Variant::kGlobalOnly;
  if (s == "local_only") return hicl::loss::Variant::kLocalOnly;
  throw hicl::ConfigError("unknown loss variant: " + s);
}

hicl::train::TrainConfig to_train_config(const Options& opt) {
  hicl::train::TrainConfig cfg;
  cfg.batch_size = opt.batch_size;
  cfg.steps = opt.steps;
  cfg.learning_rate = opt.learning_rate;
  if (opt.optimizer == "adam") {
    cfg.optimizer = hicl::train::OptimizerKind::kAdam;
  } else if (opt.optimizer == "sgd") {
    cfg.optimizer = hicl::train::OptimizerKind::kSgd;
  } else {
    throw hicl::ConfigError("unknown optimizer: " + opt.optimizer);
  }
  cfg.eval_every = opt.eval_every;
  cfg.slice_len = opt.slice_len;
  cfg.loss.tau = opt.tau;
  cfg.loss.alpha = opt.alpha;
  cfg.loss.beta = opt.beta;
  cfg.loss.variant = parse_variant(opt.variant);
  cfg.loss.relationship = parse_relationship(opt.relationship);
  cfg.pooling = parse_pooling(opt.pooling);
  if (opt.strategy == "dropout") {
    cfg.strategy = hicl::train::PositiveStrategy::kDropout;
  } else if (opt.strategy == "repetition") {
    cfg.strategy = hicl::train::PositiveStrategy::kRepetition;
  } else {
    throw hicl::ConfigError("unknown positive strategy: " + opt.strategy);
  }
  cfg.repetition_rate = opt.repetition_rate;
  cfg.queue_capacity = opt.queue_capacity;
  cfg.dropout_rate = opt.dropout;
  cfg.seed = opt.seed;
  cfg.d = opt.d;
  cfg.n_heads = opt.n_heads;
  cfg.n_layers = opt.n_layers;
  return cfg;
}

void echo_effective_config(const CLI::App* sub) {
  std::cerr << "# effective config (" << sub->get_name() << ")\n";
  for (const CLI::Option* option : sub->get_options()) {
    const std::string name = option->get_lnames().empty()
                                 ? option->get_name()
                                 : option->get_lnames().front();
    if (name == "help" || name == "config") continue;
    // with TakeLast reduction the last result is the one in effect
    std::string value = option->count() > 0 ? option->results().back()
                                            : option->get_default_str();
    if (value.empty() && option->count() == 0) continue;
    std::cerr << name << " = " << value << "\n";
  }
}

// One `key = value` per line, `#` starts a comment. Returned in file order.
std::vector<std::pair<std::string, std::string>> read_flat_config(
    const std::string& path) {
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto begin = s.find_first_not_of(ws);
    if (begin == std::string::npos) return std::string();
    const auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
  };

  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  for (const std::string& raw : hicl::text::load_lines(path)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw hicl::ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

bool truthy(const std::string& v) {
  return v == "1" || v == "true" || v == "yes" || v == "on";
}

hicl::text::Vocab load_or_build_vocab(const Options& opt,
                                      const std::vector<std::string>& lines) {
  if (!opt.vocab_path.empty()) {
    return hicl::text::Vocab::load(opt.vocab_path);
  }
  return hicl::text::Vocab::build(lines, opt.vocab_words);
}

int run_train(const Options& opt) {
  const auto lines = hicl::text::load_lines(opt.corpus_path);
  hicl::text::Vocab vocab = load_or_build_vocab(opt, lines);

  std::vector<hicl::text::TokenSeq> corpus;
  std::size_t line_no = 0;
  for (const std::string& line : lines) {
    corpus.push_back(hicl::text::tokenize(line, vocab));
    corpus.back().source_line = ++line_no;
  }

  std::vector<hicl::text::StsRecord> dev;
  if (!opt.dev_path.empty()) {
    dev = hicl::text::load_sts(opt.dev_path, vocab);
  }

  hicl::train::TrainConfig cfg = to_train_config(opt);
  hicl::train::TrainOutcome outcome =
      hicl::train::train(cfg, corpus, dev, vocab.size());

  hicl::train::save_checkpoint(opt.out_path, outcome.best);
  const std::string vocab_out =
      opt.vocab_out.empty() ? opt.out_path + ".vocab" : opt.vocab_out;
  vocab.save(vocab_out);
  const std::string log_path =
      opt.log_path.empty() ? opt.out_path + ".log" : opt.log_path;
  std::ofstream log(log_path);
  if (!log) throw hicl::IoError("cannot write training log: " + log_path);
  log << outcome.log.to_tsv();

  std::cout << "best_step\t" << outcome.best_step << "\n";
  std::cout << "best_dev_spearman\t" << outcome.best_metric << "\n";
  std::cout << "checkpoint\t" << opt.out_path << "\n";
  std::cout << "vocab\t" << vocab_out << "\n";
  std::cout << "log\t" << log_path << "\n";
  return 0;
}

int run_eval(const Options& opt) {
  if (opt.vocab_path.empty()) {
    throw hicl::ConfigError("eval requires --vocab");
  }
  hicl::text::Vocab vocab = hicl::text::Vocab::load(opt.vocab_path);
  hicl::train::Checkpoint ckpt =
      hicl::train::load_checkpoint(opt.checkpoint_path);
  auto dataset = hicl::text::load_sts(opt.data_path, vocab);
  hicl::eval::EvalReport report = hicl::eval::evaluate(
      ckpt.params, dataset, opt.slice_len, parse_pooling(opt.pooling));
  std::cout << report.to_tsv();
  return 0;
}

int run_bench(const Options& opt) {
  hicl::enc::EncoderParams params;
  if (!opt.checkpoint_path.empty()) {
    params = hicl::train::load_checkpoint(opt.checkpoint_path).params;
  } else {
    params = hicl::enc::init_params(opt.seed, opt.d, opt.n_heads,
                                    opt.n_layers, 64, 512);
  }

  std::vector<hicl::text::TokenSeq> corpus;
  if (!opt.corpus_path.empty()) {
    hicl::text::Vocab vocab;  // filler vocab: everything maps to UNK
    corpus = hicl::text::load_corpus(opt.corpus_path, vocab);
    for (auto& seq : corpus) {
      for (auto& id : seq.ids) {
        if (id >= params.vocab_size) id = hicl::text::Vocab::kUnk;
      }
    }
  } else {
    for (std::size_t i = 0; i < opt.seq_count; ++i) {
      hicl::text::TokenSeq seq;
      seq.ids.assign(opt.seq_len, hicl::text::Vocab::kUnk);
      seq.ids.front() = hicl::text::Vocab::kCls;
      seq.ids.back() = hicl::text::Vocab::kSep;
      corpus.push_back(std::move(seq));
    }
  }

  hicl::bench::CostReport report = hicl::bench::wallclock_bench(
      params, corpus, opt.slice_len, opt.repetitions, opt.parallel);
  std::cout << report.to_tsv() << "\n" << report.to_kv();
  return 0;
}

int run_stats(const Options& opt) {
  const auto lines = hicl::text::load_lines(opt.corpus_path);
  hicl::text::Vocab vocab = load_or_build_vocab(opt, lines);
  std::vector<hicl::text::TokenSeq> corpus;
  for (const std::string& line : lines) {
    corpus.push_back(hicl::text::tokenize(line, vocab));
  }
  std::cout << hicl::text::corpus_stats(corpus, opt.slice_len).to_tsv();
  return 0;
}

int run_synth(const Options& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(opt.out_dir);

  auto write_lines = [](const fs::path& path,
                        const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw hicl::IoError("cannot write " + path.string());
    for (const std::string& line : lines) out << line << '\n';
  };
  auto write_pairs = [](const fs::path& path,
                        const std::vector<hicl::eval::SyntheticPair>& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw hicl::IoError("cannot write " + path.string());
    char buf[32];
    for (const auto& p : pairs) {
      std::snprintf(buf, sizeof(buf), "%.1f", p.gold);
      out << p.first << '\t' << p.second << '\t' << buf << '\n';
    }
  };

  hicl::eval::SyntheticData train_data = hicl::eval::generate_synthetic(
      opt.seed, opt.pairs, opt.synth_vocab, opt.body_length);
  hicl::eval::SyntheticData dev_data = hicl::eval::generate_synthetic(
      opt.seed + 1, opt.dev_pairs, opt.synth_vocab, opt.body_length);
  hicl::eval::SyntheticData test_data = hicl::eval::generate_synthetic(
      opt.seed + 2, opt.test_pairs, opt.synth_vocab, opt.body_length);

  const fs::path dir(opt.out_dir);
  write_lines(dir / "corpus.txt", train_data.corpus_lines);
  write_pairs(dir / "dev.tsv", dev_data.pairs);
  write_pairs(dir / "test.tsv", test_data.pairs);

  std::cout << "corpus\t" << (dir / "corpus.txt").string() << "\t"
            << train_data.corpus_lines.size() << " sentences\n";
  std::cout << "dev\t" << (dir / "dev.tsv").string() << "\t"
            << dev_data.pairs.size() << " pairs\n";
  std::cout << "test\t" << (dir / "test.tsv").string() << "\t"
            << test_data.pairs.size() << " pairs\n";
  return 0;
}

void add_encoder_flags(CLI::App* sub, Options& opt) {
  sub->add_option("--seed", opt.seed, "Random seed")->capture_default_str();
  sub->add_option("-L,--slice-len", opt.slice_len,
                  "Slicing length L (tokens per segment)")
      ->capture_default_str();
  sub->add_option("--d", opt.d, "Model width")->capture_default_str();
  sub->add_option("--heads", opt.n_heads, "Attention heads")
      ->capture_default_str();
  sub->add_option("--layers", opt.n_layers, "Encoder layers")
      ->capture_default_str();
  sub->add_option("--pooling", opt.pooling,
                  "Segment pooling: weighted|unweighted")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "hicl: hierarchical contrastive learning over sliced sequences"};
  app.require_subcommand(1);

  Options opt;

  CLI::App* train_cmd =
      app.add_subcommand("train", "Train an encoder and keep the best "
                                  "dev checkpoint");
  train_cmd->add_option("--corpus", opt.corpus_path,
                        "Training corpus, one sequence per line")
      ->required();
  train_cmd->add_option("--dev", opt.dev_path,
                        "Dev STS TSV for checkpoint selection");
  train_cmd->add_option("--vocab", opt.vocab_path,
                        "Existing vocab file (default: build from corpus)");
  train_cmd->add_option("--vocab-out", opt.vocab_out,
                        "Where to save the vocab (default <out>.vocab)");
  train_cmd->add_option("--out", opt.out_path, "Checkpoint output path")
      ->capture_default_str();
  train_cmd->add_option("--log", opt.log_path,
                        "Training log path (default <out>.log)");
  train_cmd->add_option("--batch-size", opt.batch_size, "Batch size")
      ->capture_default_str();
  train_cmd->add_option("--steps", opt.steps, "Optimization steps")
      ->capture_default_str();
  train_cmd->add_option("--lr", opt.learning_rate, "Learning rate")
      ->capture_default_str();
  train_cmd->add_option("--optimizer", opt.optimizer, "adam|sgd")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", opt.eval_every,
                        "Dev evaluation cadence in steps")
      ->capture_default_str();
  train_cmd->add_option("--tau", opt.tau, "InfoNCE temperature")
      ->capture_default_str();
  train_cmd->add_option("--alpha", opt.alpha, "Local loss weight")
      ->capture_default_str();
  train_cmd->add_option("--beta", opt.beta, "Entailment weight (hiclv2)")
      ->capture_default_str();
  train_cmd->add_option("--variant", opt.variant,
                        "hicl|hiclv2|global_only|local_only")
      ->capture_default_str();
  train_cmd->add_option("--relationship", opt.relationship,
                        "Same-sequence segments: neither|negative|positive")
      ->capture_default_str();
  train_cmd->add_option("--strategy", opt.strategy,
                        "Positive pairs: dropout|repetition")
      ->capture_default_str();
  train_cmd->add_option("--repetition-rate", opt.repetition_rate,
                        "Word repetition rate")
      ->capture_default_str();
  train_cmd->add_option("--queue-capacity", opt.queue_capacity,
                        "Momentum negative queue capacity in rows (0 = off)")
      ->capture_default_str();
  train_cmd->add_option("--dropout", opt.dropout, "Dropout rate")
      ->capture_default_str();
  train_cmd->add_option("--vocab-words", opt.vocab_words,
                        "Vocab cap when building from the corpus")
      ->capture_default_str();
  add_encoder_flags(train_cmd, opt);

  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Score sentence pairs with a checkpoint and report Spearman");
  eval_cmd->add_option("--checkpoint", opt.checkpoint_path, "Checkpoint path")
      ->required();
  eval_cmd->add_option("--data", opt.data_path, "STS TSV to evaluate")
      ->required();
  eval_cmd->add_option("--vocab", opt.vocab_path, "Vocab file")->required();
  eval_cmd->add_option("-L,--slice-len", opt.slice_len, "Slicing length")
      ->capture_default_str();
  eval_cmd->add_option("--pooling", opt.pooling, "weighted|unweighted")
      ->capture_default_str();

  CLI::App* bench_cmd = app.add_subcommand(
      "bench", "Compare whole-sequence vs sliced encoding cost");
  bench_cmd->add_option("--corpus", opt.corpus_path,
                        "Corpus to time (default: synthetic filler)");
  bench_cmd->add_option("--checkpoint", opt.checkpoint_path,
                        "Bench a trained model instead of a fresh init");
  bench_cmd->add_option("--reps", opt.repetitions, "Timing repetitions")
      ->capture_default_str();
  bench_cmd->add_option("--seq-len", opt.seq_len,
                        "Synthetic sequence length (no --corpus)")
      ->capture_default_str();
  bench_cmd->add_option("--count", opt.seq_count,
                        "Synthetic sequence count (no --corpus)")
      ->capture_default_str();
  bench_cmd->add_flag("--parallel", opt.parallel,
                      "Encode segments on parallel threads");
  add_encoder_flags(bench_cmd, opt);

  CLI::App* stats_cmd = app.add_subcommand(
      "stats", "Token-length distribution and segment counts of a corpus");
  stats_cmd->add_option("--corpus", opt.corpus_path, "Corpus file")
      ->required();
  stats_cmd->add_option("--vocab", opt.vocab_path, "Vocab file (optional)");
  stats_cmd->add_option("-L,--slice-len", opt.slice_len, "Slicing length")
      ->capture_default_str();
  stats_cmd->add_option("--vocab-words", opt.vocab_words, "Vocab cap")
      ->capture_default_str();

  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "Generate a synthetic overlap-similarity dataset");
  synth_cmd->add_option("--seed", opt.seed, "Random seed")
      ->capture_default_str();
  synth_cmd->add_option("--pairs", opt.pairs, "Training pairs")
      ->capture_default_str();
  synth_cmd->add_option("--dev-pairs", opt.dev_pairs, "Dev pairs")
      ->capture_default_str();
  synth_cmd->add_option("--test-pairs", opt.test_pairs, "Test pairs")
      ->capture_default_str();
  synth_cmd->add_option("--vocab-words", opt.synth_vocab, "Synthetic vocab")
      ->capture_default_str();
  synth_cmd->add_option("--body-length", opt.body_length,
                        "Tokens per sentence body")
      ->capture_default_str();
  synth_cmd->add_option("--out-dir", opt.out_dir, "Output directory")
      ->capture_default_str();

  std::string config_note;  // help-only; the file is applied by hand below
  for (CLI::App* sub :
       {train_cmd, eval_cmd, bench_cmd, stats_cmd, synth_cmd}) {
    sub->add_option("--config", config_note,
                    "Read options from a key = value file (# comments); "
                    "command-line flags override file values");
    for (CLI::Option* option : sub->get_options()) {
      if (option->get_expected_min() >= 1) {
        option->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      }
    }
  }

  // Apply --config by injecting the file's entries as flags placed before
  // the user's own flags, so the command line wins under TakeLast.
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        config_path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                   args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        config_path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
    if (!config_path.empty()) {
      if (args.empty() || args.front().empty() || args.front()[0] == '-') {
        throw hicl::ConfigError("--config requires a subcommand");
      }
      CLI::App* sub = app.get_subcommand_no_throw(args.front());
      if (sub == nullptr) {
        std::cerr << "unknown subcommand: " << args.front() << "\n";
        return kExitUsage;
      }
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_flat_config(config_path)) {
        CLI::Option* option = sub->get_option_no_throw("--" + key);
        if (option == nullptr) {
          throw hicl::ConfigError(config_path + ": unknown key '" + key +
                                  "' for subcommand '" + sub->get_name() +
                                  "'");
        }
        if (option->get_expected_min() == 0) {  // flag
          if (truthy(value)) injected.push_back("--" + key);
        } else {
          injected.push_back("--" + key);
          injected.push_back(value);
        }
      }
      args.insert(args.begin() + 1, injected.begin(), injected.end());
    }
  } catch (const hicl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hicl::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }

  try {
    std::reverse(args.begin(), args.end());  // CLI11's vector order
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      echo_effective_config(train_cmd);
      return run_train(opt);
    }
    if (eval_cmd->parsed()) {
      echo_effective_config(eval_cmd);
      return run_eval(opt);
    }
    if (bench_cmd->parsed()) {
      echo_effective_config(bench_cmd);
      return run_bench(opt);
    }
    if (stats_cmd->parsed()) {
      echo_effective_config(stats_cmd);
      return run_stats(opt);
    }
    if (synth_cmd->parsed()) {
      echo_effective_config(synth_cmd);
      return run_synth(opt);
    }
  } catch (const hicl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hicl::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const hicl::NumericsError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
