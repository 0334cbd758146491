// gujiseg: prepare corpora, train and apply segmentation models, and run the
// window sweeps and feature ablations.
//
// Exit status: 0 success, 1 experiment failure, 2 usage or I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gujiseg/gujiseg.hpp"
#include "json.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gujiseg;

namespace {

constexpr const char* kVersion = "0.1.0";

struct IoError : Error {
  using Error::Error;
};

void note(const std::string& msg) { std::cerr << "gujiseg: " << msg << '\n'; }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Output goes to a file when a path is given, else stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) : path_(path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw IoError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return path_.empty() ? std::cout : file_; }
  void close() {
    if (!path_.empty()) {
      file_.close();
      if (!file_) throw IoError("error writing '" + path_ + "'");
    }
  }

 private:
  std::string path_;
  std::ofstream file_;
};

void write_json(const std::string& path, const json& j) {
  Sink s(path);
  s.stream() << j.dump(2) << '\n';
  s.close();
}

// ---------------------------------------------------------------------------
// Shared option groups.

struct LexiconOptions {
  std::vector<std::string> rhyme_dicts;  // NAME=PATH
  std::string entity_lexicon;
  std::string pmi_table;

  void add(CLI::App* app) {
    app->add_option("--rhyme-dict", rhyme_dicts,
                    "Rhyme dictionary as NAME=PATH, NAME one of guangyun|pingshuiyun (repeatable)");
    app->add_option("--lexicon", entity_lexicon, "Entity lexicon TSV (word, REIGN|PLACE|OFFICE)");
    app->add_option("--pmi-table", pmi_table, "Precomputed PMI table");
  }

  LexiconSet load(cli::RunManifest* manifest) const {
    LexiconSet lex;
    for (const auto& spec : rhyme_dicts) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--rhyme-dict expects NAME=PATH, got '" + spec + "'");
      const auto which = parse_rhyme_source(spec.substr(0, eq));
      const std::string path = spec.substr(eq + 1);
      const std::string data = slurp(path);
      if (manifest) manifest->add_input(path, data);
      std::istringstream in(data);
      auto dict = std::make_shared<const RhymeDictionary>(load_rhyme_dict(in, which));
      (which == RhymeSource::Guangyun ? lex.guangyun : lex.pingshuiyun) = dict;
    }
    if (!entity_lexicon.empty()) {
      const std::string data = slurp(entity_lexicon);
      if (manifest) manifest->add_input(entity_lexicon, data);
      std::istringstream in(data);
      std::vector<std::string> warnings;
      lex.entities = std::make_shared<const EntityLexicon>(load_entity_lexicon(in, &warnings));
      for (const auto& w : warnings) note(entity_lexicon + ": " + w);
    }
    if (!pmi_table.empty()) {
      const std::string data = slurp(pmi_table);
      if (manifest) manifest->add_input(pmi_table, data);
      std::istringstream in(data);
      lex.pmi = std::make_shared<const PmiTable>(load_pmi_table(in));
    }
    return lex;
  }
};

struct TrainOptions {
  double sigma = 1.0;
  std::size_t max_iter = 200;
  double tol = 1e-5;

  void add(CLI::App* app) {
    app->add_option("--sigma", sigma, "Gaussian prior width")->capture_default_str();
    app->add_option("--max-iter", max_iter, "Maximum optimizer iterations")->capture_default_str();
    app->add_option("--tol", tol, "Relative objective change for convergence")->capture_default_str();
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    c.l2_sigma = sigma;
    c.max_iterations = max_iter;
    c.tolerance = tol;
    c.seed = seed;
    c.validate();
    return c;
  }

  json to_json() const { return {{"sigma", sigma}, {"max_iter", max_iter}, {"tol", tol}}; }
};

std::vector<LabeledSequence> load_labeled(const std::string& path, cli::RunManifest* manifest) {
  const std::string data = slurp(path);
  if (manifest) manifest->add_input(path, data);
  std::istringstream in(data);
  return read_labeled_corpus(in);
}

FeatureConfig checked_features(const std::string& spec, int k) {
  auto cfg = parse_feature_spec(spec, k);
  for (const auto& w : cfg.validate()) note("warning: " + w);
  return cfg;
}

// Raw argv minus the program name, for the manifest and the run id.
std::vector<std::string> g_args;

// ---------------------------------------------------------------------------
// Experiments that write a results CSV plus its manifest.

struct ExperimentCommand {
  std::string corpus;
  std::string out;
  std::string manifest_path;
  std::uint64_t seed = 0;
  std::size_t trials = 3;
  double train_ratio = 0.7;
  std::uint64_t pmi_min_count = 5;
  bool quiet = false;
  TrainOptions train;
  LexiconOptions lex;

  void add(CLI::App* app) {
    app->add_option("corpus", corpus, "Labeled corpus (output of prepare)")->required();
    app->add_option("-o,--out", out, "Results CSV (default stdout)");
    app->add_option("--manifest", manifest_path, "Manifest path (default <out>.manifest.json)");
    app->add_option("--seed", seed, "Split seed")->capture_default_str();
    app->add_option("--trials", trials, "Random holdout repetitions")->capture_default_str();
    app->add_option("--train-ratio", train_ratio, "Training share per split")->capture_default_str();
    app->add_option("--pmi-min-count", pmi_min_count, "Minimum bigram count for PMI")
        ->capture_default_str();
    app->add_flag("-q,--quiet", quiet, "No progress messages");
    train.add(app);
    lex.add(app);
  }

  std::string resolved_manifest(const std::string& run_id) const {
    if (!manifest_path.empty()) return manifest_path;
    if (!out.empty()) return out + ".manifest.json";
    return "gujiseg-" + run_id + ".manifest.json";
  }

  int run(const std::string& command, const std::vector<FeatureConfig>& conditions) const {
    cli::RunManifest manifest(command, g_args, kVersion);
    const auto docs = load_labeled(corpus, &manifest);
    const LexiconSet lexicons = lex.load(&manifest);
    const TrainConfig train_cfg = train.config(seed);
    SplitSpec split_spec{train_ratio, seed, trials};
    split_spec.validate();

    // Resource checks up front so a long run does not fail half-way.
    for (const auto& f : conditions) {
      LexiconSet probe = lexicons;
      if (f.use_pmi && !probe.pmi) probe.pmi = std::make_shared<const PmiTable>();
      FeatureExtractor check(f, probe);
    }

    json cond = json::array();
    for (const auto& f : conditions) cond.push_back({{"k", f.k}, {"features", f.spec()}});
    manifest.set_config({{"conditions", cond},
                         {"train", train.to_json()},
                         {"split", {{"train_ratio", train_ratio}, {"trials", trials}}},
                         {"pmi_min_count", pmi_min_count}});
    manifest.set_seed(seed);

    ExperimentOptions opts;
    opts.pmi_min_count = pmi_min_count;
    if (!quiet) opts.log = [](const std::string& s) { note(s); };

    Sink sink(out);
    write_results_header(sink.stream(), manifest.run_id());
    for (const auto& f : conditions) {
      const auto r = run_experiment(docs, f, train_cfg, split_spec, lexicons, opts);
      write_results_rows(sink.stream(), r);
      sink.stream().flush();
    }
    sink.close();

    std::vector<std::string> outputs;
    if (!out.empty()) outputs.push_back(out);
    write_json(resolved_manifest(manifest.run_id()), manifest.finish(outputs));
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Subcommands.

struct PrepareCommand {
  std::string input;
  std::string out;
  std::string format = "blocks";
  std::string boundary = "。，；";
  std::optional<std::string> discard;
  std::size_t min_length = 30;
  std::string stats_path;

  void add(CLI::App* app) {
    app->add_option("input", input, "Punctuated corpus")->required();
    app->add_option("-o,--out", out, "Labeled corpus (default stdout)");
    app->add_option("--format", format, "Input format: lines|blocks")->capture_default_str();
    app->add_option("--boundary", boundary, "Characters that mark a boundary")->capture_default_str();
    app->add_option("--discard", discard,
                    "Characters dropped silently (default: built-in punctuation and whitespace)");
    app->add_option("--min-length", min_length, "Keep sequences longer than this")
        ->capture_default_str();
    app->add_option("--stats", stats_path, "Write corpus statistics as JSON");
  }

  int run() const {
    const std::string data = slurp(input);
    std::istringstream in(data);
    const auto docs = parse_corpus(in, parse_corpus_format(format));
    const CharSet bset = make_charset(utf8::decode(boundary));
    CharSet dset = discard ? make_charset(utf8::decode(*discard)) : default_discard_set();
    // An explicit boundary character always wins over the default discard list.
    if (!discard)
      for (char32_t c : bset) dset.erase(c);

    std::vector<LabeledSequence> labeled;
    std::size_t empty = 0;
    for (const auto& d : docs) {
      try {
        labeled.push_back(labelize(d, bset, dset));
      } catch (const EmptySequenceError&) {
        ++empty;
      }
    }
    const auto kept = filter_short(labeled, min_length);
    const auto st = corpus_stats(kept);

    Sink sink(out);
    write_labeled_corpus(sink.stream(), kept);
    sink.close();

    const json stats = {{"input", input},
                        {"input_sha256", cli::sha256_hex(data)},
                        {"documents_read", docs.size()},
                        {"dropped_empty", empty},
                        {"dropped_short", labeled.size() - kept.size()},
                        {"min_length", min_length},
                        {"documents", st.doc_count},
                        {"char_tokens", st.char_token_count},
                        {"char_types", st.char_type_count},
                        {"boundary_marks", st.boundary_mark_count},
                        {"mean_chars_per_document", st.mean_chars_per_doc}};
    std::cerr << "documents_read=" << docs.size() << " dropped_empty=" << empty
              << " dropped_short=" << labeled.size() - kept.size() << " kept=" << st.doc_count
              << " char_tokens=" << st.char_token_count << " char_types=" << st.char_type_count
              << " boundary_marks=" << st.boundary_mark_count << '\n';
    if (!stats_path.empty()) write_json(stats_path, stats);
    return 0;
  }
};

struct TrainCommand {
  std::string corpus;
  std::string model_path;
  int k = 1;
  std::string features = "c";
  std::uint64_t seed = 0;
  std::uint64_t pmi_min_count = 5;
  std::string pmi_out;
  TrainOptions train;
  LexiconOptions lex;

  void add(CLI::App* app) {
    app->add_option("corpus", corpus, "Labeled corpus")->required();
    app->add_option("-o,--out", model_path, "Model file")->required();
    app->add_option("--k", k, "Window radius")->capture_default_str();
    app->add_option("--features", features, "Template list, e.g. c,b,ry:guangyun,w,pmi")
        ->capture_default_str();
    app->add_option("--seed", seed, "Recorded in the model")->capture_default_str();
    app->add_option("--pmi-min-count", pmi_min_count, "Minimum bigram count when building PMI")
        ->capture_default_str();
    app->add_option("--pmi-out", pmi_out,
                    "Where to save a PMI table built from the corpus (default <model>.pmi.tsv)");
    train.add(app);
    lex.add(app);
  }

  int run() const {
    cli::RunManifest manifest("train", g_args, kVersion);
    const auto docs = load_labeled(corpus, &manifest);
    LexiconSet lexicons = lex.load(&manifest);
    const auto cfg = checked_features(features, k);
    std::vector<std::string> outputs{model_path};
    if (cfg.use_pmi && !lexicons.pmi) {
      lexicons.pmi = std::make_shared<const PmiTable>(build_pmi_table(docs, pmi_min_count));
      const std::string path = pmi_out.empty() ? model_path + ".pmi.tsv" : pmi_out;
      Sink s(path);
      save_pmi_table(s.stream(), *lexicons.pmi);
      s.close();
      outputs.push_back(path);
      note("built PMI table from training corpus (" + std::to_string(lexicons.pmi->size()) +
           " pairs), saved to " + path);
    }
    const FeatureExtractor fx(cfg, lexicons);
    const auto model = train_segmenter(docs, fx, train.config(seed));
    note("trained " + cfg.name() + " k=" + std::to_string(k) + ": " +
         std::to_string(model.num_attributes()) + " attributes, " +
         std::to_string(model.meta.iterations) + " iterations (" + model.meta.stop_reason + ")");
    Sink s(model_path);
    save_model(s.stream(), model);
    s.close();
    manifest.set_config({{"k", k}, {"features", cfg.spec()}, {"train", train.to_json()}});
    manifest.set_seed(seed);
    write_json(model_path + ".manifest.json", manifest.finish(outputs));
    return 0;
  }
};

CrfModel load_model_file(const std::string& path, cli::RunManifest* manifest) {
  const std::string data = slurp(path);
  if (manifest) manifest->add_input(path, data);
  std::istringstream in(data);
  return load_model(in);
}

struct PunctuateCommand {
  std::string input;
  std::string model_path;
  std::string out;
  std::string mark = "，";
  std::string boundary = "。，；";
  LexiconOptions lex;

  void add(CLI::App* app) {
    app->add_option("input", input, "Unpunctuated text, one passage per line")->required();
    app->add_option("-m,--model", model_path, "Model file")->required();
    app->add_option("-o,--out", out, "Output (default stdout)");
    app->add_option("--mark", mark, "Mark inserted after each M character")->capture_default_str();
    app->add_option("--boundary", boundary, "Characters stripped from the input before decoding")
        ->capture_default_str();
    lex.add(app);
  }

  int run() const {
    const auto model = load_model_file(model_path, nullptr);
    const FeatureExtractor fx(model.config, lex.load(nullptr));
    const auto mark_chars = utf8::decode(mark);
    if (mark_chars.size() != 1) throw ConfigError("--mark must be a single character");
    const CharSet bset = make_charset(utf8::decode(boundary));

    const std::string data = slurp(input);
    Sink sink(out);
    std::size_t stripped = 0;
    for (const auto& line : detail::split_lines(data)) {
      std::u32string chars;
      for (char32_t c : utf8::decode(line.text, line.offset)) {
        if (bset.contains(c))
          ++stripped;
        else
          chars.push_back(c);
      }
      const auto labels = predict_labels(model, fx, chars);
      sink.stream() << utf8::encode(render(chars, labels, mark_chars[0])) << '\n';
    }
    sink.close();
    if (stripped > 0)
      note("warning: stripped " + std::to_string(stripped) + " boundary characters from the input");
    return 0;
  }
};

struct EvaluateCommand {
  std::string corpus;
  std::string model_path;
  std::string out;
  std::string manifest_path;
  LexiconOptions lex;

  void add(CLI::App* app) {
    app->add_option("corpus", corpus, "Gold labeled corpus")->required();
    app->add_option("-m,--model", model_path, "Model file")->required();
    app->add_option("-o,--out", out, "Results CSV (default stdout)");
    app->add_option("--manifest", manifest_path, "Manifest path (default <out>.manifest.json)");
    lex.add(app);
  }

  int run() const {
    cli::RunManifest manifest("evaluate", g_args, kVersion);
    const auto model = load_model_file(model_path, &manifest);
    const auto gold = load_labeled(corpus, &manifest);
    const FeatureExtractor fx(model.config, lex.load(&manifest));
    const auto m = evaluate(gold, predict_all(model, fx, gold));
    manifest.set_config({{"k", model.config.k}, {"features", model.config.spec()}});
    Sink sink(out);
    write_results_header(sink.stream(), manifest.run_id());
    write_results_rows(sink.stream(), summarize(model.config, {m}));
    sink.close();
    std::string mpath = manifest_path;
    if (mpath.empty())
      mpath = out.empty() ? "gujiseg-" + manifest.run_id() + ".manifest.json" : out + ".manifest.json";
    write_json(mpath, manifest.finish(out.empty() ? std::vector<std::string>{} : std::vector{out}));
    return 0;
  }
};

struct SweepCommand {
  ExperimentCommand exp;
  int k_min = 1;
  int k_max = kMaxSweptWindow;
  std::vector<std::string> feature_sets{"c", "c,b"};

  void add(CLI::App* app) {
    exp.add(app);
    app->add_option("--k-min", k_min, "Smallest window radius")->capture_default_str();
    app->add_option("--k-max", k_max, "Largest window radius")->capture_default_str();
    app->add_option("--features", feature_sets, "Feature set to sweep (repeatable)")
        ->capture_default_str();
  }

  int run() const {
    if (k_min < 0 || k_max < k_min) throw ConfigError("need 0 <= --k-min <= --k-max");
    std::vector<FeatureConfig> conditions;
    for (const auto& fs : feature_sets)
      for (int k = k_min; k <= k_max; ++k) conditions.push_back(checked_features(fs, k));
    return exp.run("sweep", conditions);
  }
};

struct AblateCommand {
  ExperimentCommand exp;
  std::string preset;

  void add(CLI::App* app) {
    exp.add(app);
    app->add_option("--preset", preset, "table1 (pronunciation) or table2 (words, PMI)")
        ->required()
        ->check(CLI::IsMember({"table1", "table2"}));
  }

  int run() const {
    std::vector<std::string> sets;
    std::vector<int> ks;
    if (preset == "table1") {
      sets = {"c", "c,b", "c,b,ry:guangyun", "c,b,ry:pingshuiyun"};
      ks = {1, 2};
      std::map<std::string, bool> have;
      for (const auto& s : exp.lex.rhyme_dicts) have[s.substr(0, s.find('='))] = true;
      for (const char* name : {"guangyun", "pingshuiyun"})
        if (!have[name])
          throw ConfigError(std::string("preset table1 needs --rhyme-dict ") + name + "=PATH");
    } else {
      sets = {"c,b", "c,b,w", "c,b,pmi"};
      ks = {1, 2, 3, 4};
      if (exp.lex.entity_lexicon.empty())
        throw ConfigError("preset table2 needs --lexicon PATH");
    }
    std::vector<FeatureConfig> conditions;
    for (const auto& s : sets)
      for (int k : ks) conditions.push_back(checked_features(s, k));
    return exp.run("ablate", conditions);
  }
};

struct PmiBuildCommand {
  std::string corpus;
  std::string out;
  std::uint64_t min_count = 5;

  void add(CLI::App* app) {
    app->add_option("corpus", corpus, "Labeled training corpus")->required();
    app->add_option("-o,--out", out, "PMI table (default stdout)");
    app->add_option("--min-count", min_count, "Minimum bigram count")->capture_default_str();
  }

  int run() const {
    const auto docs = load_labeled(corpus, nullptr);
    const auto table = build_pmi_table(docs, min_count);
    Sink sink(out);
    save_pmi_table(sink.stream(), table);
    sink.close();
    note("PMI table: " + std::to_string(table.size()) + " pairs over " +
         std::to_string(table.total_bigrams) + " bigram tokens");
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) g_args.emplace_back(argv[i]);

  CLI::App app{"Sentence segmentation for unpunctuated classical Chinese"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  PrepareCommand prepare;
  TrainCommand train;
  PunctuateCommand punctuate;
  EvaluateCommand evaluate_cmd;
  SweepCommand sweep;
  AblateCommand ablate;
  PmiBuildCommand pmi_build;

  prepare.add(app.add_subcommand("prepare", "Punctuated corpus to labeled sequences"));
  train.add(app.add_subcommand("train", "Train a model on a labeled corpus"));
  punctuate.add(app.add_subcommand("punctuate", "Insert boundary marks into raw text"));
  evaluate_cmd.add(app.add_subcommand("evaluate", "Score a model against a gold corpus"));
  sweep.add(app.add_subcommand("sweep", "Window-size sweep with repeated holdout"));
  ablate.add(app.add_subcommand("ablate", "Feature ablation presets"));
  pmi_build.add(app.add_subcommand("pmi-build", "Build a PMI table from a labeled corpus"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "prepare") return prepare.run();
    if (name == "train") return train.run();
    if (name == "punctuate") return punctuate.run();
    if (name == "evaluate") return evaluate_cmd.run();
    if (name == "sweep") return sweep.run();
    if (name == "ablate") return ablate.run();
    if (name == "pmi-build") return pmi_build.run();
  } catch (const IoError& e) {
    note(e.what());
    return 2;
  } catch (const ParseError& e) {
    note(std::string("parse error: ") + e.what());
    return 2;
  } catch (const DecodeError& e) {
    note(std::string("invalid UTF-8: ") + e.what());
    return 2;
  } catch (const ConfigError& e) {
    note(std::string("configuration error: ") + e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    note(std::string("invalid argument: ") + e.what());
    return 2;
  } catch (const std::exception& e) {
    note(std::string("failed: ") + e.what());
    return 1;
  }
  return 2;
}
