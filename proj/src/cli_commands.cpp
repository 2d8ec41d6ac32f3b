#include "cli_commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "btc/chords.hpp"
#include "btc/features.hpp"
#include "btc/io.hpp"
#include "btc/metrics.hpp"
#include "btc/model.hpp"
#include "btc/pipeline.hpp"
#include "btc/trainer.hpp"

namespace btc {
namespace {

namespace fs = std::filesystem;

// FNV-1a 64 with a splitmix64 finisher: stable across platforms, drives the
// song-level split. Raw FNV leaves trailing-character differences in the low
// bits only, so ids like song_0007 would otherwise share their top bits.
std::uint64_t song_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return detail::splitmix64(h);
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::parse_error,
           path + ":" + std::to_string(line_no) + ": expected key=value, got \"" + line + "\"");
    out[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return out;
}

// Links a flag to a config-file key: the file supplies the value only when
// the flag was not given on the command line.
class OverrideBook {
 public:
  void add(CLI::Option* opt, std::string key, std::function<void(const std::string&)> set) {
    entries_.push_back({opt, std::move(key), std::move(set)});
  }

  void apply(const std::map<std::string, std::string>& cfg) const {
    for (const auto& e : entries_) {
      if (e.opt->count() > 0) continue;
      const auto it = cfg.find(e.key);
      if (it != cfg.end()) e.set(it->second);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const std::string&)> set;
  };
  std::vector<Entry> entries_;
};

std::uint64_t parse_u64(const std::string& v, const std::string& what) {
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    fail(ErrorCode::parse_error, "bad " + what + " value \"" + v + "\"");
  }
}
int parse_int(const std::string& v, const std::string& what) {
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    fail(ErrorCode::parse_error, "bad " + what + " value \"" + v + "\"");
  }
}
double parse_double(const std::string& v, const std::string& what) {
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    fail(ErrorCode::parse_error, "bad " + what + " value \"" + v + "\"");
  }
}
bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  fail(ErrorCode::parse_error, "bad " + what + " value \"" + v + "\"");
}

struct GlobalArgs {
  std::uint64_t seed = 0;
  std::string config_path;
  CLI::Option* seed_opt = nullptr;

  std::uint64_t resolve_seed(const std::map<std::string, std::string>& cfg) const {
    if (seed_opt->count() > 0) return seed;
    const auto it = cfg.find("seed");
    if (it != cfg.end()) return parse_u64(it->second, "seed");
    if (const char* env = std::getenv("BTC_SEED")) return parse_u64(env, "BTC_SEED");
    return seed;
  }
};

void echo(const std::vector<std::pair<std::string, std::string>>& lines) {
  for (const auto& [k, v] : lines) std::cout << k << "=" << v << "\n";
  std::cout << std::flush;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// ---------------------------------------------------------------- synth-data

struct SynthArgs {
  int songs = 0;
  std::string vocab = "majmin";
  double noise = 0.1;
  std::string out;
};

void run_synth_data(const SynthArgs& a, std::uint64_t seed) {
  if (a.songs < 1) fail(ErrorCode::config_error, "--songs must be >= 1");
  if (a.out.empty()) fail(ErrorCode::config_error, "--out directory is required");
  const VocabKind kind = vocab_kind_from_name(a.vocab);
  echo({{"command", "synth-data"},
        {"seed", std::to_string(seed)},
        {"songs", std::to_string(a.songs)},
        {"vocab", a.vocab},
        {"noise", fmt(a.noise)},
        {"out", a.out}});

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create " + a.out + ": " + ec.message());

  const Vocabulary v = Vocabulary::make(kind);
  Rng rng(seed);
  const std::vector<SynthSong> songs = synth_dataset(a.songs, v, a.noise, rng);

  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["vocab"] = a.vocab;
  manifest["noise_sigma"] = a.noise;
  manifest["songs"] = nlohmann::json::array();
  for (const auto& song : songs) {
    write_btcf(song.features, (fs::path(a.out) / (song.id + ".btcf")).string());
    write_lab(song.track, (fs::path(a.out) / (song.id + ".lab")).string());
    manifest["songs"].push_back(song.id);
  }
  std::ofstream mf(fs::path(a.out) / "manifest.json", std::ios::trunc);
  if (!mf) fail(ErrorCode::io_error, "cannot write manifest in " + a.out);
  mf << manifest.dump(2) << "\n";
  std::cout << "wrote " << songs.size() << " songs to " << a.out << "\n";
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  double val_split = 0.2;
  std::string vocab = "majmin";
  std::string out;
  int n_layers = 8;
  int n_heads = 4;
  int model_dim = 128;
  int conv_repeats = 2;
  int kernel = 3;
  double dropout = 0.2;
  double lr = 1e-4;
  double decay = 0.95;
  int batch_size = 16;
  int max_epochs = 50;
  int patience = 10;
  bool augment = false;
};

struct SongData {
  std::string id;
  FeatureMatrix raw;
  AnnotationTrack track;
};

std::vector<SongData> load_song_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::io_error, "not a directory: " + dir);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".btcf") ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) fail(ErrorCode::data_error, "no .btcf files in " + dir);

  std::vector<SongData> out;
  for (const auto& id : ids) {
    const fs::path lab = fs::path(dir) / (id + ".lab");
    if (!fs::exists(lab))
      fail(ErrorCode::not_found, "song " + id + " has no matching .lab file");
    SongData song;
    song.id = id;
    song.raw = read_btcf((fs::path(dir) / (id + ".btcf")).string());
    song.track = parse_lab(lab.string());
    out.push_back(std::move(song));
  }
  return out;
}

void run_train(const TrainArgs& a, std::uint64_t seed) {
  if (a.data.empty() || a.out.empty())
    fail(ErrorCode::config_error, "--data and --out are required");
  if (!(a.val_split > 0.0 && a.val_split < 1.0))
    fail(ErrorCode::config_error, "--val-split must be in (0,1)");
  const VocabKind kind = vocab_kind_from_name(a.vocab);
  const Vocabulary vocab = Vocabulary::make(kind);

  echo({{"command", "train"},
        {"seed", std::to_string(seed)},
        {"data", a.data},
        {"val_split", fmt(a.val_split)},
        {"vocab", a.vocab},
        {"out", a.out},
        {"n_layers", std::to_string(a.n_layers)},
        {"n_heads", std::to_string(a.n_heads)},
        {"model_dim", std::to_string(a.model_dim)},
        {"conv_repeats", std::to_string(a.conv_repeats)},
        {"kernel", std::to_string(a.kernel)},
        {"dropout", fmt(a.dropout)},
        {"lr", fmt(a.lr)},
        {"decay", fmt(a.decay)},
        {"batch_size", std::to_string(a.batch_size)},
        {"max_epochs", std::to_string(a.max_epochs)},
        {"patience", std::to_string(a.patience)},
        {"augment", a.augment ? "1" : "0"}});

  const std::vector<SongData> songs = load_song_dir(a.data);
  if (songs.size() < 2)
    fail(ErrorCode::data_error, "need at least 2 songs to split, have " +
                                    std::to_string(songs.size()));

  std::vector<const SongData*> train_songs, val_songs;
  for (const auto& song : songs) {
    const double frac = static_cast<double>(song_hash(song.id) >> 11) * 0x1.0p-53;
    (frac < a.val_split ? val_songs : train_songs).push_back(&song);
  }
  if (train_songs.empty() || val_songs.empty())
    fail(ErrorCode::data_error, "split produced an empty set (train " +
                                    std::to_string(train_songs.size()) + ", val " +
                                    std::to_string(val_songs.size()) + ")");
  std::cout << "train_songs=" << train_songs.size() << " val_songs=" << val_songs.size() << "\n";
  std::cout << "val_ids=";
  for (std::size_t i = 0; i < val_songs.size(); ++i)
    std::cout << (i ? "," : "") << val_songs[i]->id;
  std::cout << "\n";

  std::vector<FeatureMatrix> train_logs;
  for (const auto* song : train_songs) train_logs.push_back(log_compress(song->raw));
  const NormStats stats = fit_norm_stats(train_logs);

  int remapped_total = 0;
  std::vector<FeatureSegment> train_set;
  for (std::size_t i = 0; i < train_songs.size(); ++i) {
    const SongData& song = *train_songs[i];
    std::vector<std::pair<FeatureMatrix, AnnotationTrack>> variants;
    variants.emplace_back(train_logs[i], song.track);
    if (a.augment)
      for (int k = -5; k <= 6; ++k) {
        if (k == 0) continue;
        variants.push_back(pitch_shift(train_logs[i], song.track, k));
      }
    for (const auto& [logmat, track] : variants) {
      int remapped = 0;
      const std::vector<int> labels =
          align_labels(track, logmat.n_frames, vocab, logmat.sample_rate, logmat.hop, &remapped);
      remapped_total += remapped;
      for (auto& seg : segment(apply_norm(logmat, stats), labels, SegmentMode::train, song.id))
        train_set.push_back(std::move(seg));
    }
  }
  std::vector<FeatureSegment> val_set;
  for (const auto* song : val_songs) {
    const FeatureMatrix norm = apply_norm(log_compress(song->raw), stats);
    const std::vector<int> labels =
        align_labels(song->track, norm.n_frames, vocab, norm.sample_rate, norm.hop);
    for (auto& seg : segment(norm, labels, SegmentMode::inference, song->id))
      val_set.push_back(std::move(seg));
  }
  if (remapped_total > 0)
    std::cout << "warning: " << remapped_total
              << " frames with qualities outside maj/min remapped to no-chord\n";

  BtcConfig cfg;
  cfg.n_layers = a.n_layers;
  cfg.n_heads = a.n_heads;
  cfg.model_dim = a.model_dim;
  cfg.conv_repeats = a.conv_repeats;
  cfg.kernel = a.kernel;
  cfg.dropout = a.dropout;
  cfg.input_bins = kNumBins;
  cfg.vocab_size = vocab.size();
  cfg.seq_len = kSegmentFrames;
  cfg.validate();

  Rng model_rng(detail::splitmix64(seed ^ 0x6d6f64656cull));
  BtcModel<float> model(cfg, model_rng);
  std::cout << "params=" << model.num_params() << "\n";

  TrainConfig tc;
  tc.lr = a.lr;
  tc.decay = a.decay;
  tc.patience_epochs = a.patience;
  tc.batch_size = a.batch_size;
  tc.max_epochs = a.max_epochs;
  tc.seed = seed;
  const TrainingReport report = fit(model, train_set, val_set, tc, &std::cout);
  if (report.diverged) fail(ErrorCode::data_error, "training diverged (non-finite loss)");

  const fs::path out_parent = fs::path(a.out).parent_path();
  if (!out_parent.empty()) {
    std::error_code ec;
    fs::create_directories(out_parent, ec);
  }
  std::ofstream log(a.out + ".log", std::ios::trunc);
  if (!log) fail(ErrorCode::io_error, "cannot write " + a.out + ".log");
  for (const auto& e : report.epochs)
    log << "epoch=" << e.epoch << " loss=" << e.train_loss << " val_acc=" << e.val_accuracy
        << " lr=" << e.lr << "\n";
  write_stats(stats, a.out + ".stats");
  save_model(model, kind, stats, seed, a.out);
  std::cout << "best_epoch=" << report.best_epoch << " best_val_acc=" << report.best_val_accuracy
            << "\n"
            << "wrote " << a.out << "\n";
}

// --------------------------------------------------------------------- infer

struct InferArgs {
  std::string model;
  std::string features;
  std::string out;
};

void run_infer(const InferArgs& a, std::uint64_t seed) {
  if (a.model.empty() || a.features.empty() || a.out.empty())
    fail(ErrorCode::config_error, "--model, --features and --out are required");
  echo({{"command", "infer"},
        {"seed", std::to_string(seed)},
        {"model", a.model},
        {"features", a.features},
        {"out", a.out}});

  const LoadedModel bundle = load_model(a.model);
  const Vocabulary v = Vocabulary::make(bundle.vocab);
  if (v.size() != bundle.model.config().vocab_size)
    fail(ErrorCode::config_error, "checkpoint vocab_size " +
                                      std::to_string(bundle.model.config().vocab_size) +
                                      " does not match vocabulary " + vocab_kind_name(bundle.vocab));
  const FeatureMatrix raw = read_btcf(a.features);
  const std::vector<int> pred = predict_song(bundle.model, bundle.stats, raw);
  const AnnotationTrack track = merge_predictions(pred, v, raw.frame_duration());
  write_lab(track, a.out);
  std::cout << "wrote " << a.out << " with " << track.size() << " intervals\n";
}

// ---------------------------------------------------------------------- eval

struct EvalArgs {
  std::string ref;
  std::string est;
  std::string vocab = "majmin";
};

void run_eval(const EvalArgs& a, std::uint64_t seed) {
  if (a.ref.empty() || a.est.empty())
    fail(ErrorCode::config_error, "--ref and --est are required");
  const VocabKind kind = vocab_kind_from_name(a.vocab);
  echo({{"command", "eval"},
        {"seed", std::to_string(seed)},
        {"ref", a.ref},
        {"est", a.est},
        {"vocab", a.vocab}});

  if (!fs::is_directory(a.ref)) fail(ErrorCode::io_error, "not a directory: " + a.ref);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(a.ref))
    if (entry.path().extension() == ".lab") ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) fail(ErrorCode::data_error, "no .lab files in " + a.ref);

  std::vector<ScoredPair> pairs;
  for (const auto& id : ids) {
    const fs::path est_path = fs::path(a.est) / (id + ".lab");
    if (!fs::exists(est_path))
      fail(ErrorCode::not_found, "no estimate for song " + id + " in " + a.est);
    pairs.push_back({parse_lab((fs::path(a.ref) / (id + ".lab")).string()),
                     parse_lab(est_path.string())});
  }
  const std::vector<MetricRow> rows = report(pairs, kind);
  std::cout << format_report_table(rows) << format_report_csv(rows);
}

// ---------------------------------------------------------- export-attention

struct ExportArgs {
  std::string model;
  std::string features;
  std::string out;
  std::vector<int> layers;
  bool pgm = false;
};

void run_export_attention(const ExportArgs& a, std::uint64_t seed) {
  if (a.model.empty() || a.features.empty() || a.out.empty())
    fail(ErrorCode::config_error, "--model, --features and --out are required");
  std::string layer_list;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    layer_list += (i ? "," : "") + std::to_string(a.layers[i]);
  echo({{"command", "export-attention"},
        {"seed", std::to_string(seed)},
        {"model", a.model},
        {"features", a.features},
        {"out", a.out},
        {"layers", a.layers.empty() ? "all" : layer_list},
        {"pgm", a.pgm ? "1" : "0"}});

  const LoadedModel bundle = load_model(a.model);
  for (int layer : a.layers)
    if (layer < 1 || layer > bundle.model.config().n_layers)
      fail(ErrorCode::config_error, "layer " + std::to_string(layer) + " outside 1.." +
                                        std::to_string(bundle.model.config().n_layers));
  const FeatureMatrix raw = read_btcf(a.features);
  const FeatureMatrix norm = apply_norm(log_compress(raw), bundle.stats);
  // Maps are rendered for the first model-length window of the song.
  const std::vector<int> dummy(static_cast<std::size_t>(norm.n_frames), 0);
  const FeatureSegment first = segment(norm, dummy, SegmentMode::inference).front();
  const AttentionMapSet maps = bundle.model.attention_maps(segment_to_tensor<float>(first));
  const std::vector<std::string> written = write_attention(maps, a.out, a.layers, a.pgm);
  std::cout << "wrote " << written.size() << " files to " << a.out << "\n";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"BTC chord recognition toolkit"};
  app.require_subcommand(1);

  GlobalArgs g;
  g.seed_opt = app.add_option("--seed", g.seed, "RNG seed (fallback: config file, then $BTC_SEED)");
  app.add_option("--config", g.config_path, "key=value file overriding unset flags");

  SynthArgs synth;
  OverrideBook synth_book;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate a synthetic labeled corpus");
  synth_book.add(synth_cmd->add_option("--songs", synth.songs, "number of songs"), "songs",
                 [&](const std::string& v) { synth.songs = parse_int(v, "songs"); });
  synth_book.add(synth_cmd->add_option("--vocab", synth.vocab, "majmin|large"), "vocab",
                 [&](const std::string& v) { synth.vocab = v; });
  synth_book.add(synth_cmd->add_option("--noise", synth.noise, "noise sigma"), "noise",
                 [&](const std::string& v) { synth.noise = parse_double(v, "noise"); });
  synth_book.add(synth_cmd->add_option("--out", synth.out, "output directory"), "out",
                 [&](const std::string& v) { synth.out = v; });

  TrainArgs train;
  OverrideBook train_book;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a song directory");
  train_book.add(train_cmd->add_option("--data", train.data, "directory of .btcf/.lab pairs"),
                 "data", [&](const std::string& v) { train.data = v; });
  train_book.add(train_cmd->add_option("--val-split", train.val_split, "validation fraction"),
                 "val_split", [&](const std::string& v) { train.val_split = parse_double(v, "val_split"); });
  train_book.add(train_cmd->add_option("--vocab", train.vocab, "majmin|large"), "vocab",
                 [&](const std::string& v) { train.vocab = v; });
  train_book.add(train_cmd->add_option("--out", train.out, "checkpoint path"), "out",
                 [&](const std::string& v) { train.out = v; });
  train_book.add(train_cmd->add_option("--layers", train.n_layers, "layer repetitions"),
                 "n_layers", [&](const std::string& v) { train.n_layers = parse_int(v, "n_layers"); });
  train_book.add(train_cmd->add_option("--heads", train.n_heads, "attention heads"), "n_heads",
                 [&](const std::string& v) { train.n_heads = parse_int(v, "n_heads"); });
  train_book.add(train_cmd->add_option("--dim", train.model_dim, "model width"), "model_dim",
                 [&](const std::string& v) { train.model_dim = parse_int(v, "model_dim"); });
  train_book.add(train_cmd->add_option("--conv-repeats", train.conv_repeats, "conv block repeats"),
                 "conv_repeats",
                 [&](const std::string& v) { train.conv_repeats = parse_int(v, "conv_repeats"); });
  train_book.add(train_cmd->add_option("--kernel", train.kernel, "conv kernel width"), "kernel",
                 [&](const std::string& v) { train.kernel = parse_int(v, "kernel"); });
  train_book.add(train_cmd->add_option("--dropout", train.dropout, "dropout probability"),
                 "dropout", [&](const std::string& v) { train.dropout = parse_double(v, "dropout"); });
  train_book.add(train_cmd->add_option("--lr", train.lr, "initial learning rate"), "lr",
                 [&](const std::string& v) { train.lr = parse_double(v, "lr"); });
  train_book.add(train_cmd->add_option("--decay", train.decay, "lr decay on non-improvement"),
                 "decay", [&](const std::string& v) { train.decay = parse_double(v, "decay"); });
  train_book.add(train_cmd->add_option("--batch", train.batch_size, "segments per step"),
                 "batch_size",
                 [&](const std::string& v) { train.batch_size = parse_int(v, "batch_size"); });
  train_book.add(train_cmd->add_option("--epochs", train.max_epochs, "max epochs"), "max_epochs",
                 [&](const std::string& v) { train.max_epochs = parse_int(v, "max_epochs"); });
  train_book.add(train_cmd->add_option("--patience", train.patience, "early-stop patience"),
                 "patience", [&](const std::string& v) { train.patience = parse_int(v, "patience"); });
  train_book.add(train_cmd->add_flag("--augment", train.augment, "add all +-5..+6 pitch shifts"),
                 "augment", [&](const std::string& v) { train.augment = parse_bool(v, "augment"); });

  InferArgs infer;
  OverrideBook infer_book;
  auto* infer_cmd = app.add_subcommand("infer", "Annotate features with a trained model");
  infer_book.add(infer_cmd->add_option("--model", infer.model, "checkpoint path"), "model",
                 [&](const std::string& v) { infer.model = v; });
  infer_book.add(infer_cmd->add_option("--features", infer.features, "input .btcf"), "features",
                 [&](const std::string& v) { infer.features = v; });
  infer_book.add(infer_cmd->add_option("--out", infer.out, "output .lab"), "out",
                 [&](const std::string& v) { infer.out = v; });

  EvalArgs eval;
  OverrideBook eval_book;
  auto* eval_cmd = app.add_subcommand("eval", "Score estimate labels against references");
  eval_book.add(eval_cmd->add_option("--ref", eval.ref, "reference .lab directory"), "ref",
                [&](const std::string& v) { eval.ref = v; });
  eval_book.add(eval_cmd->add_option("--est", eval.est, "estimate .lab directory"), "est",
                [&](const std::string& v) { eval.est = v; });
  eval_book.add(eval_cmd->add_option("--vocab", eval.vocab, "majmin|large"), "vocab",
                [&](const std::string& v) { eval.vocab = v; });

  ExportArgs exp;
  OverrideBook exp_book;
  auto* exp_cmd = app.add_subcommand("export-attention", "Dump attention maps for a song");
  exp_book.add(exp_cmd->add_option("--model", exp.model, "checkpoint path"), "model",
               [&](const std::string& v) { exp.model = v; });
  exp_book.add(exp_cmd->add_option("--features", exp.features, "input .btcf"), "features",
               [&](const std::string& v) { exp.features = v; });
  exp_book.add(exp_cmd->add_option("--out", exp.out, "output directory"), "out",
               [&](const std::string& v) { exp.out = v; });
  exp_book.add(exp_cmd->add_option("--layers", exp.layers, "1-based layer filter")->delimiter(','),
               "layers", [&](const std::string& v) {
                 exp.layers.clear();
                 std::istringstream ss(v);
                 std::string part;
                 while (std::getline(ss, part, ','))
                   exp.layers.push_back(parse_int(part, "layers"));
               });
  exp_book.add(exp_cmd->add_flag("--pgm", exp.pgm, "also write graymap renderings"), "pgm",
               [&](const std::string& v) { exp.pgm = parse_bool(v, "pgm"); });

  try {
    app.parse(argc, argv);
    const std::map<std::string, std::string> cfg = load_config_file(g.config_path);
    const std::uint64_t seed = g.resolve_seed(cfg);
    if (synth_cmd->parsed()) {
      synth_book.apply(cfg);
      run_synth_data(synth, seed);
    } else if (train_cmd->parsed()) {
      train_book.apply(cfg);
      run_train(train, seed);
    } else if (infer_cmd->parsed()) {
      infer_book.apply(cfg);
      run_infer(infer, seed);
    } else if (eval_cmd->parsed()) {
      eval_book.apply(cfg);
      run_eval(eval, seed);
    } else if (exp_cmd->parsed()) {
      exp_book.apply(cfg);
      run_export_attention(exp, seed);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits 0, every usage error exits 2
  } catch (const Error& e) {
    std::cerr << "error: " << error_code_name(e.code()) << ": " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

}  // namespace btc
