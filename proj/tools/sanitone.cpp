// sanitone: feature-level voice sanitization toolkit.
//
// Subcommands: extract | train | freeze | sanitize | evaluate | bench | stats

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "sanitone/config.hpp"
#include "sanitone/cyclegan.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/evaluation.hpp"
#include "sanitone/overhead.hpp"
#include "sanitone/pipeline.hpp"
#include "sanitone/resample.hpp"
#include "sanitone/wav_io.hpp"

namespace fs = std::filesystem;
using namespace sanitone;

namespace {

Config load_config_or_default(const std::string& path) {
  if (path.empty()) {
    Config cfg;
    cfg.arch.feature_dim = cfg.features.order + 1;
    return cfg;
  }
  return load_config(path);
}

Corpus load_corpus(const std::string& manifest, const std::string& corpus_dir) {
  if (!manifest.empty()) return read_manifest(manifest);
  if (!corpus_dir.empty()) return scan_ravdess_dir(corpus_dir);
  throw ValidationError("either --manifest or --corpus is required");
}

Corpus entries_with_role(const Corpus& c, SplitRole wanted) {
  Corpus out;
  const bool any_roles = c.count_role(SplitRole::kTrain) > 0 ||
                         c.count_role(SplitRole::kTest) > 0;
  for (const auto& e : c.entries)
    if (!any_roles || e.role == wanted) out.entries.push_back(e);
  return out;
}

struct TrainArgs {
  std::string config_path;
  std::string manifest;
  std::string corpus_dir;
  std::string out_filter;
  std::string out_checkpoint;
  std::optional<std::uint64_t> seed;
  bool single_precision = false;
};

int run_train(const TrainArgs& args) {
  Config cfg = load_config_or_default(args.config_path);
  if (args.seed) cfg.train.seed = *args.seed;

  const std::string corpus_dir = !args.corpus_dir.empty()
                                     ? args.corpus_dir
                                     : cfg.paths.corpus_dir.string();
  Corpus corpus = load_corpus(args.manifest, corpus_dir);
  corpus = entries_with_role(corpus, SplitRole::kTrain);
  if (corpus.entries.empty()) throw EmptyCorpus("no training entries");

  Corpus domain_x, domain_y;
  for (const auto& e : corpus.entries) {
    const bool emotional =
        cfg.pool_emotions ? e.emotion != EmotionLabel::kNeutral
                          : e.emotion == emotion_from_name(cfg.emotion);
    if (emotional)
      domain_x.entries.push_back(e);
    else if (e.emotion == EmotionLabel::kNeutral)
      domain_y.entries.push_back(e);
  }
  if (domain_x.entries.empty() || domain_y.entries.empty())
    throw EmptyCorpus("need both emotional (X) and neutral (Y) utterances");

  std::cerr << "extracting features: " << domain_x.size() << " emotional, "
            << domain_y.size() << " neutral utterances\n";
  const FeatureExtraction fx =
      extract_features(domain_x, cfg.vocoder, cfg.features, cfg.paths.cache_dir);
  const FeatureExtraction fy =
      extract_features(domain_y, cfg.vocoder, cfg.features, cfg.paths.cache_dir);
  for (const auto& [idx, msg] : fx.errors)
    std::cerr << "warning: skipping " << domain_x.entries[idx].path << ": " << msg
              << "\n";
  for (const auto& [idx, msg] : fy.errors)
    std::cerr << "warning: skipping " << domain_y.entries[idx].path << ": " << msg
              << "\n";

  std::vector<F0Track> tracks_x, tracks_y;
  std::vector<McepSequence> mceps_x, mceps_y, pooled;
  for (const auto& u : fx.utterances)
    if (u) {
      tracks_x.push_back(u->analysis.f0);
      mceps_x.push_back(u->mcep);
      pooled.push_back(u->mcep);
    }
  for (const auto& u : fy.utterances)
    if (u) {
      tracks_y.push_back(u->analysis.f0);
      mceps_y.push_back(u->mcep);
      pooled.push_back(u->mcep);
    }
  if (mceps_x.empty() || mceps_y.empty())
    throw EmptyCorpus("feature extraction left a domain empty");

  const F0Stats f0_src = compute_f0_stats(tracks_x);
  const F0Stats f0_tgt = compute_f0_stats(tracks_y);
  const FeatureStats feat_stats = compute_feature_stats(pooled);

  for (auto& m : mceps_x) m = normalize(m, feat_stats);
  for (auto& m : mceps_y) m = normalize(m, feat_stats);

  std::cerr << "training " << cfg.train.iterations << " iterations (seed "
            << cfg.train.seed << ")\n";
  auto [model, history] = train(mceps_x, mceps_y, cfg.arch, cfg.train);
  if (!history.records.empty()) {
    const auto& last = history.records.back();
    std::cerr << "final losses: generator " << last.losses.total_g
              << ", discriminator " << last.losses.total_d << "\n";
  }

  FrozenFilter filter =
      freeze(model, f0_src, f0_tgt, feat_stats, cfg.vocoder, cfg.features);
  if (args.single_precision) filter = to_single_precision(filter);

  const fs::path out = !args.out_filter.empty() ? fs::path(args.out_filter)
                                                : cfg.paths.filter_path;
  if (out.empty()) throw ValidationError("--out");
  save_filter(out, filter);
  std::cout << "filter written to " << out.string() << "\n";

  if (!args.out_checkpoint.empty()) {
    save_checkpoint(args.out_checkpoint,
                    Checkpoint{model, f0_src, f0_tgt, feat_stats, cfg.vocoder,
                               cfg.features});
    std::cout << "checkpoint written to " << args.out_checkpoint << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"feature-level voice sanitization toolkit"};
  app.require_subcommand(1);

  // ---- extract ----
  auto* extract_cmd =
      app.add_subcommand("extract", "scan a corpus and build the feature cache");
  std::string ex_config, ex_corpus, ex_manifest_out, ex_cache;
  extract_cmd->add_option("--config", ex_config, "configuration file");
  extract_cmd->add_option("--corpus", ex_corpus, "corpus directory")->required();
  extract_cmd->add_option("--manifest", ex_manifest_out, "manifest CSV to write");
  extract_cmd->add_option("--cache", ex_cache, "feature cache directory");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the conversion model");
  TrainArgs train_args;
  std::uint64_t seed_opt = 0;
  bool seed_given = false;
  train_cmd->add_option("--config", train_args.config_path, "configuration file");
  train_cmd->add_option("--manifest", train_args.manifest, "corpus manifest CSV");
  train_cmd->add_option("--corpus", train_args.corpus_dir, "corpus directory");
  train_cmd->add_option("--out", train_args.out_filter, "output filter file");
  train_cmd->add_option("--checkpoint", train_args.out_checkpoint,
                        "also write a full-model checkpoint");
  train_cmd->add_flag("--f32", train_args.single_precision,
                      "store filter weights as 32-bit floats");
  train_cmd->add_option("--seed", seed_opt, "random seed")
      ->each([&](const std::string&) { seed_given = true; });

  // ---- freeze ----
  auto* freeze_cmd =
      app.add_subcommand("freeze", "export a filter from a checkpoint");
  std::string fr_checkpoint, fr_out;
  bool fr_f32 = false;
  freeze_cmd->add_option("--checkpoint", fr_checkpoint, "checkpoint file")
      ->required();
  freeze_cmd->add_option("--out", fr_out, "output filter file")->required();
  freeze_cmd->add_flag("--f32", fr_f32, "store weights as 32-bit floats");

  // ---- sanitize ----
  auto* sanitize_cmd = app.add_subcommand("sanitize", "sanitize one wav file");
  std::string sa_filter, sa_in, sa_out;
  sanitize_cmd->add_option("--filter", sa_filter, "frozen filter file")->required();
  sanitize_cmd->add_option("--in", sa_in, "input wav")->required();
  sanitize_cmd->add_option("--out", sa_out, "output wav")->required();

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "score raw vs sanitized corpora (WER, EER, emotion accuracy)");
  std::string ev_config, ev_manifest, ev_corpus, ev_sanitized, ev_ref, ev_hyp,
      ev_platform = "host", ev_out_dir = ".";
  std::uint64_t ev_seed = 1;
  eval_cmd->add_option("--config", ev_config, "configuration file");
  eval_cmd->add_option("--manifest", ev_manifest, "corpus manifest CSV");
  eval_cmd->add_option("--corpus", ev_corpus, "corpus directory");
  eval_cmd->add_option("--sanitized", ev_sanitized, "sanitized wav directory")
      ->required();
  eval_cmd->add_option("--ref", ev_ref, "reference transcript directory")
      ->required();
  eval_cmd->add_option("--hyp", ev_hyp, "hypothesis transcript directory")
      ->required();
  eval_cmd->add_option("--platform", ev_platform, "platform tag for the report");
  eval_cmd->add_option("--out-dir", ev_out_dir, "report output directory");
  eval_cmd->add_option("--seed", ev_seed, "classifier training seed");

  // ---- bench ----
  auto* bench_cmd =
      app.add_subcommand("bench", "overhead staging benchmark (load/filter/emit)");
  std::string be_filter, be_in, be_mode = "filtered", be_out, be_meter,
              be_energy_out, be_out_dir, be_upload;
  int be_runs = 5;
  bench_cmd->add_option("--filter", be_filter, "frozen filter file");
  bench_cmd->add_option("--in", be_in, "input wav")->required();
  bench_cmd->add_option("--mode", be_mode, "baseline or filtered")
      ->check(CLI::IsMember({"baseline", "filtered"}));
  bench_cmd->add_option("--runs", be_runs, "number of runs")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", be_out, "stage timing CSV");
  bench_cmd->add_option("--meter", be_meter, "external meter CSV (epoch_millis,watts)");
  bench_cmd->add_option("--energy-out", be_energy_out, "energy CSV to write");
  bench_cmd->add_option("--out-dir", be_out_dir, "directory for emitted audio");
  bench_cmd->add_option("--upload-url", be_upload, "HTTP POST sink for emitted audio");

  // ---- stats ----
  auto* stats_cmd =
      app.add_subcommand("stats", "per-frame amplitude/intensity/F0 statistics");
  std::string st_config, st_in, st_out;
  stats_cmd->add_option("--config", st_config, "configuration file");
  stats_cmd->add_option("--in", st_in, "input wav")->required();
  stats_cmd->add_option("--out", st_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    if (*extract_cmd) {
      const Config cfg = load_config_or_default(ex_config);
      const Corpus corpus = scan_ravdess_dir(ex_corpus);
      std::cerr << "found " << corpus.size() << " corpus files\n";
      if (!ex_manifest_out.empty()) write_manifest(ex_manifest_out, corpus);
      const fs::path cache =
          !ex_cache.empty() ? fs::path(ex_cache) : cfg.paths.cache_dir;
      if (!cache.empty()) {
        const FeatureExtraction fx =
            extract_features(corpus, cfg.vocoder, cfg.features, cache);
        for (const auto& [idx, msg] : fx.errors)
          std::cerr << "warning: " << corpus.entries[idx].path << ": " << msg
                    << "\n";
        std::cerr << "cached " << (corpus.size() - fx.errors.size())
                  << " feature sets under " << cache.string() << "\n";
      }
      return 0;
    }

    if (*train_cmd) {
      if (seed_given) train_args.seed = seed_opt;
      return run_train(train_args);
    }

    if (*freeze_cmd) {
      const Checkpoint c = load_checkpoint(fr_checkpoint);
      FrozenFilter f = freeze(c.model, c.f0_src, c.f0_tgt, c.feature_stats,
                              c.vocoder, c.features);
      if (fr_f32) f = to_single_precision(f);
      save_filter(fr_out, f);
      std::cout << "filter written to " << fr_out << "\n";
      return 0;
    }

    if (*sanitize_cmd) {
      const FrozenFilter f = load_filter(sa_filter);
      const Waveform in = read_wav(sa_in);
      write_wav(sa_out, sanitize(in, f));
      return 0;
    }

    if (*eval_cmd) {
      const Config cfg = load_config_or_default(ev_config);
      const Corpus corpus = load_corpus(ev_manifest, ev_corpus);
      const Corpus train_set = entries_with_role(corpus, SplitRole::kTrain);
      const Corpus test_set = entries_with_role(corpus, SplitRole::kTest);
      if (train_set.entries.empty() || test_set.entries.empty())
        throw EmptyCorpus("need both train and test entries for evaluation");

      const FeatureExtraction fx =
          extract_features(train_set, cfg.vocoder, cfg.features, cfg.paths.cache_dir);
      std::vector<std::vector<double>> clf_features;
      std::vector<EmotionLabel> clf_labels;
      for (std::size_t i = 0; i < train_set.size(); ++i) {
        if (!fx.utterances[i]) continue;
        clf_features.push_back(utterance_stat_vector(fx.utterances[i]->analysis,
                                                     fx.utterances[i]->mcep));
        clf_labels.push_back(train_set.entries[i].emotion);
      }
      ClassifierConfig clf_cfg;
      clf_cfg.seed = ev_seed;
      const EmotionClassifier clf =
          train_emotion_classifier(clf_features, clf_labels, clf_cfg);

      const auto items = build_eval_items(test_set, ev_sanitized, ev_ref, ev_hyp,
                                          cfg.vocoder, cfg.features);
      const EvalReport report = evaluate_corpus(items, clf, ev_platform);

      fs::create_directories(ev_out_dir);
      write_report_csv(fs::path(ev_out_dir) / "report.csv", report);
      write_confusion_csv(fs::path(ev_out_dir) / "confusion.csv", report);
      std::cout << "wer," << report.platform << ',' << report.wer << "\n";
      std::cout << "eer," << report.platform << ',' << report.eer << "\n";
      std::cout << "emotion_accuracy," << report.platform << ','
                << report.emotion_accuracy << "\n";
      return 0;
    }

    if (*bench_cmd) {
      BenchMode mode;
      if (be_mode == "baseline") mode = BenchMode::kBaseline;
      else if (be_mode == "filtered") mode = BenchMode::kFiltered;
      else throw ValidationError("--mode must be baseline or filtered");

      std::optional<FrozenFilter> filter;
      if (mode == BenchMode::kFiltered) {
        if (be_filter.empty())
          throw ValidationError("--filter is required in filtered mode");
        filter = load_filter(be_filter);
      }
      BenchSink sink;
      sink.out_dir = be_out_dir;
      sink.upload_url = be_upload;

      const OverheadReport report = measure_overhead(
          be_in, filter ? &*filter : nullptr, mode, be_runs, sink);
      if (!be_out.empty()) write_overhead_csv(be_out, report);
      for (const auto& agg : report.aggregates())
        std::cout << agg.stage << ": median " << agg.median_ms << " ms (min "
                  << agg.min_ms << ", max " << agg.max_ms << ")\n";
      std::cout << "total: median " << report.median_total_ms() << " ms over "
                << report.runs.size() << " runs\n";

      if (!be_meter.empty()) {
        const auto meter = load_meter_csv(be_meter);
        const auto rows = integrate_energy(report, meter);
        if (!be_energy_out.empty()) write_energy_csv(be_energy_out, rows);
        double total_j = 0.0;
        for (const auto& row : rows) total_j += row.joules;
        std::cout << "metered energy: " << total_j << " J across all runs\n";
      }
      return 0;
    }

    if (*stats_cmd) {
      const Config cfg = load_config_or_default(st_config);
      Waveform w = read_wav(st_in);
      if (w.sample_rate_hz != 16000) w = resample(w, 16000);
      const SpectroStats s = spectrogram_stats(w, cfg.vocoder);
      std::ofstream os(st_out, std::ios::trunc);
      if (!os) throw IoError("cannot open " + st_out + " for writing");
      os << "frame,time_ms,peak_amplitude,intensity_db,f0_hz\n";
      for (std::size_t f = 0; f < s.f0_hz.size(); ++f)
        os << f << ',' << f * cfg.vocoder.frame_period_ms << ','
           << s.peak_amplitude[f] << ',' << s.intensity_db[f] << ',' << s.f0_hz[f]
           << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
