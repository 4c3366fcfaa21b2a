#include "sanitone/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sanitone/detail/rng.hpp"
#include "sanitone/errors.hpp"

namespace sanitone {

double word_error_rate(std::span<const std::string> reference,
                       std::span<const std::string> hypothesis) {
  if (reference.empty()) throw EmptyReference("reference transcript is empty");
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();

  // two-row Levenshtein with unit costs
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub =
          prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

std::vector<std::string> tokenize_transcript(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

double equal_error_rate(const ScoreSet& s) {
  if (s.genuine.empty() || s.impostor.empty())
    throw EmptyScores("both genuine and impostor scores are required");

  std::vector<double> genuine = s.genuine;
  std::vector<double> impostor = s.impostor;
  std::sort(genuine.begin(), genuine.end());
  std::sort(impostor.begin(), impostor.end());

  std::vector<double> thresholds;
  thresholds.reserve(genuine.size() + impostor.size());
  thresholds.insert(thresholds.end(), genuine.begin(), genuine.end());
  thresholds.insert(thresholds.end(), impostor.begin(), impostor.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double ng = static_cast<double>(genuine.size());
  const double ni = static_cast<double>(impostor.size());

  // accept when score >= threshold
  auto far_at = [&](double t) {
    const auto it = std::lower_bound(impostor.begin(), impostor.end(), t);
    return static_cast<double>(impostor.end() - it) / ni;
  };
  auto frr_at = [&](double t) {
    const auto it = std::lower_bound(genuine.begin(), genuine.end(), t);
    return static_cast<double>(it - genuine.begin()) / ng;
  };

  // ROC sweep from "accept everything" to "reject everything"
  double prev_far = 1.0, prev_frr = 0.0;
  for (std::size_t i = 0; i <= thresholds.size(); ++i) {
    double far, frr;
    if (i < thresholds.size()) {
      far = far_at(thresholds[i]);
      frr = frr_at(thresholds[i]);
    } else {
      far = 0.0;
      frr = 1.0;
    }
    const double prev_diff = prev_far - prev_frr;
    const double diff = far - frr;
    if (diff <= 0.0) {
      // crossing lies on this ROC segment
      if (prev_diff == diff) return prev_far;
      const double t = prev_diff / (prev_diff - diff);
      return prev_far + t * (far - prev_far);
    }
    prev_far = far;
    prev_frr = frr;
  }
  return prev_far;  // unreachable: the final point always has diff <= 0
}

std::vector<double> speaker_embedding(const AnalysisResult& a) {
  std::size_t voiced = a.f0.voiced_count();
  if (voiced < 10)
    throw TooFewVoicedFrames("need at least 10 voiced frames, got " +
                             std::to_string(voiced));

  const McepSequence m = sp_to_mcep(a.spectral_envelope, FeatureConfig{});
  std::vector<double> emb(m.width() + 2, 0.0);
  for (std::size_t f = 0; f < m.frames(); ++f) {
    if (!a.f0.voiced(f)) continue;
    const auto row = m.coeffs.row(f);
    for (std::size_t d = 0; d < m.width(); ++d) emb[d] += row[d];
  }
  for (std::size_t d = 0; d < m.width(); ++d)
    emb[d] /= static_cast<double>(voiced);

  const F0Stats stats = compute_f0_stats(std::vector<F0Track>{a.f0});
  emb[m.width()] = stats.mean_log_f0;
  emb[m.width() + 1] = stats.std_log_f0;
  return emb;
}

double speaker_score(std::span<const double> e1, std::span<const double> e2) {
  if (e1.size() != e2.size())
    throw DimensionMismatch("embedding sizes differ");
  if (std::equal(e1.begin(), e1.end(), e2.begin())) return 1.0;
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) {
    dot += e1[i] * e2[i];
    n1 += e1[i] * e1[i];
    n2 += e2[i] * e2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(n1 * n2), -1.0, 1.0);
}

std::vector<double> utterance_stat_vector(const AnalysisResult& a,
                                          const McepSequence& m) {
  const std::size_t dims = m.width();
  std::vector<double> out(2 * dims + 3, 0.0);
  const double frames = static_cast<double>(m.frames());
  for (std::size_t f = 0; f < m.frames(); ++f) {
    const auto row = m.coeffs.row(f);
    for (std::size_t d = 0; d < dims; ++d) out[d] += row[d];
  }
  for (std::size_t d = 0; d < dims; ++d) out[d] /= frames;
  for (std::size_t f = 0; f < m.frames(); ++f) {
    const auto row = m.coeffs.row(f);
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = row[d] - out[d];
      out[dims + d] += diff * diff;
    }
  }
  for (std::size_t d = 0; d < dims; ++d)
    out[dims + d] = std::sqrt(out[dims + d] / frames);

  double log_sum = 0.0, log_sq = 0.0;
  std::size_t voiced = 0;
  for (double v : a.f0.values_hz) {
    if (v <= 0.0) continue;
    const double lv = std::log(v);
    log_sum += lv;
    log_sq += lv * lv;
    ++voiced;
  }
  if (voiced > 0) {
    const double mean = log_sum / static_cast<double>(voiced);
    out[2 * dims] = mean;
    out[2 * dims + 1] =
        std::sqrt(std::max(0.0, log_sq / static_cast<double>(voiced) - mean * mean));
  }
  out[2 * dims + 2] =
      a.f0.frames() > 0
          ? static_cast<double>(voiced) / static_cast<double>(a.f0.frames())
          : 0.0;
  return out;
}

EmotionClassifier train_emotion_classifier(
    std::span<const std::vector<double>> features,
    std::span<const EmotionLabel> labels, const ClassifierConfig& cfg) {
  if (features.size() != labels.size())
    throw DimensionMismatch("feature/label count mismatch");

  std::size_t per_class[kEmotionCount] = {};
  for (const auto& l : labels) ++per_class[static_cast<int>(l)];
  int present = 0;
  bool thin = false;
  for (std::size_t n : per_class) {
    if (n > 0) {
      ++present;
      if (n < 2) thin = true;
    }
  }
  if (present < 2 || thin)
    throw DegenerateTrainingSet(
        "need at least 2 classes with at least 2 examples each");

  const std::size_t dims = features.front().size();
  for (const auto& f : features)
    if (f.size() != dims) throw DimensionMismatch("inconsistent feature sizes");

  EmotionClassifier clf;
  // z-score normalization of input statistics
  std::vector<McepSequence> wrap(1);
  wrap[0].coeffs = Matrix(features.size(), dims);
  for (std::size_t i = 0; i < features.size(); ++i)
    for (std::size_t d = 0; d < dims; ++d) wrap[0].coeffs(i, d) = features[i][d];
  clf.input_norm = compute_feature_stats(wrap);

  nn::Layer linear;
  linear.kind = nn::LayerKind::kLinear;
  linear.name = "softmax_regression";
  linear.weight = nn::Tensor({static_cast<std::size_t>(kEmotionCount), dims});
  linear.bias = nn::Tensor({static_cast<std::size_t>(kEmotionCount)});
  clf.net.layers.push_back(linear);
  detail::Rng rng(cfg.seed);
  nn::init_params(clf.net, rng);

  nn::AdamState adam = nn::make_adam_state(clf.net);

  std::vector<nn::Tensor> inputs;
  inputs.reserve(features.size());
  for (const auto& f : features) {
    nn::Tensor t({dims});
    for (std::size_t d = 0; d < dims; ++d)
      t.data[d] = (f[d] - clf.input_norm.mean[d]) / clf.input_norm.stddev[d];
    inputs.push_back(std::move(t));
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    nn::Gradients total;
    total.weight.emplace_back(clf.net.layers[0].weight.shape);
    total.bias.emplace_back(clf.net.layers[0].bias.shape);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      nn::ForwardCache cache;
      const nn::Tensor logits = nn::forward(clf.net, inputs[i], &cache);
      // softmax cross-entropy gradient: prob - onehot
      double max_logit = logits.data[0];
      for (double v : logits.data) max_logit = std::max(max_logit, v);
      double denom = 0.0;
      nn::Tensor grad(logits.shape);
      for (std::size_t k = 0; k < logits.size(); ++k) {
        grad.data[k] = std::exp(logits.data[k] - max_logit);
        denom += grad.data[k];
      }
      for (std::size_t k = 0; k < logits.size(); ++k) grad.data[k] /= denom;
      grad.data[static_cast<std::size_t>(labels[i])] -= 1.0;
      total.accumulate(nn::backward(clf.net, cache, grad));
    }
    total.scale_all(1.0 / static_cast<double>(inputs.size()));
    nn::adam_step(clf.net, total, adam, cfg.lr);
  }
  return clf;
}

std::pair<EmotionLabel, std::vector<double>> classify_emotion(
    const EmotionClassifier& clf, std::span<const double> features) {
  const std::size_t dims = clf.input_norm.dims();
  if (features.size() != dims)
    throw DimensionMismatch("feature size does not match the classifier");
  nn::Tensor t({dims});
  for (std::size_t d = 0; d < dims; ++d)
    t.data[d] = (features[d] - clf.input_norm.mean[d]) / clf.input_norm.stddev[d];
  const nn::Tensor logits = nn::forward(clf.net, t);

  double max_logit = logits.data[0];
  for (double v : logits.data) max_logit = std::max(max_logit, v);
  std::vector<double> probs(logits.size());
  double denom = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits.data[k] - max_logit);
    denom += probs[k];
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    probs[k] /= denom;
    if (probs[k] > probs[best]) best = k;
  }
  return {static_cast<EmotionLabel>(best), probs};
}

SpectroStats spectrogram_stats(const Waveform& w, const VocoderConfig& cfg) {
  if (w.empty()) throw EmptySignal("cannot analyze an empty waveform");
  cfg.validate();

  SpectroStats s;
  const F0Track f0 = estimate_f0(w, cfg);
  s.f0_hz = f0.values_hz;

  const double hop = w.sample_rate_hz * cfg.frame_period_ms / 1000.0;
  const std::size_t frames = f0.frames();
  s.peak_amplitude.resize(frames);
  s.intensity_db.resize(frames);
  constexpr double kIntensityRef = 1e-8;
  constexpr double kEnergyFloor = 1e-12;

  for (std::size_t f = 0; f < frames; ++f) {
    const long center = std::lround(static_cast<double>(f) * hop);
    const long lo = std::max<long>(0, center - std::lround(hop / 2));
    const long hi =
        std::min<long>(static_cast<long>(w.size()), center + std::lround(hop / 2) + 1);
    double peak = 0.0, energy = 0.0;
    for (long i = lo; i < hi; ++i) {
      const double v = w.samples[static_cast<std::size_t>(i)];
      peak = std::max(peak, std::fabs(v));
      energy += v * v;
    }
    const double mean_sq = hi > lo ? energy / static_cast<double>(hi - lo) : 0.0;
    s.peak_amplitude[f] = peak;
    s.intensity_db[f] = 10.0 * std::log10(std::max(mean_sq, kEnergyFloor) / kIntensityRef);
  }
  return s;
}

EvalReport evaluate_corpus(std::span<const EvalItem> items,
                           const EmotionClassifier& clf,
                           const std::string& platform_tag) {
  EvalReport r;
  r.platform = platform_tag;
  r.confusion.assign(kEmotionCount, std::vector<std::size_t>(kEmotionCount, 0));
  if (items.empty()) return r;

  // corpus-level WER: total edit errors over total reference tokens
  std::size_t total_ref = 0;
  double total_errors = 0.0;
  for (const auto& item : items) {
    if (item.reference.empty())
      throw EmptyReference("empty reference transcript for " + item.name);
    total_errors +=
        word_error_rate(item.reference, item.hypothesis) * item.reference.size();
    total_ref += item.reference.size();
  }
  r.wer = total_errors / static_cast<double>(total_ref);

  // speaker verification: genuine pairs are raw vs own sanitized version,
  // impostor pairs cross different speakers
  std::vector<std::vector<double>> raw_emb(items.size()), san_emb(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    raw_emb[i] = speaker_embedding(items[i].raw_analysis);
    san_emb[i] = speaker_embedding(items[i].sanitized_analysis);
  }
  ScoreSet scores;
  for (std::size_t i = 0; i < items.size(); ++i) {
    scores.genuine.push_back(speaker_score(raw_emb[i], san_emb[i]));
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (items[i].speaker_id == items[j].speaker_id) continue;
      scores.impostor.push_back(speaker_score(raw_emb[i], san_emb[j]));
    }
  }
  r.eer = scores.impostor.empty() ? 0.0 : equal_error_rate(scores);

  // emotion recognition on the sanitized features
  std::size_t correct = 0;
  for (const auto& item : items) {
    const auto stats =
        utterance_stat_vector(item.sanitized_analysis, item.sanitized_mcep);
    const auto [label, probs] = classify_emotion(clf, stats);
    r.confusion[static_cast<int>(item.emotion)][static_cast<int>(label)] += 1;
    if (label == item.emotion) ++correct;
  }
  r.emotion_accuracy = static_cast<double>(correct) / static_cast<double>(items.size());
  return r;
}

namespace {

std::vector<std::string> read_transcript_file(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw AlignmentError("missing transcript file: " + p.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return tokenize_transcript(buf.str());
}

}  // namespace

std::vector<EvalItem> build_eval_items(const Corpus& test_corpus,
                                       const std::filesystem::path& sanitized_dir,
                                       const std::filesystem::path& reference_dir,
                                       const std::filesystem::path& hypothesis_dir,
                                       const VocoderConfig& vc,
                                       const FeatureConfig& fc) {
  Corpus sanitized;
  for (const auto& e : test_corpus.entries) {
    const auto twin = sanitized_dir / e.path.filename();
    if (!std::filesystem::exists(twin))
      throw AlignmentError("missing sanitized file: " + twin.string());
    CorpusEntry copy = e;
    copy.path = twin;
    sanitized.entries.push_back(copy);
  }

  const FeatureExtraction raw_fx = extract_features(test_corpus, vc, fc);
  const FeatureExtraction san_fx = extract_features(sanitized, vc, fc);
  for (const auto& [idx, msg] : raw_fx.errors)
    throw AlignmentError("cannot extract " +
                         test_corpus.entries[idx].path.string() + ": " + msg);
  for (const auto& [idx, msg] : san_fx.errors)
    throw AlignmentError("cannot extract " +
                         sanitized.entries[idx].path.string() + ": " + msg);

  std::vector<EvalItem> items;
  items.reserve(test_corpus.size());
  for (std::size_t i = 0; i < test_corpus.size(); ++i) {
    const auto& e = test_corpus.entries[i];
    EvalItem item;
    item.speaker_id = e.actor_id;
    item.emotion = e.emotion;
    item.name = e.path.filename().string();
    item.raw_analysis = raw_fx.utterances[i]->analysis;
    item.raw_mcep = raw_fx.utterances[i]->mcep;
    item.sanitized_analysis = san_fx.utterances[i]->analysis;
    item.sanitized_mcep = san_fx.utterances[i]->mcep;
    const std::string stem = e.path.stem().string() + ".txt";
    item.reference = read_transcript_file(reference_dir / stem);
    item.hypothesis = read_transcript_file(hypothesis_dir / stem);
    items.push_back(std::move(item));
  }
  return items;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "metric,platform,value\n";
  os << "wer," << r.platform << ',' << r.wer << '\n';
  os << "eer," << r.platform << ',' << r.eer << '\n';
  os << "emotion_accuracy," << r.platform << ',' << r.emotion_accuracy << '\n';
  if (!os) throw IoError("short write to " + path.string());
}

void write_confusion_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "true\\predicted";
  for (int k = 0; k < kEmotionCount; ++k)
    os << ',' << emotion_name(static_cast<EmotionLabel>(k));
  os << '\n';
  for (int i = 0; i < kEmotionCount; ++i) {
    os << emotion_name(static_cast<EmotionLabel>(i));
    for (int j = 0; j < kEmotionCount; ++j) os << ',' << r.confusion[i][j];
    os << '\n';
  }
  if (!os) throw IoError("short write to " + path.string());
}

}  // namespace sanitone
