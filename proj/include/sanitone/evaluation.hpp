#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sanitone/features.hpp"
#include "sanitone/nn.hpp"
#include "sanitone/pipeline.hpp"
#include "sanitone/vocoder.hpp"
#include "sanitone/waveform.hpp"

namespace sanitone {

// ---- speech recognition utility ----

// (substitutions + deletions + insertions) / reference length under
// minimum-edit alignment with unit costs. May exceed 1.
// Throws EmptyReference.
double word_error_rate(std::span<const std::string> reference,
                       std::span<const std::string> hypothesis);

// Case-folded whitespace tokenization used for transcript files.
std::vector<std::string> tokenize_transcript(const std::string& text);

// ---- speaker verification ----

struct ScoreSet {
  std::vector<double> genuine;   // higher = more likely same identity
  std::vector<double> impostor;
};

// Threshold sweep over all distinct scores; the equal error rate is read off
// the ROC segment where FAR and FRR cross, linearly interpolated.
// Throws EmptyScores.
double equal_error_rate(const ScoreSet& s);

// Utterance-mean mel-cepstrum over voiced frames plus log-F0 statistics.
// Throws TooFewVoicedFrames when fewer than 10 voiced frames exist.
std::vector<double> speaker_embedding(const AnalysisResult& a);

// Cosine similarity in [-1, 1]; identical embeddings score exactly 1.
double speaker_score(std::span<const double> e1, std::span<const double> e2);

// ---- emotion recognition ----

// Utterance-level statistics fed to the classifier: per-dimension mean and
// std of the mel-cepstra, log-F0 stats, and the voiced fraction.
std::vector<double> utterance_stat_vector(const AnalysisResult& a,
                                          const McepSequence& m);

struct ClassifierConfig {
  int epochs = 300;
  double lr = 0.05;
  std::uint64_t seed = 1;
};

struct EmotionClassifier {
  nn::ModelParams net;  // softmax regression over stat vectors
  FeatureStats input_norm;
};

// Throws DegenerateTrainingSet unless at least two classes are present with
// at least two examples each.
EmotionClassifier train_emotion_classifier(
    std::span<const std::vector<double>> features,
    std::span<const EmotionLabel> labels, const ClassifierConfig& cfg);

// Returns the argmax label and the full class-probability vector
// (sums to 1 within 1e-9).
std::pair<EmotionLabel, std::vector<double>> classify_emotion(
    const EmotionClassifier& clf, std::span<const double> features);

// ---- waveform statistics ----

struct SpectroStats {
  std::vector<double> peak_amplitude;  // per frame
  std::vector<double> intensity_db;    // 10*log10(mean square / 1e-8)
  std::vector<double> f0_hz;           // 0 = unvoiced
};

// Throws EmptySignal.
SpectroStats spectrogram_stats(const Waveform& w, const VocoderConfig& cfg);

// ---- corpus evaluation ----

struct EvalItem {
  int speaker_id = 0;
  EmotionLabel emotion = EmotionLabel::kNeutral;
  std::string name;
  AnalysisResult raw_analysis;
  McepSequence raw_mcep;
  AnalysisResult sanitized_analysis;
  McepSequence sanitized_mcep;
  std::vector<std::string> reference;
  std::vector<std::string> hypothesis;
};

struct EvalReport {
  double wer = 0.0;
  double eer = 0.0;
  double emotion_accuracy = 0.0;
  // rows = true label, columns = predicted, kEmotionCount square
  std::vector<std::vector<std::size_t>> confusion;
  std::string platform;
};

EvalReport evaluate_corpus(std::span<const EvalItem> items,
                           const EmotionClassifier& clf,
                           const std::string& platform_tag);

// Pairs each test-role corpus entry with its sanitized twin and transcript
// files (same stem, ".txt") and extracts both feature sets.
// Throws AlignmentError naming the first file that cannot be paired.
std::vector<EvalItem> build_eval_items(const Corpus& test_corpus,
                                       const std::filesystem::path& sanitized_dir,
                                       const std::filesystem::path& reference_dir,
                                       const std::filesystem::path& hypothesis_dir,
                                       const VocoderConfig& vc,
                                       const FeatureConfig& fc);

// metric,platform,value rows
void write_report_csv(const std::filesystem::path& path, const EvalReport& r);
// square confusion matrix with labeled header and row names
void write_confusion_csv(const std::filesystem::path& path, const EvalReport& r);

}  // namespace sanitone
