#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sanitone/cyclegan.hpp"
#include "sanitone/features.hpp"
#include "sanitone/vocoder.hpp"
#include "sanitone/waveform.hpp"

namespace sanitone {

enum class EmotionLabel : int {
  kNeutral = 0,
  kCalm = 1,
  kHappy = 2,
  kSad = 3,
  kAngry = 4,
  kFearful = 5,
  kDisgust = 6,
  kSurprised = 7,
};
inline constexpr int kEmotionCount = 8;

const char* emotion_name(EmotionLabel e);
EmotionLabel emotion_from_name(const std::string& name);

enum class SplitRole { kUnassigned, kTrain, kTest };
enum class DomainTag { kNone, kEmotional, kNeutral };  // X and Y domains

struct CorpusEntry {
  std::filesystem::path path;
  int actor_id = 0;  // 1..24
  EmotionLabel emotion = EmotionLabel::kNeutral;
  int statement_id = 0;
  int repetition = 0;
  int intensity = 0;
  SplitRole role = SplitRole::kUnassigned;
  DomainTag domain = DomainTag::kNone;
};

struct Corpus {
  std::vector<CorpusEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::size_t count_role(SplitRole role) const;
};

// Seven hyphen-separated two-digit fields plus ".wav":
// modality-channel-emotion-intensity-statement-repetition-actor.
// Throws MalformedName.
CorpusEntry parse_ravdess_filename(const std::string& name);

// Directory scan for parseable .wav files, sorted by filename.
Corpus scan_ravdess_dir(const std::filesystem::path& dir);

// Deterministic role assignment. When disjoint_text is set, no statement_id
// appears in both splits. Throws InfeasibleSplit.
Corpus split_corpus(const Corpus& c, std::size_t train_count,
                    std::size_t test_count, std::uint64_t seed,
                    bool disjoint_text);

// End-to-end sanitization: resample to the filter's rate, analyze, code,
// convert features and pitch, and resynthesize. Aperiodicity and the voicing
// pattern pass through unchanged.
Waveform sanitize(const Waveform& w, const FrozenFilter& f);

struct UtteranceFeatures {
  AnalysisResult analysis;
  McepSequence mcep;
};

struct FeatureExtraction {
  // aligned with corpus entries; empty optionals mark failed utterances
  std::vector<std::optional<UtteranceFeatures>> utterances;
  std::vector<std::pair<std::size_t, std::string>> errors;
};

// Batch feature extraction; per-entry errors are collected, not fatal.
// When cache_dir is non-empty, results are reused from and written to disk.
FeatureExtraction extract_features(const Corpus& c, const VocoderConfig& vc,
                                   const FeatureConfig& fc,
                                   const std::filesystem::path& cache_dir = {});

// Manifest CSV: path,actor,emotion,statement,repetition,intensity,role,domain
void write_manifest(const std::filesystem::path& path, const Corpus& c);
Corpus read_manifest(const std::filesystem::path& path);

}  // namespace sanitone
