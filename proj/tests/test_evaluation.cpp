#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "sanitone/errors.hpp"
#include "sanitone/evaluation.hpp"
#include "sanitone/wav_io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic_voice.hpp"
#include "support/test_support.hpp"

using namespace sanitone;
using namespace test_support;

namespace {

std::vector<std::string> words(std::initializer_list<const char*> ws) {
  return {ws.begin(), ws.end()};
}

}  // namespace

TEST_CASE("word_error_rate closed forms") {
  CHECK(word_error_rate(words({"a", "b", "c"}), words({"a", "b", "c"})) == 0.0);
  CHECK(word_error_rate(words({"a", "b", "c"}), words({"a", "x", "c"})) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(word_error_rate(words({"a", "b", "c"}), {}) == 1.0);
  CHECK(word_error_rate(words({"a"}), words({"x", "y", "z"})) == 3.0);  // may exceed 1
  CHECK_THROWS_AS(word_error_rate({}, words({"a"})), EmptyReference);
}

TEST_CASE("word_error_rate matches the DP oracle on random pairs") {
  std::mt19937_64 eng(101);
  const char* vocab[] = {"go", "stop", "left", "right", "up", "down"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> ref, hyp;
    const std::size_t n = 1 + eng() % 12, m = eng() % 14;
    for (std::size_t i = 0; i < n; ++i) ref.push_back(vocab[eng() % 6]);
    for (std::size_t j = 0; j < m; ++j) hyp.push_back(vocab[eng() % 6]);
    CHECK(word_error_rate(ref, hyp) == wer_oracle(ref, hyp));
  }
}

TEST_CASE("tokenize_transcript folds case and splits on whitespace") {
  const auto tokens = tokenize_transcript("  The Dog\tBARKS \n twice ");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0] == "the");
  CHECK(tokens[1] == "dog");
  CHECK(tokens[2] == "barks");
  CHECK(tokens[3] == "twice");
}

TEST_CASE("equal_error_rate closed forms") {
  SUBCASE("perfect separation") {
    ScoreSet s;
    s.genuine.assign(10, 1.0);
    s.impostor.assign(10, 0.0);
    CHECK(equal_error_rate(s) == 0.0);
  }
  SUBCASE("three on three bracket") {
    ScoreSet s;
    s.genuine = {0.9, 0.8, 0.3};
    s.impostor = {0.7, 0.2, 0.1};
    CHECK(equal_error_rate(s) == doctest::Approx(eer_oracle(s)).epsilon(1e-12));
    CHECK(equal_error_rate(s) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }
  SUBCASE("same distribution is chance level") {
    ScoreSet s;
    std::mt19937_64 eng(7);
    auto u = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 1000; ++i) {
      s.genuine.push_back(u());
      s.impostor.push_back(u());
    }
    CHECK(std::fabs(equal_error_rate(s) - 0.5) <= 0.05);
  }
  SUBCASE("empty scores are rejected") {
    ScoreSet s;
    s.genuine = {1.0};
    CHECK_THROWS_AS(equal_error_rate(s), EmptyScores);
  }
}

TEST_CASE("equal_error_rate matches the exhaustive sweep oracle") {
  std::mt19937_64 eng(55);
  auto u = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
  for (int trial = 0; trial < 200; ++trial) {
    ScoreSet s;
    const std::size_t ng = 2 + eng() % 30, ni = 2 + eng() % 30;
    const double sep = u();  // varying class separation
    for (std::size_t i = 0; i < ng; ++i) s.genuine.push_back(u() + sep);
    for (std::size_t i = 0; i < ni; ++i) s.impostor.push_back(u());
    CHECK(std::fabs(equal_error_rate(s) - eer_oracle(s)) <= 1e-9);
  }
}

TEST_CASE("equal_error_rate is invariant under strictly monotone transforms") {
  std::mt19937_64 eng(77);
  auto u = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
  ScoreSet s;
  for (int i = 0; i < 40; ++i) {
    s.genuine.push_back(u() + 0.2);
    s.impostor.push_back(u());
  }
  const double base = equal_error_rate(s);

  ScoreSet expd = s;
  for (double& v : expd.genuine) v = std::exp(3.0 * v);
  for (double& v : expd.impostor) v = std::exp(3.0 * v);
  CHECK(equal_error_rate(expd) == doctest::Approx(base).epsilon(1e-12));

  ScoreSet affine = s;
  for (double& v : affine.genuine) v = 10.0 * v - 4.0;
  for (double& v : affine.impostor) v = 10.0 * v - 4.0;
  CHECK(equal_error_rate(affine) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("emotion classifier separates clean clusters") {
  std::mt19937_64 eng(11);
  auto gauss = [&](double mean, double std) {
    double u1 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    while (u1 <= 0.0) u1 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    return mean + std * std::sqrt(-2.0 * std::log(u1)) *
                      std::cos(2.0 * 3.14159265358979 * u2);
  };

  std::vector<std::vector<double>> train, test;
  std::vector<EmotionLabel> train_labels, test_labels;
  for (int cls = 0; cls < 2; ++cls) {
    const double center = cls == 0 ? -2.0 : 2.0;
    for (int i = 0; i < 30; ++i) {
      std::vector<double> v(5);
      for (auto& x : v) x = gauss(center, 0.4);
      if (i < 20) {
        train.push_back(v);
        train_labels.push_back(cls == 0 ? EmotionLabel::kHappy
                                        : EmotionLabel::kNeutral);
      } else {
        test.push_back(v);
        test_labels.push_back(cls == 0 ? EmotionLabel::kHappy
                                       : EmotionLabel::kNeutral);
      }
    }
  }
  const EmotionClassifier clf =
      train_emotion_classifier(train, train_labels, ClassifierConfig{});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto [label, probs] = classify_emotion(clf, test[i]);
    if (label == test_labels[i]) ++correct;
    double sum = 0.0;
    for (double p : probs) sum += p;
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
  }
  CHECK(static_cast<double>(correct) / test.size() >= 0.95);
}

TEST_CASE("one example duplicated per class trains to memorization") {
  std::vector<std::vector<double>> feats = {
      {1.0, 0.0, 2.0}, {1.0, 0.0, 2.0}, {-1.0, 3.0, 0.5}, {-1.0, 3.0, 0.5}};
  std::vector<EmotionLabel> labels = {EmotionLabel::kAngry, EmotionLabel::kAngry,
                                      EmotionLabel::kCalm, EmotionLabel::kCalm};
  const EmotionClassifier clf =
      train_emotion_classifier(feats, labels, ClassifierConfig{});
  for (std::size_t i = 0; i < feats.size(); ++i)
    CHECK(classify_emotion(clf, feats[i]).first == labels[i]);
}

TEST_CASE("uniform-random labels give chance-level held-out accuracy") {
  std::mt19937_64 eng(13);
  auto u = [&] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };
  std::vector<std::vector<double>> train, test;
  std::vector<EmotionLabel> train_labels, test_labels;
  for (int i = 0; i < 300; ++i) {
    std::vector<double> v(6);
    for (auto& x : v) x = u();
    const auto label = static_cast<EmotionLabel>(eng() % 4);
    if (i < 200) {
      train.push_back(v);
      train_labels.push_back(label);
    } else {
      test.push_back(v);
      test_labels.push_back(label);
    }
  }
  const EmotionClassifier clf =
      train_emotion_classifier(train, train_labels, ClassifierConfig{});
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (classify_emotion(clf, test[i]).first == test_labels[i]) ++correct;
  CHECK(std::fabs(static_cast<double>(correct) / test.size() - 0.25) <= 0.1);
}

TEST_CASE("degenerate training sets are rejected") {
  std::vector<std::vector<double>> feats = {{1.0}, {2.0}, {3.0}};
  std::vector<EmotionLabel> one_class = {EmotionLabel::kSad, EmotionLabel::kSad,
                                         EmotionLabel::kSad};
  CHECK_THROWS_AS(train_emotion_classifier(feats, one_class, ClassifierConfig{}),
                  DegenerateTrainingSet);
  std::vector<EmotionLabel> thin = {EmotionLabel::kSad, EmotionLabel::kSad,
                                    EmotionLabel::kHappy};
  CHECK_THROWS_AS(train_emotion_classifier(feats, thin, ClassifierConfig{}),
                  DegenerateTrainingSet);
}

TEST_CASE("speaker embedding and cosine scoring") {
  VocoderConfig cfg;
  const Waveform a = make_vowel(140.0, {{700.0, 110.0}, {1700.0, 170.0}}, 0.5, 16000);
  const AnalysisResult ra = analyze(a, cfg);

  SUBCASE("identical utterances score exactly 1") {
    const auto e = speaker_embedding(ra);
    CHECK(speaker_score(e, e) == 1.0);
  }

  SUBCASE("silence has too few voiced frames") {
    Waveform s;
    s.sample_rate_hz = 16000;
    s.samples.assign(8000, 0.0);
    CHECK_THROWS_AS(speaker_embedding(analyze(s, cfg)), TooFewVoicedFrames);
  }

  SUBCASE("formant-shifted speakers separate with EER < 0.2") {
    auto make_speaker = [&](double scale, int count) {
      std::vector<std::vector<double>> embs;
      for (int i = 0; i < count; ++i) {
        const double f0 = 120.0 + 8.0 * i;
        const Waveform v = make_vowel(
            f0,
            {{700.0 * scale, 110.0}, {1700.0 * scale, 170.0}, {2900.0 * scale, 260.0}},
            0.45, 16000);
        embs.push_back(speaker_embedding(analyze(v, cfg)));
      }
      return embs;
    };
    const auto spk_a = make_speaker(1.0, 10);
    const auto spk_b = make_speaker(1.2, 10);

    ScoreSet s;
    for (std::size_t i = 0; i < spk_a.size(); ++i)
      for (std::size_t j = i + 1; j < spk_a.size(); ++j) {
        s.genuine.push_back(speaker_score(spk_a[i], spk_a[j]));
        s.genuine.push_back(speaker_score(spk_b[i], spk_b[j]));
      }
    for (const auto& ea : spk_a)
      for (const auto& eb : spk_b) s.impostor.push_back(speaker_score(ea, eb));

    double mean_g = 0.0, mean_i = 0.0;
    for (double v : s.genuine) mean_g += v;
    for (double v : s.impostor) mean_i += v;
    CHECK(mean_g / s.genuine.size() > mean_i / s.impostor.size());
    CHECK(equal_error_rate(s) < 0.2);
  }
}

TEST_CASE("spectrogram statistics") {
  VocoderConfig cfg;
  SUBCASE("amplitude and intensity of a half-scale sine") {
    const Waveform tone = make_tone(220.0, 0.5, 16000, 0.5);
    const SpectroStats s = spectrogram_stats(tone, cfg);
    for (std::size_t f = 5; f + 5 < s.peak_amplitude.size(); ++f)
      CHECK(std::fabs(s.peak_amplitude[f] - 0.5) <= 0.01);

    const Waveform loud = make_tone(220.0, 0.5, 16000, 1.0);
    const SpectroStats s2 = spectrogram_stats(loud, cfg);
    const std::size_t mid = s.intensity_db.size() / 2;
    CHECK(std::fabs(s2.intensity_db[mid] - s.intensity_db[mid] - 6.0206) <= 0.1);
  }
  SUBCASE("silence sits at the floor, unvoiced everywhere") {
    Waveform s;
    s.sample_rate_hz = 16000;
    s.samples.assign(4800, 0.0);
    const SpectroStats st = spectrogram_stats(s, cfg);
    for (double v : st.intensity_db) CHECK(v == doctest::Approx(-40.0));
    for (double v : st.f0_hz) CHECK(v == 0.0);
  }
  SUBCASE("empty input is rejected") {
    CHECK_THROWS_AS(spectrogram_stats(Waveform{}, cfg), EmptySignal);
  }
}

TEST_CASE("evaluate_corpus degenerate comparison: sanitized equals raw") {
  VocoderConfig vc;
  FeatureConfig fc;

  std::vector<EvalItem> items;
  std::vector<std::vector<double>> train_feats;
  std::vector<EmotionLabel> train_labels;
  for (int i = 0; i < 4; ++i) {
    const double scale = i % 2 == 0 ? 1.0 : 1.25;  // two speakers
    const Waveform v = make_vowel(110.0 + 25.0 * i,
                                  {{650.0 * scale, 100.0}, {1800.0 * scale, 180.0}},
                                  0.5, 16000);
    EvalItem item;
    item.speaker_id = i % 2;
    item.emotion = i % 2 == 0 ? EmotionLabel::kHappy : EmotionLabel::kNeutral;
    item.name = "u" + std::to_string(i) + ".wav";
    item.raw_analysis = analyze(v, vc);
    item.raw_mcep = sp_to_mcep(item.raw_analysis.spectral_envelope, fc);
    item.sanitized_analysis = item.raw_analysis;
    item.sanitized_mcep = item.raw_mcep;
    item.reference = {"alpha", "bravo", "charlie"};
    item.hypothesis = item.reference;  // perfect transcripts
    items.push_back(item);

    train_feats.push_back(utterance_stat_vector(item.raw_analysis, item.raw_mcep));
    train_labels.push_back(item.emotion);
  }
  const EmotionClassifier clf =
      train_emotion_classifier(train_feats, train_labels, ClassifierConfig{});

  // raw accuracy of the classifier on these items
  std::size_t raw_correct = 0;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (classify_emotion(clf, train_feats[i]).first == items[i].emotion)
      ++raw_correct;

  const EvalReport r = evaluate_corpus(items, clf, "host");
  CHECK(r.wer == 0.0);
  CHECK(r.eer == 0.0);  // genuine pairs score exactly 1
  CHECK(r.emotion_accuracy ==
        doctest::Approx(static_cast<double>(raw_correct) / items.size()));
  CHECK(r.platform == "host");

  std::size_t confusion_total = 0;
  for (const auto& row : r.confusion)
    for (std::size_t v : row) confusion_total += v;
  CHECK(confusion_total == items.size());
}

TEST_CASE("build_eval_items reports missing files by name") {
  TempDir dir("eval_align");
  const auto wav_dir = dir.file("raw");
  const auto san_dir = dir.file("sanitized");
  const auto ref_dir = dir.file("ref");
  const auto hyp_dir = dir.file("hyp");
  for (const auto& d : {wav_dir, san_dir, ref_dir, hyp_dir})
    std::filesystem::create_directories(d);

  Corpus corpus;
  for (int i = 0; i < 2; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "03-01-03-01-01-01-%02d.wav", i + 1);
    const Waveform v = make_vowel(130.0 + 20.0 * i, {{800.0, 130.0}}, 0.4, 16000);
    write_wav(wav_dir / name, v);
    write_wav(san_dir / name, v);
    CorpusEntry e = parse_ravdess_filename(name);
    e.path = wav_dir / name;
    corpus.entries.push_back(e);

    const std::string stem = std::filesystem::path(name).stem().string();
    std::ofstream(ref_dir / (stem + ".txt")) << "kids are talking by the door\n";
    if (i == 0)
      std::ofstream(hyp_dir / (stem + ".txt")) << "kids are walking by the door\n";
  }

  VocoderConfig vc;
  FeatureConfig fc;
  try {
    build_eval_items(corpus, san_dir, ref_dir, hyp_dir, vc, fc);
    FAIL("expected AlignmentError");
  } catch (const AlignmentError& e) {
    CHECK(std::string(e.what()).find("03-01-03-01-01-01-02") != std::string::npos);
  }

  // complete the missing transcript and the pairing succeeds
  std::ofstream(hyp_dir / "03-01-03-01-01-01-02.txt") << "kids are talking\n";
  const auto items = build_eval_items(corpus, san_dir, ref_dir, hyp_dir, vc, fc);
  REQUIRE(items.size() == 2);
  CHECK(items[0].hypothesis.size() == 6);
  CHECK(items[1].hypothesis.size() == 3);
}

TEST_CASE("report CSVs carry the pinned schema") {
  TempDir dir("eval_csv");
  EvalReport r;
  r.platform = "cortex-a72";
  r.wer = 0.25;
  r.eer = 0.125;
  r.emotion_accuracy = 0.5;
  r.confusion.assign(kEmotionCount, std::vector<std::size_t>(kEmotionCount, 0));
  r.confusion[0][0] = 3;

  const auto report_path = dir.file("report.csv");
  write_report_csv(report_path, r);
  std::ifstream is(report_path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "metric,platform,value");
  std::getline(is, line);
  CHECK(line == "wer,cortex-a72,0.25");
  std::getline(is, line);
  CHECK(line == "eer,cortex-a72,0.125");
  std::getline(is, line);
  CHECK(line == "emotion_accuracy,cortex-a72,0.5");

  const auto confusion_path = dir.file("confusion.csv");
  write_confusion_csv(confusion_path, r);
  std::ifstream cs(confusion_path);
  std::getline(cs, line);
  CHECK(line ==
        "true\\predicted,neutral,calm,happy,sad,angry,fearful,disgust,surprised");
  std::getline(cs, line);
  CHECK(line == "neutral,3,0,0,0,0,0,0,0");
}
