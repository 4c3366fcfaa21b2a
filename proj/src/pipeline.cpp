#include "sanitone/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "sanitone/detail/crc32.hpp"
#include "sanitone/detail/parallel.hpp"
#include "sanitone/detail/rng.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/resample.hpp"
#include "sanitone/wav_io.hpp"

namespace sanitone {

namespace {

constexpr const char* kEmotionNames[kEmotionCount] = {
    "neutral", "calm",    "happy",   "sad",
    "angry",   "fearful", "disgust", "surprised"};

constexpr int kPipelineRateHz = 16000;

}  // namespace

const char* emotion_name(EmotionLabel e) {
  return kEmotionNames[static_cast<int>(e)];
}

EmotionLabel emotion_from_name(const std::string& name) {
  for (int i = 0; i < kEmotionCount; ++i)
    if (name == kEmotionNames[i]) return static_cast<EmotionLabel>(i);
  throw MalformedName("unknown emotion label: " + name);
}

std::size_t Corpus::count_role(SplitRole role) const {
  std::size_t n = 0;
  for (const auto& e : entries)
    if (e.role == role) ++n;
  return n;
}

CorpusEntry parse_ravdess_filename(const std::string& name) {
  const std::string base = std::filesystem::path(name).filename().string();
  // MM-VV-EE-II-SS-RR-AA.wav
  if (base.size() != 24 || base.substr(20) != ".wav")
    throw MalformedName("not a 7-field hyphenated name: " + base);
  int fields[7];
  for (int f = 0; f < 7; ++f) {
    const std::size_t pos = static_cast<std::size_t>(f) * 3;
    if (f < 6 && base[pos + 2] != '-')
      throw MalformedName("missing separator in: " + base);
    if (!std::isdigit(static_cast<unsigned char>(base[pos])) ||
        !std::isdigit(static_cast<unsigned char>(base[pos + 1])))
      throw MalformedName("non-digit field in: " + base);
    fields[f] = (base[pos] - '0') * 10 + (base[pos + 1] - '0');
  }

  if (fields[2] < 1 || fields[2] > kEmotionCount)
    throw MalformedName("emotion code out of range in: " + base);
  if (fields[6] < 1 || fields[6] > 24)
    throw MalformedName("actor id out of range in: " + base);

  CorpusEntry e;
  e.path = name;
  e.emotion = static_cast<EmotionLabel>(fields[2] - 1);
  e.intensity = fields[3];
  e.statement_id = fields[4];
  e.repetition = fields[5];
  e.actor_id = fields[6];
  return e;
}

Corpus scan_ravdess_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& it : std::filesystem::directory_iterator(dir))
    if (it.is_regular_file() && it.path().extension() == ".wav")
      files.push_back(it.path());
  std::sort(files.begin(), files.end());

  Corpus c;
  for (const auto& p : files) {
    try {
      CorpusEntry e = parse_ravdess_filename(p.filename().string());
      e.path = p;
      c.entries.push_back(std::move(e));
    } catch (const MalformedName&) {
      // non-corpus wav files are simply skipped
    }
  }
  return c;
}

Corpus split_corpus(const Corpus& c, std::size_t train_count,
                    std::size_t test_count, std::uint64_t seed,
                    bool disjoint_text) {
  if (train_count + test_count > c.size())
    throw InfeasibleSplit("requested " + std::to_string(train_count) + "+" +
                          std::to_string(test_count) + " from " +
                          std::to_string(c.size()) + " entries");

  Corpus out = c;
  for (auto& e : out.entries) e.role = SplitRole::kUnassigned;
  detail::Rng rng(seed);

  auto shuffled_indices = [&](const std::vector<std::size_t>& src) {
    std::vector<std::size_t> idx = src;
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.index(i)]);
    return idx;
  };

  if (!disjoint_text) {
    std::vector<std::size_t> all(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) all[i] = i;
    const auto idx = shuffled_indices(all);
    for (std::size_t i = 0; i < train_count; ++i)
      out.entries[idx[i]].role = SplitRole::kTrain;
    for (std::size_t i = 0; i < test_count; ++i)
      out.entries[idx[train_count + i]].role = SplitRole::kTest;
    return out;
  }

  // group by statement, then search statement-level assignments for one that
  // can satisfy both quotas
  std::map<int, std::vector<std::size_t>> by_statement;
  for (std::size_t i = 0; i < c.size(); ++i)
    by_statement[c.entries[i].statement_id].push_back(i);
  const std::size_t n_statements = by_statement.size();
  if (n_statements > 20)
    throw InfeasibleSplit("too many distinct statements for exact splitting");

  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(n_statements);
  for (auto& [id, idx] : by_statement) groups.push_back(idx);

  std::size_t chosen_mask = 0;
  bool found = false;
  for (std::size_t mask = 0; mask < (1u << n_statements); ++mask) {
    std::size_t train_pool = 0, test_pool = 0;
    for (std::size_t s = 0; s < n_statements; ++s)
      (mask & (1u << s) ? train_pool : test_pool) += groups[s].size();
    if (train_pool >= train_count && test_pool >= test_count) {
      chosen_mask = mask;
      found = true;
      break;
    }
  }
  if (!found)
    throw InfeasibleSplit("no statement partition satisfies the requested counts");

  std::vector<std::size_t> train_pool, test_pool;
  for (std::size_t s = 0; s < n_statements; ++s) {
    auto& dst = (chosen_mask & (1u << s)) ? train_pool : test_pool;
    dst.insert(dst.end(), groups[s].begin(), groups[s].end());
  }
  const auto train_idx = shuffled_indices(train_pool);
  const auto test_idx = shuffled_indices(test_pool);
  for (std::size_t i = 0; i < train_count; ++i)
    out.entries[train_idx[i]].role = SplitRole::kTrain;
  for (std::size_t i = 0; i < test_count; ++i)
    out.entries[test_idx[i]].role = SplitRole::kTest;
  return out;
}

Waveform sanitize(const Waveform& w, const FrozenFilter& f) {
  if (w.empty()) throw EmptySignal("cannot sanitize an empty waveform");
  if (f.features.order + 1 != f.arch.feature_dim)
    throw FilterConfigMismatch("filter feature order does not match its network");
  if (f.feature_stats.dims() != static_cast<std::size_t>(f.arch.feature_dim))
    throw FilterConfigMismatch("filter stats do not match its network width");

  const Waveform at_rate =
      w.sample_rate_hz == kPipelineRateHz ? w : resample(w, kPipelineRateHz);

  const AnalysisResult a = analyze(at_rate, f.vocoder);
  const McepSequence coded = sp_to_mcep(a.spectral_envelope, f.features);
  const McepSequence converted = f.convert(coded);

  AnalysisResult out = a;
  out.spectral_envelope = mcep_to_sp(converted, f.vocoder.fft_size);
  out.f0 = convert_log_f0(a.f0, f.f0_src, f.f0_tgt);
  // aperiodicity and voicing pass through untouched
  return synthesize(out);
}

namespace {

constexpr char kCacheMagic[4] = {'S', 'F', 'T', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
bool read_pod(std::istream& is, T& v) {
  return static_cast<bool>(is.read(reinterpret_cast<char*>(&v), sizeof(v)));
}

std::filesystem::path cache_file_for(const std::filesystem::path& cache_dir,
                                     const std::filesystem::path& source) {
  const std::string key = source.string();
  char suffix[16];
  std::snprintf(suffix, sizeof(suffix), "%08x",
                detail::crc32(key.data(), key.size()));
  return cache_dir / (source.stem().string() + "-" + suffix + ".ftc");
}

void write_cache_entry(const std::filesystem::path& path,
                       const UtteranceFeatures& u, const VocoderConfig& vc,
                       const FeatureConfig& fc) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write cache file " + path.string());
  os.write(kCacheMagic, 4);
  write_pod(os, kCacheVersion);
  write_pod(os, vc.frame_period_ms);
  write_pod(os, static_cast<std::uint32_t>(vc.fft_size));
  write_pod(os, vc.f0_floor_hz);
  write_pod(os, vc.f0_ceil_hz);
  write_pod(os, static_cast<std::uint32_t>(fc.order));
  write_pod(os, fc.alpha);
  save_analysis(os, u.analysis);
  write_pod(os, static_cast<std::uint64_t>(u.mcep.frames()));
  write_pod(os, static_cast<std::uint64_t>(u.mcep.width()));
  os.write(reinterpret_cast<const char*>(u.mcep.coeffs.data().data()),
           static_cast<std::streamsize>(u.mcep.coeffs.size() * sizeof(double)));
  if (!os) throw IoError("short write to cache file " + path.string());
}

std::optional<UtteranceFeatures> read_cache_entry(
    const std::filesystem::path& path, const VocoderConfig& vc,
    const FeatureConfig& fc) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0)
    return std::nullopt;
  std::uint32_t version;
  if (!read_pod(is, version) || version != kCacheVersion) return std::nullopt;

  double period, floor, ceil, alpha;
  std::uint32_t fft, order;
  if (!read_pod(is, period) || !read_pod(is, fft) || !read_pod(is, floor) ||
      !read_pod(is, ceil) || !read_pod(is, order) || !read_pod(is, alpha))
    return std::nullopt;
  if (period != vc.frame_period_ms || fft != static_cast<std::uint32_t>(vc.fft_size) ||
      floor != vc.f0_floor_hz || ceil != vc.f0_ceil_hz ||
      order != static_cast<std::uint32_t>(fc.order) || alpha != fc.alpha)
    return std::nullopt;

  try {
    UtteranceFeatures u;
    u.analysis = load_analysis(is, path.string());
    std::uint64_t frames, width;
    if (!read_pod(is, frames) || !read_pod(is, width)) return std::nullopt;
    u.mcep.order = fc.order;
    u.mcep.alpha = fc.alpha;
    u.mcep.coeffs = Matrix(frames, width);
    if (!is.read(reinterpret_cast<char*>(u.mcep.coeffs.data().data()),
                 static_cast<std::streamsize>(frames * width * sizeof(double))))
      return std::nullopt;
    return u;
  } catch (const Error&) {
    return std::nullopt;  // stale or damaged cache entries are recomputed
  }
}

}  // namespace

FeatureExtraction extract_features(const Corpus& c, const VocoderConfig& vc,
                                   const FeatureConfig& fc,
                                   const std::filesystem::path& cache_dir) {
  FeatureExtraction result;
  result.utterances.resize(c.size());
  std::vector<std::string> errors(c.size());

  const bool use_cache = !cache_dir.empty();
  if (use_cache) std::filesystem::create_directories(cache_dir);

  detail::parallel_for(c.size(), [&](std::size_t i) {
    const auto& entry = c.entries[i];
    try {
      if (use_cache) {
        auto cached =
            read_cache_entry(cache_file_for(cache_dir, entry.path), vc, fc);
        if (cached) {
          result.utterances[i] = std::move(cached);
          return;
        }
      }
      Waveform w = read_wav(entry.path);
      if (w.sample_rate_hz != kPipelineRateHz) w = resample(w, kPipelineRateHz);
      UtteranceFeatures u;
      u.analysis = analyze(w, vc);
      u.mcep = sp_to_mcep(u.analysis.spectral_envelope, fc);
      if (use_cache)
        write_cache_entry(cache_file_for(cache_dir, entry.path), u, vc, fc);
      result.utterances[i] = std::move(u);
    } catch (const Error& e) {
      errors[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < c.size(); ++i)
    if (!errors[i].empty()) result.errors.emplace_back(i, errors[i]);
  return result;
}

namespace {

const char* role_name(SplitRole r) {
  switch (r) {
    case SplitRole::kTrain: return "train";
    case SplitRole::kTest: return "test";
    default: return "";
  }
}

const char* domain_name(DomainTag d) {
  switch (d) {
    case DomainTag::kEmotional: return "x";
    case DomainTag::kNeutral: return "y";
    default: return "";
  }
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const Corpus& c) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "path,actor,emotion,statement,repetition,intensity,role,domain\n";
  for (const auto& e : c.entries) {
    os << e.path.string() << ',' << e.actor_id << ',' << emotion_name(e.emotion)
       << ',' << e.statement_id << ',' << e.repetition << ',' << e.intensity
       << ',' << role_name(e.role) << ',' << domain_name(e.domain) << '\n';
  }
  if (!os) throw IoError("short write to " + path.string());
}

Corpus read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) ||
      line != "path,actor,emotion,statement,repetition,intensity,role,domain")
    throw ParseError(path.string() + ":1: bad manifest header");

  Corpus c;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    fields.push_back(cur);
    if (fields.size() != 8)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 8 fields");
    CorpusEntry e;
    e.path = fields[0];
    try {
      e.actor_id = std::stoi(fields[1]);
      e.statement_id = std::stoi(fields[3]);
      e.repetition = std::stoi(fields[4]);
      e.intensity = std::stoi(fields[5]);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad numeric field");
    }
    e.emotion = emotion_from_name(fields[2]);
    if (fields[6] == "train") e.role = SplitRole::kTrain;
    else if (fields[6] == "test") e.role = SplitRole::kTest;
    else if (!fields[6].empty())
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad role " + fields[6]);
    if (fields[7] == "x") e.domain = DomainTag::kEmotional;
    else if (fields[7] == "y") e.domain = DomainTag::kNeutral;
    else if (!fields[7].empty())
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad domain " + fields[7]);
    c.entries.push_back(std::move(e));
  }
  return c;
}

}  // namespace sanitone
