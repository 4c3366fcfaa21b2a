#include "sanitone/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "sanitone/errors.hpp"
#include "sanitone/pipeline.hpp"

namespace sanitone {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct KeySetter {
  Config* cfg;
  std::string file;
  std::size_t line = 0;

  [[noreturn]] void fail_parse(const std::string& msg) const {
    throw ParseError(file + ":" + std::to_string(line) + ": " + msg);
  }

  double number(const std::string& key, const std::string& value) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      fail_parse("expected a number for " + key + ", got '" + value + "'");
    }
  }

  long integer(const std::string& key, const std::string& value) const {
    try {
      std::size_t used = 0;
      const long v = std::stol(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      return v;
    } catch (const std::exception&) {
      fail_parse("expected an integer for " + key + ", got '" + value + "'");
    }
  }

  std::vector<int> int_list(const std::string& key, const std::string& value) const {
    std::vector<int> out;
    std::string cur;
    for (char c : value + ",") {
      if (c == ',') {
        if (!trim(cur).empty())
          out.push_back(static_cast<int>(integer(key, trim(cur))));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    return out;
  }

  bool flag(const std::string& key, const std::string& value) const {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    fail_parse("expected a boolean for " + key + ", got '" + value + "'");
  }

  void apply(const std::string& section, const std::string& key,
             const std::string& value) const {
    const std::string full = section.empty() ? key : section + "." + key;
    if (full == "vocoder.frame_period_ms") cfg->vocoder.frame_period_ms = number(full, value);
    else if (full == "vocoder.fft_size") cfg->vocoder.fft_size = static_cast<int>(integer(full, value));
    else if (full == "vocoder.f0_floor_hz") cfg->vocoder.f0_floor_hz = number(full, value);
    else if (full == "vocoder.f0_ceil_hz") cfg->vocoder.f0_ceil_hz = number(full, value);
    else if (full == "features.order") cfg->features.order = static_cast<int>(integer(full, value));
    else if (full == "features.alpha") cfg->features.alpha = number(full, value);
    else if (full == "features.energy_passthrough") cfg->features.energy_passthrough = flag(full, value);
    else if (full == "arch.gen_widths") cfg->arch.gen_widths = int_list(full, value);
    else if (full == "arch.gen_kernel") cfg->arch.gen_kernel = static_cast<int>(integer(full, value));
    else if (full == "arch.res_kernel") cfg->arch.res_kernel = static_cast<int>(integer(full, value));
    else if (full == "arch.residual_blocks") cfg->arch.residual_blocks = static_cast<int>(integer(full, value));
    else if (full == "arch.disc_widths") cfg->arch.disc_widths = int_list(full, value);
    else if (full == "arch.disc_kernel") cfg->arch.disc_kernel = static_cast<int>(integer(full, value));
    else if (full == "train.iterations") cfg->train.iterations = static_cast<int>(integer(full, value));
    else if (full == "train.lr_generator") cfg->train.lr_generator = number(full, value);
    else if (full == "train.lr_discriminator") cfg->train.lr_discriminator = number(full, value);
    else if (full == "train.lambda_cycle") cfg->train.lambda_cycle = number(full, value);
    else if (full == "train.lambda_identity") cfg->train.lambda_identity = number(full, value);
    else if (full == "train.identity_cutoff_iter") cfg->train.identity_cutoff_iter = static_cast<int>(integer(full, value));
    else if (full == "train.segment_frames") cfg->train.segment_frames = static_cast<int>(integer(full, value));
    else if (full == "train.batch_size") cfg->train.batch_size = static_cast<int>(integer(full, value));
    else if (full == "train.seed") cfg->train.seed = static_cast<std::uint64_t>(integer(full, value));
    else if (full == "train.pool_emotions") cfg->pool_emotions = flag(full, value);
    else if (full == "train.emotion") cfg->emotion = value;
    else if (full == "paths.corpus_dir") cfg->paths.corpus_dir = value;
    else if (full == "paths.cache_dir") cfg->paths.cache_dir = value;
    else if (full == "paths.filter_path") cfg->paths.filter_path = value;
    else if (full == "paths.report_dir") cfg->paths.report_dir = value;
    else throw ValidationError(full);
  }
};

}  // namespace

void Config::validate() const {
  if (vocoder.frame_period_ms <= 0.0) throw ValidationError("vocoder.frame_period_ms");
  if (vocoder.fft_size < 512 ||
      (vocoder.fft_size & (vocoder.fft_size - 1)) != 0)
    throw ValidationError("vocoder.fft_size");
  if (vocoder.f0_floor_hz <= 0.0 || vocoder.f0_floor_hz >= vocoder.f0_ceil_hz)
    throw ValidationError("vocoder.f0_floor_hz");
  if (features.order < 1) throw ValidationError("features.order");
  if (features.alpha <= -1.0 || features.alpha >= 1.0)
    throw ValidationError("features.alpha");
  if (arch.feature_dim != features.order + 1) {
    // the network width is derived, never set independently
  }
  try {
    arch.validate();
  } catch (const InvalidArch& e) {
    throw ValidationError(std::string("arch: ") + e.what());
  }
  if (train.iterations < 0) throw ValidationError("train.iterations");
  if (train.lr_generator <= 0.0) throw ValidationError("lr_generator");
  if (train.lr_discriminator <= 0.0) throw ValidationError("lr_discriminator");
  if (train.lambda_cycle < 0.0) throw ValidationError("train.lambda_cycle");
  if (train.lambda_identity < 0.0) throw ValidationError("train.lambda_identity");
  if (train.segment_frames <= 0 ||
      train.segment_frames % arch.time_divisor() != 0)
    throw ValidationError("train.segment_frames");
  if (train.batch_size != 1) throw ValidationError("train.batch_size");
  if (!pool_emotions) {
    bool known = false;
    for (int i = 0; i < kEmotionCount; ++i)
      if (emotion == emotion_name(static_cast<EmotionLabel>(i))) known = true;
    if (!known || emotion == "neutral") throw ValidationError("train.emotion");
  }
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());

  Config cfg;
  // the network width always tracks the feature order
  KeySetter setter{&cfg, path.string()};
  std::string section;
  std::string line;
  while (std::getline(is, line)) {
    ++setter.line;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        setter.fail_parse("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) setter.fail_parse("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) setter.fail_parse("empty key");
    setter.apply(section, key, value);
  }

  cfg.arch.feature_dim = cfg.features.order + 1;
  cfg.validate();
  return cfg;
}

void validate_paths(const Config& c) {
  if (!c.paths.corpus_dir.empty() && !std::filesystem::is_directory(c.paths.corpus_dir))
    throw ValidationError("paths.corpus_dir");
  auto parent_ok = [](const std::filesystem::path& p) {
    const auto parent = p.parent_path();
    return parent.empty() || std::filesystem::is_directory(parent);
  };
  if (!c.paths.filter_path.empty() && !parent_ok(c.paths.filter_path))
    throw ValidationError("paths.filter_path");
  if (!c.paths.cache_dir.empty() && !parent_ok(c.paths.cache_dir))
    throw ValidationError("paths.cache_dir");
  if (!c.paths.report_dir.empty() && !parent_ok(c.paths.report_dir))
    throw ValidationError("paths.report_dir");
}

}  // namespace sanitone
