#pragma once

#include <filesystem>
#include <string>

#include "sanitone/cyclegan.hpp"
#include "sanitone/features.hpp"
#include "sanitone/vocoder.hpp"

namespace sanitone {

// Tool configuration parsed from line-oriented `key = value` text with
// [section] headers. Absent keys keep their defaults.
struct Config {
  VocoderConfig vocoder;
  FeatureConfig features;
  ArchDescriptor arch;
  TrainConfig train;
  bool pool_emotions = false;   // pool every emotional label into domain X
  std::string emotion = "happy";  // otherwise: the single X emotion

  struct Paths {
    std::filesystem::path corpus_dir;
    std::filesystem::path cache_dir;
    std::filesystem::path filter_path;
    std::filesystem::path report_dir;
  } paths;

  void validate() const;  // throws ValidationError naming the key
};

// Throws ParseError (with line number) and ValidationError (naming the key).
Config load_config(const std::filesystem::path& path);

// Checks that every path referenced by the configuration resolves.
void validate_paths(const Config& c);

}  // namespace sanitone
