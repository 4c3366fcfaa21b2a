#pragma once

#include <filesystem>

#include "sanitone/waveform.hpp"

namespace sanitone {

// Reads a RIFF/WAVE file. Only PCM 16-bit mono is accepted; samples are
// scaled to [-1, 1] by dividing by 32768.
// Throws FormatError, UnsupportedChannels, IoError.
Waveform read_wav(const std::filesystem::path& path);

// Writes PCM 16-bit mono. Amplitudes outside [-1, 1] are hard-clipped before
// quantization. Throws EmptySignal, IoError.
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace sanitone
