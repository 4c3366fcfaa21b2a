#pragma once

#include "sanitone/waveform.hpp"

namespace sanitone {

// Rational-rate conversion with a Kaiser windowed-sinc polyphase filter,
// 60 dB stopband. Identity when rates already match. Duration is preserved
// within one sample period of the target rate.
Waveform resample(const Waveform& w, int target_hz);

}  // namespace sanitone
