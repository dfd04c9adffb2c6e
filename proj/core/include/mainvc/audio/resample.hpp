#pragma once

#include "mainvc/audio/wav.hpp"

namespace mainvc::audio {

/// Number of samples produced when resampling `length` samples from
/// `source_rate` to `target_rate`: round(length * target / source).
std::size_t resampled_length(std::size_t length, int source_rate, int target_rate);

/// Band-limited rational resampling with a Kaiser-windowed sinc, evaluated as
/// a polyphase filter bank. Identity when the rates already agree.
Waveform resample(const Waveform& wave, int target_rate);

}  // namespace mainvc::audio
