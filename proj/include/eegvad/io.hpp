#pragma once

#include <filesystem>
#include <span>

#include <nlohmann/json.hpp>

#include "eegvad/frame_sequence.hpp"
#include "eegvad/time_series.hpp"

namespace eegvad::io {

namespace fs = std::filesystem;

// Raw little-endian float32 matrices with a JSON sidecar header. A signal
// stored at "x.f32" has its header at "x.json":
//   {"channels", "samples", "sample_rate_hz", "channel_names"}
// Data is row-major, one channel after another.
void write_signal(const fs::path& data_path, const TimeSeries& x);
TimeSeries read_signal(const fs::path& data_path);

// Frame files: {"frame_rate_hz", "dim", "count", "layout"[, "labels"]} +
// float32 frames, row-major.
void write_frames(const fs::path& data_path, const FrameSequence& frames);
FrameSequence read_frames(const fs::path& data_path);

// create_directories reporting failure as Error(io_failure).
void make_dirs(const fs::path& dir);

fs::path sidecar_path(const fs::path& data_path);

// Little-endian float32 block helpers shared by the checkpoint writers.
void write_f32(std::ostream& out, std::span<const double> values);
void read_f32(std::istream& in, std::span<double> values);
std::vector<double> read_f32_file(const fs::path& path, std::size_t count);

nlohmann::json read_json(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);
void write_text(const fs::path& path, const std::string& text);

// 16-bit PCM mono WAV.
TimeSeries read_wav(const fs::path& path);
void write_wav(const fs::path& path, const TimeSeries& x);

// Dispatches on extension: ".wav" or raw float32 + sidecar.
TimeSeries read_audio(const fs::path& path);

}  // namespace eegvad::io
