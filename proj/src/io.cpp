#include "eegvad/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "eegvad/error.hpp"

namespace eegvad::io {

using nlohmann::json;

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + dir.string() + ": " + ec.message());
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) make_dirs(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return in;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

fs::path sidecar_path(const fs::path& data_path) {
  fs::path p = data_path;
  p.replace_extension(".json");
  return p;
}

void write_f32(std::ostream& out, std::span<const double> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    buf[4 * i] = static_cast<char>(bits & 0xff);
    buf[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
    buf[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
    buf[4 * i + 3] = static_cast<char>((bits >> 24) & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(Errc::io_failure, "write failed");
}

void read_f32(std::istream& in, std::span<double> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw Error(Errc::format_error, "truncated float32 block");
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<double>(std::bit_cast<float>(get_u32(&buf[4 * i])));
}

std::vector<double> read_f32_file(const fs::path& path, std::size_t count) {
  auto in = open_in(path);
  std::vector<double> v(count);
  read_f32(in, v);
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(Errc::format_error, path.string() + " is longer than its header states");
  return v;
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

void write_signal(const fs::path& data_path, const TimeSeries& x) {
  json header = {{"channels", x.channels()},
                 {"samples", x.samples()},
                 {"sample_rate_hz", x.sample_rate_hz},
                 {"channel_names", x.channel_names}};
  write_json(sidecar_path(data_path), header);
  auto out = open_out(data_path);
  write_f32(out, {x.data.data(), static_cast<std::size_t>(x.data.size())});
}

TimeSeries read_signal(const fs::path& data_path) {
  const json header = read_json(sidecar_path(data_path));
  TimeSeries x;
  try {
    const auto channels = header.at("channels").get<Eigen::Index>();
    const auto samples = header.at("samples").get<Eigen::Index>();
    x.sample_rate_hz = header.at("sample_rate_hz").get<double>();
    x.channel_names = header.value("channel_names", std::vector<std::string>{});
    if (x.channel_names.empty())
      for (Eigen::Index c = 0; c < channels; ++c) x.channel_names.push_back("ch" + std::to_string(c));
    x.data.resize(channels, samples);
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, data_path.string() + " header: " + e.what());
  }
  auto values = read_f32_file(data_path, static_cast<std::size_t>(x.data.size()));
  std::copy(values.begin(), values.end(), x.data.data());
  x.validate();
  return x;
}

void write_frames(const fs::path& data_path, const FrameSequence& frames) {
  json header = {{"frame_rate_hz", frames.frame_rate_hz},
                 {"dim", frames.dim()},
                 {"count", frames.count()},
                 {"layout", frames.layout}};
  if (frames.labeled()) header["labels"] = frames.labels;
  write_json(sidecar_path(data_path), header);
  auto out = open_out(data_path);
  write_f32(out, {frames.values.data(), static_cast<std::size_t>(frames.values.size())});
}

FrameSequence read_frames(const fs::path& data_path) {
  const json header = read_json(sidecar_path(data_path));
  FrameSequence f;
  try {
    f.frame_rate_hz = header.at("frame_rate_hz").get<double>();
    f.layout = header.value("layout", std::string{});
    f.values.resize(header.at("count").get<Eigen::Index>(), header.at("dim").get<Eigen::Index>());
    if (header.contains("labels")) f.labels = header["labels"].get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw Error(Errc::format_error, data_path.string() + " header: " + e.what());
  }
  if (f.labeled() && static_cast<Eigen::Index>(f.labels.size()) != f.count())
    throw Error(Errc::format_error, "label count does not match frame count");
  auto values = read_f32_file(data_path, static_cast<std::size_t>(f.values.size()));
  std::copy(values.begin(), values.end(), f.values.data());
  return f;
}

TimeSeries read_wav(const fs::path& path) {
  auto in = open_in(path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  auto fail = [&](const std::string& why) {
    return Error(Errc::format_error, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw fail("not a RIFF/WAVE file");

  std::size_t pos = 12;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    const std::size_t size = get_u32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw fail("truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      format = get_u16(&bytes[body]);
      channels = get_u16(&bytes[body + 2]);
      rate = get_u32(&bytes[body + 4]);
      bits = get_u16(&bytes[body + 14]);
    } else if (id == "data") {
      pcm = &bytes[body];
      pcm_bytes = size;
    }
    pos = body + size + (size & 1);
  }
  if (format != 1 || bits != 16) throw fail("only 16-bit PCM is supported");
  if (channels != 1) throw Error(Errc::multichannel_audio, path.string() + " is not mono");
  if (pcm == nullptr) throw fail("missing data chunk");

  const std::size_t n = pcm_bytes / 2;
  RowMatrix data(1, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    data(0, static_cast<Eigen::Index>(i)) =
        static_cast<std::int16_t>(get_u16(pcm + 2 * i)) / 32768.0;
  return make_series(std::move(data), rate);
}

void write_wav(const fs::path& path, const TimeSeries& x) {
  if (x.channels() != 1) throw Error(Errc::multichannel_audio, "WAV writer expects mono audio");
  auto out = open_out(path);
  const auto n = static_cast<std::uint32_t>(x.samples());
  const auto rate = static_cast<std::uint32_t>(std::lround(x.sample_rate_hz));
  out.write("RIFF", 4);
  put_u32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, 2 * n);
  for (Eigen::Index i = 0; i < x.samples(); ++i) {
    const double v = std::clamp(x.data(0, i), -1.0, 32767.0 / 32768.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(v * 32768.0))));
  }
}

TimeSeries read_audio(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav" ? read_wav(path) : read_signal(path);
}

}  // namespace eegvad::io
