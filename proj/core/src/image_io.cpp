#include "hotrack/image_io.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "hotrack/error.hpp"
#include "json_util.hpp"

namespace hotrack {

using nlohmann::json;

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  NetpbmHeader h;
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  h.magic = token();
  try {
    h.width = std::stoi(token());
    h.height = std::stoi(token());
    h.maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError("bad netpbm header in " + path.string(), 1);
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw ParseError("bad netpbm dimensions in " + path.string(), 1);
  return h;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

}  // namespace

void write_depth_pgm(const DepthFrame& frame, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << frame.width << ' ' << frame.height << "\n65535\n";
  std::vector<char> buf(frame.size() * 2);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(frame.depth[i], 0.0f, 65535.0f)));
    buf[2 * i] = static_cast<char>(v >> 8);
    buf[2 * i + 1] = static_cast<char>(v & 0xff);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

DepthFrame read_depth_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P5") throw ParseError("expected P5 depth image: " + path.string(), 1);
  DepthFrame f(h.width, h.height, Intrinsics{});
  const int bytes = h.maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(f.size() * bytes);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw ParseError("truncated depth image: " + path.string());
  for (std::size_t i = 0; i < f.size(); ++i)
    f.depth[i] = bytes == 2 ? static_cast<float>((buf[2 * i] << 8) | buf[2 * i + 1]) : buf[i];
  return f;
}

void write_color_ppm(const ColorFrame& frame, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P6\n" << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()), static_cast<std::streamsize>(frame.rgb.size()));
}

ColorFrame read_color_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P6" || h.maxval != 255) throw ParseError("expected 8-bit P6 color image: " + path.string(), 1);
  ColorFrame f(h.width, h.height);
  if (!in.read(reinterpret_cast<char*>(f.rgb.data()), static_cast<std::streamsize>(f.rgb.size())))
    throw ParseError("truncated color image: " + path.string());
  return f;
}

void write_gray_pgm(int width, int height, const std::vector<std::uint8_t>& data,
                    const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

std::vector<std::uint8_t> read_gray_pgm(const std::filesystem::path& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  const NetpbmHeader h = read_header(in, path);
  if (h.magic != "P5" || h.maxval > 255) throw ParseError("expected 8-bit P5 image: " + path.string(), 1);
  width = h.width;
  height = h.height;
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height);
  if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size())))
    throw ParseError("truncated image: " + path.string());
  return data;
}

void write_camera(const CameraModel& c, const std::filesystem::path& path) {
  const json j = {{"fx", c.intrinsics.fx}, {"fy", c.intrinsics.fy}, {"cx", c.intrinsics.cx},
                  {"cy", c.intrinsics.cy}, {"width", c.width},     {"height", c.height}};
  detail::write_text(path, j.dump(2) + "\n");
}

static CameraModel read_camera_unchecked(const std::filesystem::path& path) {
  const json j = detail::parse_json(detail::read_text(path), path.string());
  detail::check_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, "camera");
  CameraModel c;
  c.intrinsics = {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                  j.at("cy").get<double>()};
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  if (c.width <= 0 || c.height <= 0 || !(c.intrinsics.fx > 0) || !(c.intrinsics.fy > 0))
    throw ParseError("camera: invalid intrinsics or size");
  return c;
}

static SequenceManifest read_manifest_unchecked(const std::filesystem::path& path) {
  const json j = detail::parse_json(detail::read_text(path), path.string());
  detail::check_keys(j, {"format", "version", "camera", "frames"}, "manifest");
  if (j.value("format", std::string()) != "hotrack-sequence" || j.value("version", 0) != 1)
    throw ParseError("manifest: expected format hotrack-sequence version 1");
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() || p.empty() ? q : base / q;
  };
  SequenceManifest m;
  m.camera = resolve(j.at("camera").get<std::string>());
  for (const json& f : j.at("frames")) {
    detail::check_keys(f, {"depth", "color", "labels", "timestamp"}, "manifest frame");
    ManifestEntry e;
    e.depth = resolve(f.at("depth").get<std::string>());
    e.color = resolve(f.at("color").get<std::string>());
    e.labels = resolve(f.value("labels", std::string()));
    e.timestamp = f.value("timestamp", 0.0);
    m.frames.push_back(e);
  }
  return m;
}

void write_manifest(const SequenceManifest& m, const std::filesystem::path& path) {
  json frames = json::array();
  for (const ManifestEntry& e : m.frames) {
    json f = {{"depth", e.depth.generic_string()}, {"color", e.color.generic_string()}, {"timestamp", e.timestamp}};
    if (!e.labels.empty()) f["labels"] = e.labels.generic_string();
    frames.push_back(f);
  }
  const json j = {{"format", "hotrack-sequence"}, {"version", 1}, {"camera", m.camera.generic_string()}, {"frames", frames}};
  detail::write_text(path, j.dump(2) + "\n");
}

}  // namespace hotrack

namespace hotrack {

SequenceFrame load_sequence_frame(const SequenceManifest& manifest, const CameraModel& camera,
                                  std::size_t index) {
  if (index >= manifest.frames.size()) throw InvalidInput("frame index out of range");
  const ManifestEntry& e = manifest.frames[index];
  SequenceFrame f;
  f.depth = read_depth_pgm(e.depth);
  f.color = read_color_ppm(e.color);
  if (f.depth.width != camera.width || f.depth.height != camera.height)
    throw InvalidInput(e.depth.string() + ": size does not match the camera");
  if (f.color.width != camera.width || f.color.height != camera.height)
    throw InvalidInput(e.color.string() + ": size does not match the camera");
  f.depth.intrinsics = camera.intrinsics;
  f.depth.timestamp = e.timestamp;
  return f;
}

CameraModel read_camera(const std::filesystem::path& path) {
  try {
    return read_camera_unchecked(path);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("camera file: ") + e.what());
  }
}

SequenceManifest read_manifest(const std::filesystem::path& path) {
  try {
    return read_manifest_unchecked(path);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

}  // namespace hotrack
