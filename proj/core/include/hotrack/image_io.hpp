#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hotrack/depth_input.hpp"

namespace hotrack {

/// 16-bit binary PGM (P5, maxval 65535), one millimetre per count.
void write_depth_pgm(const DepthFrame& frame, const std::filesystem::path& path);
/// Reads a P5 PGM; intrinsics are left untouched and must be set by the caller.
DepthFrame read_depth_pgm(const std::filesystem::path& path);

/// 8-bit binary PPM (P6).
void write_color_ppm(const ColorFrame& frame, const std::filesystem::path& path);
ColorFrame read_color_ppm(const std::filesystem::path& path);

/// 8-bit PGM, used for label images.
void write_gray_pgm(int width, int height, const std::vector<std::uint8_t>& data,
                    const std::filesystem::path& path);
std::vector<std::uint8_t> read_gray_pgm(const std::filesystem::path& path, int& width, int& height);

/// Camera sidecar: {"fx","fy","cx","cy","width","height"}.
void write_camera(const CameraModel& camera, const std::filesystem::path& path);
CameraModel read_camera(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path depth;
  std::filesystem::path color;
  std::filesystem::path labels;  // optional ground truth
  double timestamp = 0.0;
};

/// Ordered frame list. Relative paths resolve against the manifest's directory.
struct SequenceManifest {
  std::filesystem::path camera;
  std::vector<ManifestEntry> frames;
};

SequenceManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const SequenceManifest& manifest, const std::filesystem::path& path);

struct SequenceFrame {
  DepthFrame depth;
  ColorFrame color;
};

/// Reads frame `index`; both images must match the camera size.
SequenceFrame load_sequence_frame(const SequenceManifest& manifest, const CameraModel& camera,
                                  std::size_t index);

}  // namespace hotrack
