#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pmgf/motion.hpp"

namespace pmgf {

// Motion file: "key: value" header lines, a `columns:` line naming the 45
// columns (joint_axis in canonical order), then one comma-separated row per
// frame. Values are written with 17 significant digits and read back exactly.
//
//   # pmgf-motion v1
//   athlete_id: A01
//   trial_id: A01_T1
//   throwing_side: right
//   sample_rate_hz: 500
//   ball_velocity_mph: 80.5
//   frames: 600
//   release_frame: 83        (normalized sequences only)
//   columns: head_x,head_y,head_z,shoulder_L_x,...
//   <frames rows>
inline constexpr const char* kMotionMagic = "# pmgf-motion v1";

void write_raw_capture(const std::filesystem::path& path, const RawCapture& raw);
RawCapture read_raw_capture(const std::filesystem::path& path);

void write_sequence(const std::filesystem::path& path, const MotionSequence& seq);
MotionSequence read_sequence(const std::filesystem::path& path);

std::string column_header();

struct ManifestTrial {
  std::string trial_id;
  std::filesystem::path file;  // relative to the manifest directory
  std::optional<std::filesystem::path> ground_truth;
};

struct ManifestAthlete {
  std::string athlete_id;
  std::vector<ManifestTrial> trials;
};

// JSON dataset manifest grouping trial files by athlete.
struct Manifest {
  // "normalized" (101-frame sequences) or "raw" (captures).
  std::string kind = "normalized";
  std::vector<ManifestAthlete> athletes;

  std::size_t trial_count() const;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

// Loads every sequence of a normalized manifest, in manifest order.
std::vector<MotionSequence> load_sequences(const std::filesystem::path& manifest_path);

}  // namespace pmgf
