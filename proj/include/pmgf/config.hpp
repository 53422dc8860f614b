#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pmgf/guidance.hpp"
#include "pmgf/vae.hpp"

namespace pmgf {

struct SynthSettings {
  int athletes = 20;
  int trials = 5;
  double marker_noise_mm = 5.0;
  double left_handed_fraction = 0.0;
  // Also write raw 240 Hz captures that go through the full preprocessing.
  bool raw = false;
  double raw_rate_hz = 240.0;
};

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir = "pmgf-out";
  // Drives the cohort, the weight initialisation and batch order, and the
  // evolution strategy.
  std::uint64_t seed = 0;

  SynthSettings synth;
  std::optional<double> cutoff_hz;  // empty selects residual analysis
  VAEConfig vae;
  ESConfig es;
  FitnessParams fitness;

  int interpolation_steps = 11;
  std::string source_athlete, target_athlete;
  bool render = true;
  std::vector<double> radii = {1, 2, 3, 4, 5};
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> optimization_files;

  void validate() const;
  // The model and search configs with the global seed applied.
  VAEConfig vae_config() const;
  ESConfig es_config() const;
};

std::string to_json_text(const RunConfig& c);
// Applies a JSON object on top of `base` (RFC 7386 merge). Unknown keys are
// rejected.
RunConfig merge_config(const RunConfig& base, const std::string& overlay_json);
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
void write_config(const std::filesystem::path& path, const RunConfig& c);

}  // namespace pmgf
