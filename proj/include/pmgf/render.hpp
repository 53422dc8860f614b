#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmgf/motion.hpp"
#include "pmgf/vae.hpp"

namespace pmgf {

struct Image {
  int width = 0, height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image(int w, int h, std::uint8_t fill = 255);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& img);

// Side view (x to the right, y up) scaled to the bounding box of the whole
// sequence so that every frame of a sequence shares one layout.
Image render_frame(const MotionSequence& seq, std::size_t frame, int size = 320);

// One image per requested frame (all 101 when `frames` is empty), written
// as <prefix>_fNNN.ppm. Returns the written paths.
std::vector<std::filesystem::path> render_stick_figure(const MotionSequence& seq,
                                                       std::optional<std::vector<std::size_t>> frames,
                                                       const std::filesystem::path& prefix);

// Selected frames side by side in a single image.
Image render_panel(const MotionSequence& seq, std::span<const std::size_t> frames, int size = 240);

// Projection of the latents on their top-2 principal directions (2 x N).
Eigen::MatrixXd principal_projection(std::span<const LatentVector> latents);

// Scatter of the projection, one colour per distinct label.
Image latent_scatter(std::span<const LatentVector> latents, std::span<const std::string> labels, int size = 480);

}  // namespace pmgf
