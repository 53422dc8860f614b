#include "pmgf/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <Eigen/Eigenvalues>

#include "pmgf/errors.hpp"

namespace pmgf {

Image::Image(int w, int h, std::uint8_t fill) : width(w), height(h), rgb(static_cast<std::size_t>(w * h * 3), fill) {
  require(w > 0 && h > 0, "image size must be positive");
}

void Image::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const auto i = static_cast<std::size_t>((y * width + x) * 3);
  rgb[i] = r;
  rgb[i + 1] = g;
  rgb[i + 2] = b;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!out) throw ValidationError("failed writing " + path.string());
}

namespace {

struct Color {
  std::uint8_t r, g, b;
};

void dot(Image& img, int cx, int cy, int radius, Color c) {
  for (int y = cy - radius; y <= cy + radius; ++y)
    for (int x = cx - radius; x <= cx + radius; ++x) img.set(x, y, c.r, c.g, c.b);
}

void line(Image& img, int x0, int y0, int x1, int y1, Color c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    dot(img, x0, y0, 1, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

struct Frame2D {
  double min_x, min_y, scale;
  int offset_x, offset_y, size;
  int px(double x) const { return offset_x + static_cast<int>(std::lround((x - min_x) * scale)); }
  int py(double y) const { return offset_y + size - 1 - static_cast<int>(std::lround((y - min_y) * scale)); }
};

Frame2D fit_sequence(const MotionSequence& seq, int size, int offset_x) {
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (std::size_t f = 0; f < seq.positions.frames(); ++f) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const Eigen::Vector3d p = seq.point(f, static_cast<JointId>(j));
      min_x = std::min(min_x, p.x());
      max_x = std::max(max_x, p.x());
      min_y = std::min(min_y, p.y());
      max_y = std::max(max_y, p.y());
    }
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
  const int margin = size / 16;
  return {min_x, min_y, (size - 2 * margin - 1) / span, offset_x + margin, margin, size - 2 * margin};
}

void draw_pose(Image& img, const MotionSequence& seq, std::size_t frame, const Frame2D& fr) {
  const SideJoints sj = side_joints(seq.throwing_side);
  for (const auto& bone : kBones) {
    const Eigen::Vector3d a = seq.point(frame, bone[0]), b = seq.point(frame, bone[1]);
    const bool throwing = bone[0] == sj.throwing_shoulder || bone[0] == sj.throwing_elbow ||
                          bone[1] == sj.throwing_elbow || bone[1] == sj.throwing_wrist;
    line(img, fr.px(a.x()), fr.py(a.y()), fr.px(b.x()), fr.py(b.y()), throwing ? Color{200, 40, 40} : Color{30, 30, 30});
  }
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const Eigen::Vector3d p = seq.point(frame, static_cast<JointId>(j));
    dot(img, fr.px(p.x()), fr.py(p.y()), 2, {40, 90, 200});
  }
}

}  // namespace

Image render_frame(const MotionSequence& seq, std::size_t frame, int size) {
  require(frame < seq.positions.frames(), "frame index " + std::to_string(frame) + " out of range");
  Image img(size, size);
  draw_pose(img, seq, frame, fit_sequence(seq, size, 0));
  return img;
}

std::vector<std::filesystem::path> render_stick_figure(const MotionSequence& seq,
                                                       std::optional<std::vector<std::size_t>> frames,
                                                       const std::filesystem::path& prefix) {
  std::vector<std::size_t> list;
  if (frames && !frames->empty()) {
    list = *frames;
  } else {
    for (std::size_t f = 0; f < seq.positions.frames(); ++f) list.push_back(f);
  }
  for (std::size_t f : list) require(f < seq.positions.frames(), "frame index " + std::to_string(f) + " out of range");
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  std::vector<std::filesystem::path> out;
  for (std::size_t f : list) {
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_f%03zu.ppm", f);
    std::filesystem::path p = prefix;
    p += suffix;
    write_ppm(p, render_frame(seq, f));
    out.push_back(p);
  }
  return out;
}

Image render_panel(const MotionSequence& seq, std::span<const std::size_t> frames, int size) {
  require(!frames.empty(), "render_panel needs at least one frame");
  Image img(size * static_cast<int>(frames.size()), size);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require(frames[i] < seq.positions.frames(), "frame index out of range");
    draw_pose(img, seq, frames[i], fit_sequence(seq, size, size * static_cast<int>(i)));
  }
  return img;
}

Eigen::MatrixXd principal_projection(std::span<const LatentVector> latents) {
  require(latents.size() >= 2, "projection needs at least 2 latents");
  const Eigen::Index d = latents.front().size();
  Eigen::MatrixXd X(d, static_cast<Eigen::Index>(latents.size()));
  for (std::size_t i = 0; i < latents.size(); ++i) {
    require(latents[i].size() == d, "latents differ in length");
    X.col(static_cast<Eigen::Index>(i)) = latents[i];
  }
  const Eigen::VectorXd mean = X.rowwise().mean();
  X.colwise() -= mean;
  const Eigen::MatrixXd cov = X * X.transpose() / static_cast<double>(X.cols());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // Eigenvalues ascend; take the last two and fix each sign so the largest
  // loading is positive.
  Eigen::MatrixXd basis(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - std::min<Eigen::Index>(k, d - 1));
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(k) = v;
  }
  if (d == 1) basis.col(1).setZero();
  return basis.transpose() * X;
}

Image latent_scatter(std::span<const LatentVector> latents, std::span<const std::string> labels, int size) {
  require(labels.size() == latents.size(), "one label per latent");
  const Eigen::MatrixXd P = principal_projection(latents);
  std::map<std::string, std::size_t> ids;
  for (const auto& l : labels) ids.emplace(l, ids.size());
  const double min_x = P.row(0).minCoeff(), max_x = P.row(0).maxCoeff();
  const double min_y = P.row(1).minCoeff(), max_y = P.row(1).maxCoeff();
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const int margin = size / 16;
  const double scale = (size - 2 * margin - 1) / span;
  Image img(size, size);
  for (Eigen::Index i = 0; i < P.cols(); ++i) {
    // Evenly spaced hues.
    const double h = static_cast<double>(ids[labels[static_cast<std::size_t>(i)]]) / static_cast<double>(ids.size()) * 6.0;
    const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
      case 0: r = 1; g = x; break;
      case 1: r = x; g = 1; break;
      case 2: g = 1; b = x; break;
      case 3: g = x; b = 1; break;
      case 4: r = x; b = 1; break;
      default: r = 1; b = x; break;
    }
    const auto to8 = [](double v) { return static_cast<std::uint8_t>(std::lround(40 + 180 * v)); };
    const int px = margin + static_cast<int>(std::lround((P(0, i) - min_x) * scale));
    const int py = size - 1 - margin - static_cast<int>(std::lround((P(1, i) - min_y) * scale));
    dot(img, px, py, 3, {to8(r), to8(g), to8(b)});
  }
  return img;
}

}  // namespace pmgf
