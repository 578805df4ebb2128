#include "presstok/gridadapt.hpp"

#include <algorithm>
#include <cmath>

namespace presstok::grid {

SensorGeometry parse_geometry(const std::string& spec) {
  // ROWSxCOLS[:WIDTHxHEIGHT]
  SensorGeometry g;
  auto bad = [&] { throw std::runtime_error("bad geometry spec (want ROWSxCOLS:WIDTHxHEIGHT): " + spec); };
  size_t colon = spec.find(':');
  std::string gridpart = colon == std::string::npos ? spec : spec.substr(0, colon);
  size_t x1 = gridpart.find('x');
  if (x1 == std::string::npos) bad();
  try {
    g.rows = std::stoi(gridpart.substr(0, x1));
    g.cols = std::stoi(gridpart.substr(x1 + 1));
  } catch (...) {
    bad();
  }
  if (colon != std::string::npos) {
    std::string phys = spec.substr(colon + 1);
    size_t x2 = phys.find('x');
    if (x2 == std::string::npos) bad();
    try {
      g.width_mm = std::stod(phys.substr(0, x2));
      g.height_mm = std::stod(phys.substr(x2 + 1));
    } catch (...) {
      bad();
    }
  } else {
    // No physical dims given: assume the reference pitch (21 x 20 mm).
    g.height_mm = g.rows * 21.0;
    g.width_mm = g.cols * 20.0;
  }
  if (g.rows <= 0 || g.cols <= 0 || g.width_mm <= 0 || g.height_mm <= 0) bad();
  return g;
}

CropExtent center_crop_extent(const SensorGeometry& source, double target_aspect) {
  if (target_aspect <= 0) throw std::runtime_error("target aspect must be positive");
  const double pr = source.row_pitch_mm();
  const double pc = source.col_pitch_mm();

  // Try keeping all rows; shrink cols to match the aspect. If that needs
  // more cols than exist, keep all cols and shrink rows instead.
  int rows = source.rows;
  int cols = static_cast<int>(std::lround(rows * pr * target_aspect / pc));
  if (cols > source.cols) {
    cols = source.cols;
    rows = static_cast<int>(std::lround(cols * pc / target_aspect / pr));
  }
  rows = std::clamp(rows, 1, source.rows);
  cols = std::clamp(cols, 1, source.cols);

  CropExtent e;
  e.rows = rows;
  e.cols = cols;
  // Odd remainders put the extra margin cell on the low-index side.
  e.row_off = (source.rows - rows + 1) / 2;
  e.col_off = (source.cols - cols + 1) / 2;
  return e;
}

MatrixXf crop_frame(const MatrixXf& frame, const CropExtent& e) {
  return frame.block(e.row_off, e.col_off, e.rows, e.cols);
}

MatrixXf bilinear_resample(const MatrixXf& frame, int target_rows, int target_cols) {
  if (target_rows < 1 || target_cols < 1) {
    throw std::runtime_error("resample target dims must be >= 1");
  }
  const int sr = static_cast<int>(frame.rows());
  const int sc = static_cast<int>(frame.cols());
  if (sr == target_rows && sc == target_cols) return frame;

  MatrixXf out(target_rows, target_cols);
  for (int i = 0; i < target_rows; ++i) {
    // Integer numerator keeps exact hits exact (identity is bit-exact).
    double r = target_rows == 1 ? 0.0
                                : static_cast<double>(i) * (sr - 1) / (target_rows - 1);
    int r0 = static_cast<int>(r);
    int r1 = std::min(r0 + 1, sr - 1);
    float fr = static_cast<float>(r - r0);
    for (int j = 0; j < target_cols; ++j) {
      double c = target_cols == 1 ? 0.0
                                  : static_cast<double>(j) * (sc - 1) / (target_cols - 1);
      int c0 = static_cast<int>(c);
      int c1 = std::min(c0 + 1, sc - 1);
      float fc = static_cast<float>(c - c0);
      float top = frame(r0, c0) * (1.0f - fc) + frame(r0, c1) * fc;
      float bot = frame(r1, c0) * (1.0f - fc) + frame(r1, c1) * fc;
      out(i, j) = top * (1.0f - fr) + bot * fr;
    }
  }
  return out;
}

namespace {

void check_target_fits(const SensorGeometry& source, const SensorGeometry& target) {
  if (target.width_mm > source.width_mm + 1e-9 || target.height_mm > source.height_mm + 1e-9) {
    throw std::runtime_error(
        "target sensing area exceeds the source grid: the extra region would "
        "contain no pressure spatial information");
  }
}

MatrixXf frame_as_matrix(const PressureDynamics& d, int f) {
  MatrixXf m(d.rows, d.cols);
  for (int r = 0; r < d.rows; ++r) {
    for (int c = 0; c < d.cols; ++c) m(r, c) = d.at(f, r, c);
  }
  return m;
}

}  // namespace

PressureDynamics adapt_dynamics(const PressureDynamics& dynamics,
                                const SensorGeometry& source,
                                const SensorGeometry& target) {
  if (dynamics.rows != source.rows || dynamics.cols != source.cols) {
    throw std::runtime_error("dynamics grid does not match the source geometry");
  }
  check_target_fits(source, target);
  CropExtent e = center_crop_extent(source, target.aspect());

  PressureDynamics out = make_dynamics(dynamics.frame_count(), target.rows, target.cols,
                                       dynamics.rate_hz);
  const bool identity = e.rows == source.rows && e.cols == source.cols &&
                        target.rows == source.rows && target.cols == source.cols;
  if (identity) {
    out.frames = dynamics.frames;
    return out;
  }
  for (int f = 0; f < dynamics.frame_count(); ++f) {
    MatrixXf cropped = crop_frame(frame_as_matrix(dynamics, f), e);
    MatrixXf res = bilinear_resample(cropped, target.rows, target.cols);
    for (int r = 0; r < target.rows; ++r) {
      for (int c = 0; c < target.cols; ++c) out.at(f, r, c) = res(r, c);
    }
  }
  return out;
}

PressureDynamics adapt_dynamics_inverse(const PressureDynamics& dynamics,
                                        const SensorGeometry& source,
                                        const SensorGeometry& target) {
  if (dynamics.rows != target.rows || dynamics.cols != target.cols) {
    throw std::runtime_error("dynamics grid does not match the target geometry");
  }
  check_target_fits(source, target);
  CropExtent e = center_crop_extent(source, target.aspect());

  PressureDynamics out = make_dynamics(dynamics.frame_count(), source.rows, source.cols,
                                       dynamics.rate_hz);
  for (int f = 0; f < dynamics.frame_count(); ++f) {
    MatrixXf res = bilinear_resample(frame_as_matrix(dynamics, f), e.rows, e.cols);
    for (int r = 0; r < e.rows; ++r) {
      for (int c = 0; c < e.cols; ++c) out.at(f, e.row_off + r, e.col_off + c) = res(r, c);
    }
  }
  return out;
}

}  // namespace presstok::grid
