#pragma once

#include "presstok/common.hpp"

namespace presstok::grid {

// A sensor array geometry: grid dims plus the physical sensing area.
// rows run along height_mm, cols along width_mm. The reference mat is
// 80 x 28 sensors over 560 x 1680 mm.
struct SensorGeometry {
  int rows = 80;
  int cols = 28;
  double width_mm = 560.0;
  double height_mm = 1680.0;

  double row_pitch_mm() const { return height_mm / rows; }
  double col_pitch_mm() const { return width_mm / cols; }
  // width / height of the physical area.
  double aspect() const { return width_mm / height_mm; }
};

// Parses "ROWSxCOLS:WIDTHxHEIGHT" (mm), e.g. "80x28:560x1680".
SensorGeometry parse_geometry(const std::string& spec);

struct CropExtent {
  int row_off = 0;
  int col_off = 0;
  int rows = 0;
  int cols = 0;
};

// Maximal-area centered sub-grid of `source` whose physical aspect ratio
// matches `target_aspect` (width/height) to within one cell. For odd
// remainders the extra margin cell goes to the low-index side.
CropExtent center_crop_extent(const SensorGeometry& source, double target_aspect);

// Frame is a (rows x cols) map.
MatrixXf crop_frame(const MatrixXf& frame, const CropExtent& e);

// Align-corners bilinear resampling: output corners sample input corners
// exactly, interior points are convex combinations of the 4 neighbors.
MatrixXf bilinear_resample(const MatrixXf& frame, int target_rows, int target_cols);

// Full Appendix-style adaptation: per frame, center-crop the source grid
// to the target's physical aspect, then resample to the target's sensor
// counts. Frame count, ordering and rate are untouched. Errors when the
// target's physical area extends beyond the source.
PressureDynamics adapt_dynamics(const PressureDynamics& dynamics,
                                const SensorGeometry& source,
                                const SensorGeometry& target);

// Inverse direction: takes target-geometry data and produces a
// source-geometry sequence with the resampled signal placed in the
// source's cropped region (zeros elsewhere).
PressureDynamics adapt_dynamics_inverse(const PressureDynamics& dynamics,
                                        const SensorGeometry& source,
                                        const SensorGeometry& target);

}  // namespace presstok::grid
