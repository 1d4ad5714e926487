// Trajectory-over-floorplan renderings.

#ifndef LOCFUSE_PLOT_H_
#define LOCFUSE_PLOT_H_

#include <span>

#include "locfuse/eval.h"
#include "locfuse/geo.h"
#include "locfuse/png_io.h"
#include "locfuse/trajectory.h"

namespace locfuse {

RgbImage FloorplanImage(const FloorplanRaster& plan);

// The floorplan dimmed to half intensity, the estimate drawn as 1-pixel-radius
// disks colored by time (blue to red) and each gt point as a black cross with
// a line to the estimate at the same time.
RgbImage RenderTrajectoryPlot(const FloorplanRaster& plan, const PositionSeries& estimate,
                              std::span<const GtPoint> gt);

}  // namespace locfuse

#endif  // LOCFUSE_PLOT_H_
