// CSV formats:
//   trajectory  t,speed,heading      (s, m/frame, rad)
//   positions   t,x,y                (s, m, m)
//   fixes       t,x,y,accuracy       (s, m, m, m)
// Parse errors are std::runtime_error carrying "<file>:<line>: <reason>".

#ifndef LOCFUSE_CSV_IO_H_
#define LOCFUSE_CSV_IO_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "locfuse/eval.h"
#include "locfuse/trajectory.h"

namespace locfuse {

InertialTrajectory ReadTrajectoryCsv(const std::filesystem::path& path);
PositionSeries ReadPositionsCsv(const std::filesystem::path& path);
std::vector<FlpFix> ReadFixesCsv(const std::filesystem::path& path);

std::string TrajectoryCsv(const InertialTrajectory& traj);
std::string PositionsCsv(const PositionSeries& series);
std::string FixesCsv(std::span<const FlpFix> fixes);

// Atomic (temp + rename) file writers.
void WriteTrajectoryCsv(const std::filesystem::path& path, const InertialTrajectory& traj);
void WritePositionsCsv(const std::filesystem::path& path, const PositionSeries& series);
void WriteFixesCsv(const std::filesystem::path& path, std::span<const FlpFix> fixes);

std::vector<GtPoint> ToGtPoints(const PositionSeries& series);

}  // namespace locfuse

#endif  // LOCFUSE_CSV_IO_H_
