#pragma once

#include <string>

#include "ot/measures.hpp"

namespace ot {

/// JSON object {"points": [[x,...],...], "weights": [...]}.
DiscreteMeasure read_discrete_json(const std::string& path);
void write_discrete_json(const DiscreteMeasure& mu, const std::string& path);

/// CSV: header line "rows,cols,extent", then `rows` lines of `cols`
/// comma-separated cell values (row-major).  rows == 1 encodes a 1D grid.
/// The box is [0,extent] per axis.
GridDensity read_grid_csv(const std::string& path);
void write_grid_csv(const GridDensity& rho, const std::string& path);

/// Binary PGM (P5), maxval <= 65535; pixel values are rescaled to a unit
/// mass density on load.  Unit box extent.
GridDensity read_grid_pgm(const std::string& path);
void write_grid_pgm(const GridDensity& rho, const std::string& path,
                    int maxval = 65535);

/// OFF triangle mesh plus a sidecar CSV of per-vertex density values (one
/// per line).
MeshDensity read_mesh_off(const std::string& offPath,
                          const std::string& densityCsvPath);
void write_mesh_off(const MeshDensity& mesh, const std::string& offPath,
                    const std::string& densityCsvPath);

/// Plan as "i,j,mass" triples with header.
void write_plan_csv(const TransportPlan& plan, const std::string& path);
TransportPlan read_plan_csv(const std::string& path);

/// Any grid measure file by extension: .csv or .pgm.
GridDensity read_grid_auto(const std::string& path);

}  // namespace ot
