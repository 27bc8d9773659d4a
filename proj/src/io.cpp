#include "ot/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ot/error.hpp"

namespace ot {

namespace {

std::ifstream openIn(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw InvalidInputError("cannot open file: " + path);
  return in;
}

std::ofstream openOut(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw InvalidInputError("cannot write file: " + path);
  return out;
}

std::vector<double> parseCsvLine(const std::string& line,
                                 const std::string& path) {
  std::vector<double> vals;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw InvalidInputError(path + ": bad numeric field '" + tok + "'");
    }
  }
  return vals;
}

}  // namespace

DiscreteMeasure read_discrete_json(const std::string& path) {
  auto in = openIn(path, std::ios::in);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw InvalidInputError(path + ": JSON parse error: " + e.what());
  }
  if (!j.contains("points") || !j.contains("weights"))
    throw InvalidInputError(path + ": expected keys 'points' and 'weights'");
  const auto& jp = j["points"];
  const auto& jw = j["weights"];
  if (!jp.is_array() || jp.empty() || !jw.is_array())
    throw InvalidInputError(path + ": 'points' must be a non-empty array");
  const size_t k = jp.size();
  const size_t d = jp[0].is_array() ? jp[0].size() : 1;
  Matrix pts(static_cast<Index>(k), static_cast<Index>(d));
  for (size_t i = 0; i < k; ++i) {
    if (jp[i].is_array()) {
      if (jp[i].size() != d)
        throw InvalidInputError(path + ": ragged point rows");
      for (size_t c = 0; c < d; ++c)
        pts(static_cast<Index>(i), static_cast<Index>(c)) =
            jp[i][c].get<double>();
    } else {
      if (d != 1) throw InvalidInputError(path + ": ragged point rows");
      pts(static_cast<Index>(i), 0) = jp[i].get<double>();
    }
  }
  if (jw.size() != k)
    throw InvalidInputError(path + ": weight count != point count");
  Vector w(static_cast<Index>(k));
  for (size_t i = 0; i < k; ++i) w[static_cast<Index>(i)] = jw[i].get<double>();
  return DiscreteMeasure(std::move(pts), std::move(w));
}

void write_discrete_json(const DiscreteMeasure& mu, const std::string& path) {
  nlohmann::json j;
  j["points"] = nlohmann::json::array();
  for (Index i = 0; i < mu.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < mu.dim(); ++c) row.push_back(mu.points()(i, c));
    j["points"].push_back(row);
  }
  j["weights"] = std::vector<double>(mu.weights().data(),
                                     mu.weights().data() + mu.size());
  openOut(path, std::ios::out) << j.dump(2) << "\n";
}

GridDensity read_grid_csv(const std::string& path) {
  auto in = openIn(path, std::ios::in);
  std::string header;
  if (!std::getline(in, header))
    throw InvalidInputError(path + ": empty file");
  const auto head = parseCsvLine(header, path);
  if (head.size() != 3)
    throw InvalidInputError(path + ": header must be 'rows,cols,extent'");
  const Index rows = static_cast<Index>(head[0]);
  const Index cols = static_cast<Index>(head[1]);
  const double extent = head[2];
  if (rows < 1 || cols < 2 || !(extent > 0.0))
    throw InvalidInputError(path + ": bad header values");
  Vector values(rows * cols);
  std::string line;
  for (Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line))
      throw InvalidInputError(path + ": missing data rows");
    const auto vals = parseCsvLine(line, path);
    if (static_cast<Index>(vals.size()) != cols)
      throw InvalidInputError(path + ": row with wrong field count");
    for (Index c = 0; c < cols; ++c)
      values[c + cols * r] = vals[static_cast<size_t>(c)];
  }
  if (rows == 1)
    return GridDensity({cols}, std::move(values), {extent});
  return GridDensity({cols, rows}, std::move(values), {extent, extent});
}

void write_grid_csv(const GridDensity& rho, const std::string& path) {
  auto out = openOut(path, std::ios::out);
  const Index cols = rho.shape()[0];
  const Index rows = rho.dim() == 2 ? rho.shape()[1] : 1;
  out.precision(17);
  out << rows << "," << cols << "," << rho.extent()[0] << "\n";
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c)
      out << rho.values()[c + cols * r] << (c + 1 == cols ? "" : ",");
    out << "\n";
  }
}

GridDensity read_grid_pgm(const std::string& path) {
  auto in = openIn(path, std::ios::in | std::ios::binary);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw InvalidInputError(path + ": not a binary PGM (P5)");
  auto nextInt = [&]() {
    // Skip whitespace and '#' comment lines between header fields.
    int ch = in.peek();
    while (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t' || ch == '#') {
      if (ch == '#') {
        std::string junk;
        std::getline(in, junk);
      } else {
        in.get();
      }
      ch = in.peek();
    }
    long v = -1;
    in >> v;
    if (!in || v < 0) throw InvalidInputError(path + ": bad PGM header");
    return v;
  };
  const long width = nextInt();
  const long height = nextInt();
  const long maxval = nextInt();
  if (width < 2 || height < 1 || maxval < 1 || maxval > 65535)
    throw InvalidInputError(path + ": unsupported PGM geometry or maxval");
  in.get();  // single whitespace before raster
  const size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
  Vector values(static_cast<Index>(n));
  if (maxval < 256) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(n));
    if (!in) throw InvalidInputError(path + ": truncated PGM raster");
    for (size_t i = 0; i < n; ++i) values[static_cast<Index>(i)] = buf[i];
  } else {
    std::vector<unsigned char> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(2 * n));
    if (!in) throw InvalidInputError(path + ": truncated PGM raster");
    for (size_t i = 0; i < n; ++i)
      values[static_cast<Index>(i)] =
          static_cast<double>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  if (height == 1)
    return GridDensity({static_cast<Index>(width)}, std::move(values));
  return GridDensity({static_cast<Index>(width), static_cast<Index>(height)},
                     std::move(values));
}

void write_grid_pgm(const GridDensity& rho, const std::string& path,
                    int maxval) {
  if (maxval < 1 || maxval > 65535)
    throw InvalidInputError("pgm: maxval out of range");
  const Index cols = rho.shape()[0];
  const Index rows = rho.dim() == 2 ? rho.shape()[1] : 1;
  const double peak = rho.values().maxCoeff();
  auto out = openOut(path, std::ios::out | std::ios::binary);
  out << "P5\n" << cols << " " << rows << "\n" << maxval << "\n";
  for (Index i = 0; i < rho.cellCount(); ++i) {
    const double s = peak > 0.0 ? rho.values()[i] / peak : 0.0;
    const long q = std::lround(s * maxval);
    if (maxval < 256) {
      out.put(static_cast<char>(q));
    } else {
      out.put(static_cast<char>((q >> 8) & 0xff));
      out.put(static_cast<char>(q & 0xff));
    }
  }
}

MeshDensity read_mesh_off(const std::string& offPath,
                          const std::string& densityCsvPath) {
  auto in = openIn(offPath, std::ios::in);
  std::string magic;
  in >> magic;
  if (magic != "OFF") throw InvalidInputError(offPath + ": missing OFF header");
  Index nV = 0, nF = 0, nE = 0;
  in >> nV >> nF >> nE;
  if (!in || nV < 3 || nF < 1)
    throw InvalidInputError(offPath + ": bad OFF counts");
  Matrix vertices(nV, 3);
  for (Index i = 0; i < nV; ++i)
    in >> vertices(i, 0) >> vertices(i, 1) >> vertices(i, 2);
  Eigen::MatrixX3i triangles(nF, 3);
  for (Index f = 0; f < nF; ++f) {
    int arity = 0;
    in >> arity;
    if (arity != 3)
      throw InvalidInputError(offPath + ": only triangle faces supported");
    in >> triangles(f, 0) >> triangles(f, 1) >> triangles(f, 2);
  }
  if (!in) throw InvalidInputError(offPath + ": truncated OFF data");

  auto csv = openIn(densityCsvPath, std::ios::in);
  Vector density(nV);
  std::string line;
  Index i = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    if (i >= nV)
      throw InvalidInputError(densityCsvPath + ": more values than vertices");
    density[i++] = std::stod(line);
  }
  if (i != nV)
    throw InvalidInputError(densityCsvPath + ": fewer values than vertices");
  return MeshDensity(std::move(vertices), std::move(triangles),
                     std::move(density));
}

void write_mesh_off(const MeshDensity& mesh, const std::string& offPath,
                    const std::string& densityCsvPath) {
  auto out = openOut(offPath, std::ios::out);
  out.precision(17);
  out << "OFF\n"
      << mesh.vertexCount() << " " << mesh.triangleCount() << " 0\n";
  for (Index i = 0; i < mesh.vertexCount(); ++i)
    out << mesh.vertices()(i, 0) << " " << mesh.vertices()(i, 1) << " "
        << mesh.vertices()(i, 2) << "\n";
  for (Index f = 0; f < mesh.triangleCount(); ++f)
    out << "3 " << mesh.triangles()(f, 0) << " " << mesh.triangles()(f, 1)
        << " " << mesh.triangles()(f, 2) << "\n";
  auto csv = openOut(densityCsvPath, std::ios::out);
  csv.precision(17);
  for (Index i = 0; i < mesh.vertexCount(); ++i)
    csv << mesh.density()[i] << "\n";
}

void write_plan_csv(const TransportPlan& plan, const std::string& path) {
  auto out = openOut(path, std::ios::out);
  out.precision(17);
  out << "i,j,mass\n";
  for (const auto& e : plan.entries)
    out << e.i << "," << e.j << "," << e.mass << "\n";
}

TransportPlan read_plan_csv(const std::string& path) {
  auto in = openIn(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line) || line.rfind("i,j,mass", 0) != 0)
    throw InvalidInputError(path + ": missing 'i,j,mass' header");
  TransportPlan plan;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto vals = parseCsvLine(line, path);
    if (vals.size() != 3) throw InvalidInputError(path + ": bad triple");
    TransportPlan::Entry e;
    e.i = static_cast<Index>(vals[0]);
    e.j = static_cast<Index>(vals[1]);
    e.mass = vals[2];
    plan.entries.push_back(e);
    plan.rows = std::max(plan.rows, e.i + 1);
    plan.cols = std::max(plan.cols, e.j + 1);
  }
  plan.rowMarginal = plan.computeRowMarginal();
  plan.colMarginal = plan.computeColMarginal();
  return plan;
}

GridDensity read_grid_auto(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".csv") return read_grid_csv(path);
  if (ext == ".pgm") return read_grid_pgm(path);
  throw InvalidInputError(path + ": unknown grid format (want .csv or .pgm)");
}

}  // namespace ot
