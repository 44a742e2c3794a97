#include "occflow/grid.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace occflow {

static_assert(std::endian::native == std::endian::little,
              "grid files are written as little-endian floats");

Stencil make_stencil(const GridSpec& spec, const V3<double>& x) {
  int i0[3];
  double wa[3][2];
  double da[3][2];
  for (int d = 0; d < 3; ++d) {
    const int n = spec.dims[d];
    double u = (x[d] - spec.origin[d]) / spec.resolution - 0.5;
    double slope = 1.0 / spec.resolution;
    if (!(u > 0.0)) {  // also catches NaN
      u = 0.0;
      slope = 0.0;
    } else if (u >= n - 1) {
      u = n - 1;
      slope = 0.0;
    }
    int base = static_cast<int>(std::floor(u));
    if (base > n - 2) base = n - 2;
    const double f = u - base;
    i0[d] = base;
    wa[d][0] = 1.0 - f;
    wa[d][1] = f;
    da[d][0] = -slope;
    da[d][1] = slope;
  }
  Stencil st;
  for (int c = 0; c < 8; ++c) {
    const int bx = c >> 2, by = (c >> 1) & 1, bz = c & 1;
    st.cell[c] = static_cast<std::uint32_t>(spec.index(i0[0] + bx, i0[1] + by, i0[2] + bz));
    st.w[c] = wa[0][bx] * wa[1][by] * wa[2][bz];
    st.dw[c][0] = da[0][bx] * wa[1][by] * wa[2][bz];
    st.dw[c][1] = wa[0][bx] * da[1][by] * wa[2][bz];
    st.dw[c][2] = wa[0][bx] * wa[1][by] * da[2][bz];
  }
  return st;
}

double ScalarGrid3::sample(const Vec3& x) const {
  return occflow::sample<double, double>(nullptr, *this, -1, to_v3(x));
}

VectorGrid3::VectorGrid3(const GridSpec& spec, const Vec3& fill)
    : spec_(spec), values_(3 * spec.cell_count()) {
  for (std::size_t c = 0; c < spec.cell_count(); ++c) set(c, fill);
}

Vec3 VectorGrid3::sample(const Vec3& x) const {
  return to_vec3(occflow::sample<double, double>(nullptr, *this, -1, to_v3(x)));
}

double sample_trilinear(const ScalarGrid3& grid, const Vec3& x) { return grid.sample(x); }

// --- files ------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'O', 'C', 'C', 'F', 'G', 'R', 'I', 'D'};

nlohmann::json spec_to_json(const GridSpec& s) {
  return {{"origin", {s.origin.x(), s.origin.y(), s.origin.z()}},
          {"extent", {s.extent.x(), s.extent.y(), s.extent.z()}},
          {"resolution", s.resolution},
          {"dims", {s.dims[0], s.dims[1], s.dims[2]}}};
}

GridSpec spec_from_json(const nlohmann::json& j) {
  const auto o = j.at("origin").get<std::vector<double>>();
  const auto e = j.at("extent").get<std::vector<double>>();
  if (o.size() != 3 || e.size() != 3) throw std::runtime_error("grid header: bad spec");
  GridSpec s = GridSpec::make({o[0], o[1], o[2]}, {e[0], e[1], e[2]},
                              j.at("resolution").get<double>());
  const auto dims = j.at("dims").get<std::vector<int>>();
  if (dims.size() != 3 || dims[0] != s.dims[0] || dims[1] != s.dims[1] || dims[2] != s.dims[2])
    throw std::runtime_error("grid header: dims disagree with extent/resolution");
  return s;
}

}  // namespace

void write_grid_file(const std::string& path, const GridFile& file) {
  nlohmann::json header;
  header["format"] = "occflow-grid";
  header["version"] = 1;
  header["spec"] = spec_to_json(file.spec);
  header["dtype"] = "float32";
  header["meta"] = nlohmann::json::parse(file.meta_json);
  auto& entries = header["entries"] = nlohmann::json::array();
  for (const auto& e : file.entries) {
    if (e.values.size() != file.spec.cell_count() * static_cast<std::size_t>(e.components))
      throw std::invalid_argument("grid entry '" + e.name + "' has wrong value count");
    entries.push_back({{"name", e.name}, {"components", e.components}, {"count", e.values.size()}});
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf;
  for (const auto& e : file.entries) {
    buf.assign(e.values.begin(), e.values.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

GridFile read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path + ": not a .grid file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw std::runtime_error(path + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);
  if (header.value("dtype", "") != "float32")
    throw std::runtime_error(path + ": unsupported dtype");

  GridFile file;
  file.spec = spec_from_json(header.at("spec"));
  file.meta_json = header.value("meta", nlohmann::json::object()).dump();
  std::vector<float> buf;
  for (const auto& je : header.at("entries")) {
    GridEntry e;
    e.name = je.at("name").get<std::string>();
    e.components = je.at("components").get<int>();
    const auto count = je.at("count").get<std::size_t>();
    if (count != file.spec.cell_count() * static_cast<std::size_t>(e.components))
      throw std::runtime_error(path + ": entry '" + e.name + "' count mismatch");
    buf.resize(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error(path + ": truncated payload");
    e.values.assign(buf.begin(), buf.end());
    file.entries.push_back(std::move(e));
  }
  return file;
}

void write_grid(const std::string& path, const ScalarGrid3& grid) {
  GridFile f;
  f.spec = grid.spec();
  f.entries.push_back({"grid", 1, {grid.values().begin(), grid.values().end()}});
  write_grid_file(path, f);
}

void write_grid(const std::string& path, const VectorGrid3& grid) {
  GridFile f;
  f.spec = grid.spec();
  f.entries.push_back({"grid", 3, {grid.values().begin(), grid.values().end()}});
  write_grid_file(path, f);
}

ScalarGrid3 read_scalar_grid(const std::string& path) {
  GridFile f = read_grid_file(path);
  if (f.entries.size() != 1 || f.entries[0].components != 1)
    throw std::runtime_error(path + ": expected a single scalar grid");
  ScalarGrid3 g(f.spec);
  std::copy(f.entries[0].values.begin(), f.entries[0].values.end(), g.values().begin());
  return g;
}

VectorGrid3 read_vector_grid(const std::string& path) {
  GridFile f = read_grid_file(path);
  if (f.entries.size() != 1 || f.entries[0].components != 3)
    throw std::runtime_error(path + ": expected a single vector grid");
  VectorGrid3 g(f.spec);
  std::copy(f.entries[0].values.begin(), f.entries[0].values.end(), g.values().begin());
  return g;
}

}  // namespace occflow
