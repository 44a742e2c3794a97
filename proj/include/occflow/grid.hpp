#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "occflow/autodiff.hpp"
#include "occflow/geometry.hpp"

namespace occflow {

/// Position or vector whose components are either double or ad::Var.
template <class S>
using V3 = std::array<S, 3>;

inline V3<double> to_v3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
inline Vec3 to_vec3(const V3<double>& v) { return {v[0], v[1], v[2]}; }

template <class A, class B>
auto operator+(const V3<A>& a, const V3<B>& b) {
  using R = std::conditional_t<std::is_same_v<A, ad::Var> || std::is_same_v<B, ad::Var>,
                               ad::Var, double>;
  return V3<R>{R(a[0] + b[0]), R(a[1] + b[1]), R(a[2] + b[2])};
}

/// Eight-corner trilinear footprint of a query point, with the derivative of
/// each weight with respect to the query position. Axes where the query was
/// clamped to the boundary have zero derivative.
struct Stencil {
  std::array<std::uint32_t, 8> cell{};
  std::array<double, 8> w{};
  std::array<std::array<double, 3>, 8> dw{};
};

Stencil make_stencil(const GridSpec& spec, const V3<double>& x);

class ScalarGrid3 {
 public:
  ScalarGrid3() = default;
  explicit ScalarGrid3(const GridSpec& spec, double fill = 0.0)
      : spec_(spec), values_(spec.cell_count(), fill) {}

  const GridSpec& spec() const { return spec_; }
  std::size_t size() const { return values_.size(); }

  double& at(int i, int j, int k) { return values_[spec_.index(i, j, k)]; }
  double at(int i, int j, int k) const { return values_[spec_.index(i, j, k)]; }
  double& operator[](std::size_t idx) { return values_[idx]; }
  double operator[](std::size_t idx) const { return values_[idx]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double sample(const Vec3& x) const;

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

/// Grid of 3-vectors stored interleaved (3 doubles per cell).
class VectorGrid3 {
 public:
  VectorGrid3() = default;
  explicit VectorGrid3(const GridSpec& spec, const Vec3& fill = Vec3::Zero());

  const GridSpec& spec() const { return spec_; }
  std::size_t cells() const { return values_.size() / 3; }

  Vec3 at(std::size_t idx) const {
    return {values_[3 * idx], values_[3 * idx + 1], values_[3 * idx + 2]};
  }
  void set(std::size_t idx, const Vec3& v) {
    values_[3 * idx] = v.x();
    values_[3 * idx + 1] = v.y();
    values_[3 * idx + 2] = v.z();
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  Vec3 sample(const Vec3& x) const;

 private:
  GridSpec spec_;
  std::vector<double> values_;
};

/// Trilinear interpolation of cell-center values; queries outside the volume
/// are clamped to the boundary cells.
double sample_trilinear(const ScalarGrid3& grid, const Vec3& x);

// --- generic sampling -------------------------------------------------------
//
// S is the result scalar (double or ad::Var), P the position scalar. With
// S = ad::Var the result node links to the grid cells as parameters
// `offset + cell` (offset < 0 marks a gradient-stopped grid) and to the
// position components when P = ad::Var.

template <class S, class P>
S sample(ad::Tape* tape, const ScalarGrid3& g, std::int64_t offset, const V3<P>& x) {
  if constexpr (std::is_same_v<S, double>) {
    static_assert(std::is_same_v<P, double>);
    const Stencil st = make_stencil(g.spec(), x);
    double v = 0.0;
    for (int c = 0; c < 8; ++c) v += st.w[c] * g[st.cell[c]];
    return v;
  } else {
    V3<double> xv{ad::value(x[0]), ad::value(x[1]), ad::value(x[2])};
    const Stencil st = make_stencil(g.spec(), xv);
    double v = 0.0;
    double dx[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < 8; ++c) {
      const double gv = g[st.cell[c]];
      v += st.w[c] * gv;
      dx[0] += st.dw[c][0] * gv;
      dx[1] += st.dw[c][1] * gv;
      dx[2] += st.dw[c][2] * gv;
    }
    if (tape == nullptr) return ad::Var(v);
    if (offset >= 0)
      for (int c = 0; c < 8; ++c)
        if (st.w[c] != 0.0)
          tape->param_edge(static_cast<std::uint32_t>(offset + st.cell[c]), st.w[c]);
    if constexpr (std::is_same_v<P, ad::Var>)
      for (int d = 0; d < 3; ++d) tape->edge(x[d], dx[d]);
    return tape->finish(v);
  }
}

template <class S, class P>
V3<S> sample(ad::Tape* tape, const VectorGrid3& g, std::int64_t offset, const V3<P>& x) {
  V3<double> xv{ad::value(x[0]), ad::value(x[1]), ad::value(x[2])};
  const Stencil st = make_stencil(g.spec(), xv);
  const auto vals = g.values();
  V3<S> out{};
  for (int comp = 0; comp < 3; ++comp) {
    double v = 0.0;
    double dx[3] = {0.0, 0.0, 0.0};
    for (int c = 0; c < 8; ++c) {
      const double gv = vals[3 * st.cell[c] + comp];
      v += st.w[c] * gv;
      if constexpr (!std::is_same_v<S, double>) {
        dx[0] += st.dw[c][0] * gv;
        dx[1] += st.dw[c][1] * gv;
        dx[2] += st.dw[c][2] * gv;
      }
    }
    if constexpr (std::is_same_v<S, double>) {
      out[comp] = v;
    } else {
      if (tape == nullptr) {
        out[comp] = ad::Var(v);
        continue;
      }
      if (offset >= 0)
        for (int c = 0; c < 8; ++c)
          if (st.w[c] != 0.0)
            tape->param_edge(static_cast<std::uint32_t>(offset + 3 * st.cell[c] + comp),
                             st.w[c]);
      if constexpr (std::is_same_v<P, ad::Var>)
        for (int d = 0; d < 3; ++d) tape->edge(x[d], dx[d]);
      out[comp] = tape->finish(v);
    }
  }
  return out;
}

// --- snapshot files ---------------------------------------------------------

/// One named grid inside a `.grid` container.
struct GridEntry {
  std::string name;
  int components = 1;  // 1 = scalar grid, 3 = vector grid
  std::vector<double> values;
};

/// `.grid` container: 8-byte magic "OCCFGRID", little-endian u64 header
/// length, JSON header, then the float32 little-endian payload of every
/// entry in header order.
struct GridFile {
  GridSpec spec;
  std::vector<GridEntry> entries;
  // Free-form metadata (e.g. a, iteration) carried in the header.
  std::string meta_json = "{}";
};

void write_grid_file(const std::string& path, const GridFile& file);
GridFile read_grid_file(const std::string& path);

void write_grid(const std::string& path, const ScalarGrid3& grid);
void write_grid(const std::string& path, const VectorGrid3& grid);
ScalarGrid3 read_scalar_grid(const std::string& path);
VectorGrid3 read_vector_grid(const std::string& path);

}  // namespace occflow
