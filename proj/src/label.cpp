#include "occflow/label.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include "occflow/render.hpp"

namespace occflow {

MaskSet masks_from_oracle(const std::vector<RayBatch>& batches, double confidence) {
  MaskSet set;
  for (const auto& b : batches) {
    if (b.kind != RayKind::Camera) continue;
    std::map<int, std::size_t> by_object;
    for (const auto& r : b.rays) {
      if (!r.hit() || !r.gt_dynamic) continue;
      auto [it, fresh] = by_object.try_emplace(r.gt_object, set.masks.size());
      if (fresh) {
        Mask m;
        m.frame = b.frame;
        m.camera = b.camera;
        m.instance = r.gt_object;
        m.confidence = confidence;
        m.width = b.width;
        m.height = b.height;
        m.pixels.assign(static_cast<std::size_t>(b.width) * b.height, 0);
        set.masks.push_back(std::move(m));
      }
      set.masks[it->second].pixels[static_cast<std::size_t>(r.pixel_v) * b.width + r.pixel_u] = 1;
    }
  }
  return set;
}

Mask read_mask_pgm(const std::string& path, int frame, int camera, int instance,
                   double confidence) {
  const GrayImage img = read_pgm(path);
  Mask m;
  m.frame = frame;
  m.camera = camera;
  m.instance = instance;
  m.confidence = confidence;
  m.width = img.width;
  m.height = img.height;
  m.pixels.resize(img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i) m.pixels[i] = img.values[i] > 0.5 ? 1 : 0;
  return m;
}

VoxelClusterLabels connected_components_3d(const GridSpec& spec,
                                           const std::vector<std::uint8_t>& occupied) {
  if (occupied.size() != spec.cell_count())
    throw std::invalid_argument("connected_components_3d: occupancy size mismatch");
  VoxelClusterLabels out;
  out.spec = spec;
  out.labels.assign(occupied.size(), 0);
  const auto& d = spec.dims;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < occupied.size(); ++seed) {
    if (!occupied[seed] || out.labels[seed] != 0) continue;
    const int label = out.count() + 1;
    std::size_t size = 0;
    out.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t idx = stack.back();
      stack.pop_back();
      ++size;
      const auto [i, j, k] = spec.unravel(idx);
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          for (int dk = -1; dk <= 1; ++dk) {
            const int ni = i + di, nj = j + dj, nk = k + dk;
            if (ni < 0 || nj < 0 || nk < 0 || ni >= d[0] || nj >= d[1] || nk >= d[2]) continue;
            const std::size_t n = spec.index(ni, nj, nk);
            if (!occupied[n] || out.labels[n] != 0) continue;
            out.labels[n] = label;
            stack.push_back(n);
          }
    }
    out.sizes.push_back(size);
  }
  return out;
}

LabelStats classify_rays(std::vector<RayBatch>& batches, const MaskSet& masks,
                         const std::vector<PinholeCamera>& cameras, const GridSpec& spec,
                         const LabelThresholds& thr) {
  std::map<std::pair<int, int>, std::vector<const Mask*>> by_view;
  for (const auto& m : masks.masks) by_view[{m.frame, m.camera}].push_back(&m);

  // Candidate dynamic rays grouped by the mask they fell into.
  std::map<const Mask*, std::vector<Ray*>> candidates;
  std::map<Ray*, bool> retained;
  LabelStats stats;

  for (auto& b : batches) {
    if (b.kind != RayKind::Lidar) continue;
    for (auto& r : b.rays) {
      if (!r.hit()) {
        r.label = RayLabel::Discard;
        continue;
      }
      const Vec3 p = r.endpoint();
      bool seen = false;
      double max_conf = 0.0;
      std::vector<const Mask*> hits;
      for (std::size_t c = 0; c < cameras.size(); ++c) {
        const auto proj = cameras[c].project(p);
        if (!proj || !cameras[c].in_image(proj->x(), proj->y())) continue;
        seen = true;
        const int u = static_cast<int>(std::floor(proj->x()));
        const int v = static_cast<int>(std::floor(proj->y()));
        const auto it = by_view.find({b.frame, static_cast<int>(c)});
        if (it == by_view.end()) continue;
        for (const Mask* m : it->second) {
          if (!m->covers(u, v)) continue;
          max_conf = std::max(max_conf, m->confidence);
          if (m->confidence >= thr.dynamic_confidence) hits.push_back(m);
        }
      }
      if (!seen) {
        r.label = RayLabel::Discard;
      } else if (!hits.empty()) {
        r.label = RayLabel::Dynamic;
        retained[&r] = false;
        for (const Mask* m : hits) candidates[m].push_back(&r);
      } else if (max_conf >= thr.static_confidence) {
        r.label = RayLabel::Discard;
      } else {
        r.label = RayLabel::Static;
      }
    }
  }

  std::vector<std::uint8_t> occupied(spec.cell_count(), 0);
  for (auto& [mask, rays] : candidates) {
    std::fill(occupied.begin(), occupied.end(), 0);
    std::vector<std::ptrdiff_t> voxel(rays.size(), -1);
    for (std::size_t i = 0; i < rays.size(); ++i)
      if (const auto v = spec.voxel_of(rays[i]->endpoint())) {
        voxel[i] = static_cast<std::ptrdiff_t>(spec.index((*v)[0], (*v)[1], (*v)[2]));
        occupied[voxel[i]] = 1;
      }
    const auto cc = connected_components_3d(spec, occupied);
    int best = 0;
    for (int l = 1; l <= cc.count(); ++l)
      if (best == 0 || cc.sizes[l - 1] > cc.sizes[best - 1]) best = l;
    for (std::size_t i = 0; i < rays.size(); ++i)
      if (voxel[i] >= 0 && cc.labels[voxel[i]] == best) retained[rays[i]] = true;
  }
  for (auto& [ray, keep] : retained)
    if (!keep) {
      ray->label = RayLabel::Static;
      ++stats.demoted;
    }

  for (const auto& b : batches) {
    if (b.kind != RayKind::Lidar) continue;
    for (const auto& r : b.rays) {
      if (r.label == RayLabel::Static) ++stats.static_rays;
      else if (r.label == RayLabel::Dynamic) ++stats.dynamic_rays;
      else ++stats.discarded;
    }
  }
  return stats;
}

}  // namespace occflow
