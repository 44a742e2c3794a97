#include "occflow/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace occflow {

RaySamples sample_ray(const Vec3& origin, const Vec3& dir, const GridSpec& spec, int M) {
  if (M < 2) throw std::invalid_argument("sample_ray: M must be >= 2");
  RaySamples s;
  const auto span = intersect_volume(spec, origin, dir);
  if (!span || !(span->second > span->first)) return s;
  const double t0 = span->first, t1 = span->second;
  s.spacing = (t1 - t0) / (M - 1);
  s.depths.resize(M);
  s.points.resize(M);
  for (int m = 0; m < M; ++m) {
    s.depths[m] = m + 1 == M ? t1 : t0 + s.spacing * m;
    s.points[m] = origin + s.depths[m] * dir;
  }
  return s;
}

namespace {

unsigned char to_byte(double v) {
  if (!std::isfinite(v)) return 0;
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_pgm(const std::string& path, int width, int height, const std::vector<double>& values,
               double lo, double hi) {
  if (values.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << width << " " << height << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (double v : values) out.put(static_cast<char>(to_byte((v - lo) / span)));
}

void write_ppm(const std::string& path, int width, int height, const std::vector<double>& rgb) {
  if (rgb.size() != 3u * width * height) throw std::invalid_argument("write_ppm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  for (double v : rgb) out.put(static_cast<char>(to_byte(v)));
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  auto token = [&]() {
    std::string t;
    while (in >> t) {
      if (t[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return t;
    }
    throw std::runtime_error(path + ": truncated PGM header");
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P2") throw std::runtime_error(path + ": not a PGM file");
  GrayImage img;
  img.width = std::stoi(token());
  img.height = std::stoi(token());
  const int maxval = std::stoi(token());
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255)
    throw std::runtime_error(path + ": unsupported PGM geometry");
  img.values.resize(static_cast<std::size_t>(img.width) * img.height);
  if (magic == "P5") {
    in.get();  // single whitespace after maxval
    for (auto& v : img.values) {
      const int c = in.get();
      if (c == EOF) throw std::runtime_error(path + ": truncated PGM payload");
      v = static_cast<double>(c) / maxval;
    }
  } else {
    for (auto& v : img.values) v = std::stod(token()) / maxval;
  }
  return img;
}

}  // namespace occflow
