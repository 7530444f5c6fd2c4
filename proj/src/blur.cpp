#include "misc/blur.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "misc/errors.hpp"
#include "misc/rng.hpp"

namespace misc::blur {

void BlurSpec::validate(double max_length) const {
  if (!(noise_sigma >= 0) || !std::isfinite(noise_sigma)) throw ConfigError("noise sigma must be finite and >= 0");
  const auto check = [max_length](const LinearMotion& m) {
    if (!(m.length >= 1) || m.length > max_length || !std::isfinite(m.angle)) {
      throw ConfigError("blur length must be in [1, " + std::to_string(max_length) + "], got " +
                        std::to_string(m.length));
    }
  };
  if (kind == Kind::None) return;
  if (variant()) {
    if (grid_rows < 1 || grid_cols < 1 || regions.size() != static_cast<std::size_t>(grid_rows) * grid_cols) {
      throw ConfigError("variant blur needs grid_rows * grid_cols region motions");
    }
    for (const auto& m : regions) check(m);
  } else {
    check(motion);
  }
}

namespace {

struct Pt {
  double x, y;
};

// Keeps the part of `poly` with s * (coord - bound) <= 0 on the given axis.
std::vector<Pt> clip(const std::vector<Pt>& poly, bool axis_x, double bound, double s) {
  std::vector<Pt> out;
  const auto inside = [&](const Pt& p) { return s * ((axis_x ? p.x : p.y) - bound) <= 0; };
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Pt& a = poly[i];
    const Pt& b = poly[(i + 1) % poly.size()];
    const bool ia = inside(a), ib = inside(b);
    if (ia) out.push_back(a);
    if (ia != ib) {
      const double ca = axis_x ? a.x : a.y, cb = axis_x ? b.x : b.y;
      const double t = (bound - ca) / (cb - ca);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

double area(const std::vector<Pt>& poly) {
  double a = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Pt& p = poly[i];
    const Pt& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) / 2;
}

}  // namespace

Tensor64 motion_kernel(double length, double angle, double max_length) {
  if (!(length >= 1) || length > max_length) {
    throw ConfigError("motion_kernel: length must be in [1, " + std::to_string(max_length) + "], got " +
                      std::to_string(length));
  }
  const double c = std::cos(angle), s = std::sin(angle);
  const double extent = length * std::max(std::abs(c), std::abs(s));
  int size = static_cast<int>(std::ceil(extent - 1e-9));
  if (size % 2 == 0) ++size;
  size = std::max(size, 1);
  const double half = size / 2.0;

  // Width-1 rectangle along (c, s), centered at the origin; y grows downward,
  // so a positive angle tilts toward smaller row indices.
  const double hl = length / 2, hw = 0.5;
  const Pt u{c, -s}, v{s, c};
  const std::vector<Pt> rect = {
      {-hl * u.x - hw * v.x, -hl * u.y - hw * v.y},
      {hl * u.x - hw * v.x, hl * u.y - hw * v.y},
      {hl * u.x + hw * v.x, hl * u.y + hw * v.y},
      {-hl * u.x + hw * v.x, -hl * u.y + hw * v.y},
  };

  Tensor64 k({size, size});
  double total = 0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double x0 = j - half, y0 = i - half;
      auto poly = clip(rect, true, x0, -1);
      if (!poly.empty()) poly = clip(poly, true, x0 + 1, 1);
      if (!poly.empty()) poly = clip(poly, false, y0, -1);
      if (!poly.empty()) poly = clip(poly, false, y0 + 1, 1);
      const double a = poly.size() >= 3 ? area(poly) : 0.0;
      k[static_cast<std::size_t>(i) * size + j] = a;
      total += a;
    }
  }
  for (auto& v : k.data()) v /= total;
  return k;
}

Tensor convolve(const Tensor& image, const Tensor64& kernel) {
  if (kernel.ndim() != 2 || kernel.dim(0) != kernel.dim(1) || kernel.dim(0) % 2 == 0) {
    throw ConfigError("convolve: kernel must be square and odd, got " + shape_str(kernel.shape()));
  }
  const int C = image.channels(), H = image.height(), W = image.width();
  const int n = kernel.dim(0), r = n / 2;
  Tensor out(image.shape());
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int c = 0; c < C; ++c) {
      for (int x = 0; x < W; ++x) {
        double acc = 0;
        for (int i = 0; i < n; ++i) {
          const int yy = std::clamp(y - (i - r), 0, H - 1);
          for (int j = 0; j < n; ++j) {
            const double kv = kernel[static_cast<std::size_t>(i) * n + j];
            if (kv == 0) continue;
            acc += kv * image(c, yy, std::clamp(x - (j - r), 0, W - 1));
          }
        }
        out(c, y, x) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor apply_blur(const Tensor& sharp, const BlurSpec& spec, std::uint64_t seed, bool clamp_output) {
  spec.validate(std::numeric_limits<double>::infinity());
  const int H = sharp.height(), W = sharp.width();
  Tensor out;
  if (spec.kind == Kind::None) {
    out = sharp;
  } else if (!spec.variant()) {
    out = convolve(sharp, motion_kernel(spec.motion.length, spec.motion.angle,
                                        std::numeric_limits<double>::infinity()));
  } else {
    const int R = spec.grid_rows, Q = spec.grid_cols;
    std::vector<Tensor> blurred;
    for (const auto& m : spec.regions) {
      blurred.push_back(convolve(sharp, motion_kernel(m.length, m.angle, std::numeric_limits<double>::infinity())));
    }
    // Region centers sit at ((q + 0.5) W / Q, (r + 0.5) H / R) in pixel-center
    // coordinates; weights clamp beyond the outermost centers.
    const auto axis = [](double pos, int count, double extent, int& lo, double& frac) {
      const double g = std::clamp((pos + 0.5) * count / extent - 0.5, 0.0, count - 1.0);
      lo = std::min(static_cast<int>(g), count - 1);
      frac = g - lo;
    };
    out = Tensor(sharp.shape());
    for (int y = 0; y < H; ++y) {
      int r0;
      double fy;
      axis(y, R, H, r0, fy);
      const int r1 = std::min(r0 + 1, R - 1);
      for (int x = 0; x < W; ++x) {
        int q0;
        double fx;
        axis(x, Q, W, q0, fx);
        const int q1 = std::min(q0 + 1, Q - 1);
        const std::array<std::pair<int, double>, 4> mix = {{
            {r0 * Q + q0, (1 - fy) * (1 - fx)},
            {r0 * Q + q1, (1 - fy) * fx},
            {r1 * Q + q0, fy * (1 - fx)},
            {r1 * Q + q1, fy * fx},
        }};
        for (int c = 0; c < sharp.channels(); ++c) {
          double acc = 0;
          for (const auto& [idx, wgt] : mix) acc += wgt * blurred[static_cast<std::size_t>(idx)](c, y, x);
          out(c, y, x) = static_cast<float>(acc);
        }
      }
    }
  }
  if (spec.noise_sigma > 0) {
    auto rng = make_rng(seed, "noise");
    for (auto& v : out.data()) v = static_cast<float>(v + spec.noise_sigma * normal(rng));
  }
  if (clamp_output) {
    for (auto& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

Tensor procedural_image(int height, int width, std::uint64_t seed) {
  auto rng = make_rng(seed, "procedural");
  Tensor img({3, height, width});
  const auto color = [&rng] {
    return std::array<double, 3>{uniform01(rng), uniform01(rng), uniform01(rng)};
  };

  // Background: linear gradient between two colors.
  const auto c0 = color(), c1 = color();
  const double ga = uniform(rng, 0, 2 * std::numbers::pi);
  const double gx = std::cos(ga), gy = std::sin(ga);
  const double span = std::abs(gx) * width + std::abs(gy) * height + 1;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + (gx * (x - width / 2.0) + gy * (y - height / 2.0)) / span, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img(c, y, x) = static_cast<float>(c0[c] + t * (c1[c] - c0[c]));
    }
  }

  const int shapes = uniform_int(rng, 6, 14);
  for (int s = 0; s < shapes; ++s) {
    const int kind = uniform_int(rng, 0, 4);
    const auto col = color();
    const auto col2 = color();
    const double cx = uniform(rng, 0, width), cy = uniform(rng, 0, height);
    const double size = uniform(rng, 0.08, 0.35) * std::min(width, height);
    const double rot = uniform(rng, 0, std::numbers::pi);
    const double period = uniform(rng, 2.5, 8.0);
    const double cr = std::cos(rot), sr = std::sin(rot);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = cr * dx + sr * dy, v = -sr * dx + cr * dy;
        bool in = false;
        bool alt = false;
        switch (kind) {
          case 0: in = dx * dx + dy * dy <= size * size; break;                          // disk
          case 1: in = std::abs(u) <= size && std::abs(v) <= 0.6 * size; break;          // rectangle
          case 2: in = v >= -0.5 * size && std::abs(u) <= (0.5 * size - v) * 0.8; break;  // triangle
          case 3:                                                                         // striped box
            in = std::abs(u) <= size && std::abs(v) <= size;
            alt = static_cast<long>(std::floor(u / period)) % 2 != 0;
            break;
          default:  // checker box
            in = std::abs(u) <= size && std::abs(v) <= size;
            alt = (static_cast<long>(std::floor(u / period)) + static_cast<long>(std::floor(v / period))) % 2 != 0;
            break;
        }
        if (!in) continue;
        const auto& cc = alt ? col2 : col;
        for (int c = 0; c < 3; ++c) img(c, y, x) = static_cast<float>(cc[c]);
      }
    }
  }
  return img;
}

}  // namespace misc::blur
