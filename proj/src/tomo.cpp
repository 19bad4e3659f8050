#include "streakfix/tomo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "streakfix/errors.hpp"

namespace streakfix {

namespace {

struct Ellipsoid {
  double cx, cy;    // centre, normalized to the half-side
  double a, b;      // in-plane semi-axes
  double phi;       // in-plane rotation
  double z0, c;     // depth centre and semi-axis
  double intensity;
};

std::vector<Ellipsoid> sample_ellipsoids(const PhantomSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const double lo = spec.intensity_lo, hi = spec.intensity_hi;
  std::vector<Ellipsoid> out;
  for (int k = 0; k < spec.num_ellipses; ++k) {
    Ellipsoid e{};
    if (k == 0) {
      e.cx = uniform(-0.05, 0.05);
      e.cy = uniform(-0.05, 0.05);
      e.a = uniform(0.55, 0.78);
      e.b = uniform(0.45, 0.7);
      e.phi = uniform(0.0, std::numbers::pi);
      e.z0 = 0.0;
      e.c = 2.0;
      e.intensity = uniform(lo, lo + 0.4 * (hi - lo));
    } else if (k == 1) {
      const double r = uniform(0.0, 0.2), t = uniform(0.0, 2 * std::numbers::pi);
      e.cx = out[0].cx + r * std::cos(t);
      e.cy = out[0].cy + r * std::sin(t);
      e.a = uniform(0.12, 0.25);
      e.b = uniform(0.1, 0.22);
      e.phi = uniform(0.0, std::numbers::pi);
      e.z0 = uniform(-0.3, 0.3);
      e.c = uniform(1.2, 1.8);
      e.intensity = std::max(0.0, uniform(0.85, 1.0) * hi - out[0].intensity);
    } else {
      const double r = uniform(0.0, 0.45), t = uniform(0.0, 2 * std::numbers::pi);
      e.cx = out[0].cx + r * std::cos(t);
      e.cy = out[0].cy + r * std::sin(t);
      e.a = uniform(0.03, 0.12);
      e.b = uniform(0.03, 0.12);
      e.phi = uniform(0.0, std::numbers::pi);
      e.z0 = uniform(-0.6, 0.6);
      e.c = uniform(0.5, 1.5);
      const double sign = uniform(0.0, 1.0) < 0.3 ? -1.0 : 1.0;
      e.intensity = sign * 0.3 * uniform(lo, hi);
    }
    out.push_back(e);
  }
  return out;
}

/// In-plane semi-axis scale of ellipsoid `e` cut at depth z (0 when missed).
double cross_section_scale(const Ellipsoid& e, double z) {
  const double t = (z - e.z0) / e.c;
  return t * t >= 1.0 ? 0.0 : std::sqrt(1.0 - t * t);
}

bool inside(const Ellipsoid& e, double scale, double u, double v) {
  const double du = u - e.cx, dv = v - e.cy;
  const double cs = std::cos(e.phi), sn = std::sin(e.phi);
  const double p = (du * cs + dv * sn) / (e.a * scale);
  const double q = (-du * sn + dv * cs) / (e.b * scale);
  return p * p + q * q <= 1.0;
}

double sample_bilinear(const Eigen::Ref<const Image>& img, double row, double col) {
  const double r0 = std::floor(row), c0 = std::floor(col);
  const double fr = row - r0, fc = col - c0;
  const long ir = static_cast<long>(r0), ic = static_cast<long>(c0);
  auto at = [&img](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= img.rows() || c >= img.cols()) return 0.0;
    return img(r, c);
  };
  return (1 - fr) * ((1 - fc) * at(ir, ic) + fc * at(ir, ic + 1)) +
         fr * ((1 - fc) * at(ir + 1, ic) + fc * at(ir + 1, ic + 1));
}

}  // namespace

void PhantomSpec::validate() const {
  if (size <= 0) throw ConfigError("phantom: size must be positive");
  if (num_ellipses < 0) throw ConfigError("phantom: num_ellipses must be non-negative");
  if (!(intensity_lo >= 0.0 && intensity_hi <= 1.0 && intensity_lo <= intensity_hi)) {
    throw ConfigError("phantom: intensity range must satisfy 0 <= lo <= hi <= 1");
  }
}

Phantom make_phantom_slice(const PhantomSpec& spec, double z) {
  spec.validate();
  const auto ellipsoids = sample_ellipsoids(spec);
  const int n = spec.size;
  const double half = 0.5 * n, centre = 0.5 * (n - 1);
  Phantom out;
  out.image = Image::Zero(n, n);
  int bone_r0 = n, bone_r1 = -1, bone_c0 = n, bone_c1 = -1;
  constexpr double kSub[2] = {-0.25, 0.25};

  for (std::size_t k = 0; k < ellipsoids.size(); ++k) {
    const Ellipsoid& e = ellipsoids[k];
    const double scale = cross_section_scale(e, z);
    if (scale <= 0.0) continue;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        int hits = 0;
        for (double dr : kSub)
          for (double dc : kSub)
            hits += inside(e, scale, (c + dc - centre) / half, (centre - r - dr) / half);
        if (hits == 0) continue;
        out.image(r, c) += static_cast<float>(e.intensity * hits / 4.0);
        if (k == 1 && hits == 4) {
          bone_r0 = std::min(bone_r0, r);
          bone_r1 = std::max(bone_r1, r);
          bone_c0 = std::min(bone_c0, c);
          bone_c1 = std::max(bone_c1, c);
        }
      }
    }
  }
  out.image = out.image.cwiseMax(0.0f).cwiseMin(1.0f);
  if (bone_r1 >= bone_r0) out.bone = {bone_r0, bone_c0, bone_r1 - bone_r0 + 1, bone_c1 - bone_c0 + 1};
  return out;
}

void Geometry::validate() const {
  if (num_views < 1) throw ConfigError("geometry: num_views must be >= 1");
  if (num_detector_bins < 1) throw ConfigError("geometry: num_detector_bins must be >= 1");
  if (!(angular_range > 0.0) || !(detector_spacing > 0.0)) {
    throw ConfigError("geometry: angular range and detector spacing must be positive");
  }
}

Sinogram forward_project(const Eigen::Ref<const Image>& image, const Geometry& geometry) {
  geometry.validate();
  if (image.rows() != image.cols() || image.rows() == 0) {
    throw InputError("forward_project: image must be square and non-empty");
  }
  if (!image.allFinite()) throw InputError("forward_project: image contains non-finite values");

  const double centre = 0.5 * (image.rows() - 1);
  const double reach = 0.5 * image.rows() * std::numbers::sqrt2 + 1.0;
  constexpr double kStep = 0.5;
  const int samples = static_cast<int>(std::ceil(2 * reach / kStep));

  Sinogram sino{Eigen::MatrixXd::Zero(geometry.num_views, geometry.num_detector_bins), geometry};
  for (int v = 0; v < geometry.num_views; ++v) {
    const double theta = geometry.angle(v);
    const double cs = std::cos(theta), sn = std::sin(theta);
    for (int b = 0; b < geometry.num_detector_bins; ++b) {
      const double s = geometry.bin_offset(b);
      double sum = 0.0;
      for (int i = 0; i <= samples; ++i) {
        const double t = -reach + i * kStep;
        const double x = s * cs - t * sn;
        const double y = s * sn + t * cs;
        sum += sample_bilinear(image, centre - y, x + centre);
      }
      sino.data(v, b) = sum * kStep;
    }
  }
  return sino;
}

FilterKind filter_from_string(const std::string& name) {
  if (name == "ram-lak") return FilterKind::kRamLak;
  if (name == "shepp-logan") return FilterKind::kSheppLogan;
  throw ConfigError("unknown filter '" + name + "' (expected ram-lak or shepp-logan)");
}

std::string to_string(FilterKind kind) {
  return kind == FilterKind::kRamLak ? "ram-lak" : "shepp-logan";
}

Image filtered_backprojection(const Sinogram& sino, FilterKind filter, int side) {
  const Geometry& g = sino.geometry;
  g.validate();
  if (g.num_detector_bins < 2) {
    throw ConfigError("filtered_backprojection: need at least 2 detector bins");
  }
  if (sino.data.rows() != g.num_views || sino.data.cols() != g.num_detector_bins) {
    throw InputError("filtered_backprojection: sinogram shape does not match its geometry");
  }
  if (side <= 0) side = g.num_detector_bins;

  // Spatial-domain band-limited ramp kernels.
  const int bins = g.num_detector_bins;
  const double tau = g.detector_spacing;
  constexpr double pi = std::numbers::pi;
  Eigen::VectorXd kernel(2 * bins - 1);
  for (int k = -(bins - 1); k <= bins - 1; ++k) {
    double h;
    if (filter == FilterKind::kRamLak) {
      h = k == 0 ? 1.0 / (4 * tau * tau) : (k % 2 == 0 ? 0.0 : -1.0 / (pi * pi * k * k * tau * tau));
    } else {
      h = -2.0 / (pi * pi * tau * tau * (4.0 * k * k - 1.0));
    }
    kernel[k + bins - 1] = h;
  }

  Eigen::MatrixXd filtered(g.num_views, bins);
  for (int v = 0; v < g.num_views; ++v)
    for (int b = 0; b < bins; ++b)
      filtered(v, b) = tau * sino.data.row(v).dot(kernel.segment(bins - 1 - b, bins));

  Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(side, side);
  const double centre = 0.5 * (side - 1);
  const double bin_centre = 0.5 * (bins - 1);
  for (int v = 0; v < g.num_views; ++v) {
    const double theta = g.angle(v);
    const double cs = std::cos(theta), sn = std::sin(theta);
    for (int r = 0; r < side; ++r) {
      const double y = centre - r;
      for (int c = 0; c < side; ++c) {
        const double s = (c - centre) * cs + y * sn;
        const double pos = s / tau + bin_centre;
        const double p0 = std::floor(pos);
        const long i0 = static_cast<long>(p0);
        const double f = pos - p0;
        double val = 0.0;
        if (i0 >= 0 && i0 < bins) val += (1 - f) * filtered(v, i0);
        if (i0 + 1 >= 0 && i0 + 1 < bins) val += f * filtered(v, i0 + 1);
        recon(r, c) += val;
      }
    }
  }
  recon *= pi / g.num_views;
  return recon.cwiseMax(0.0).cwiseMin(1.0).cast<float>();
}

PairedSample make_pair(const Image& phantom, int sparse_views, int dense_views, FilterKind filter) {
  if (sparse_views < 1) throw ConfigError("make_pair: sparse_views must be >= 1");
  if (sparse_views >= dense_views) {
    throw ConfigError("make_pair: sparse_views (" + std::to_string(sparse_views) +
                      ") must be fewer than dense_views (" + std::to_string(dense_views) + ")");
  }
  if (phantom.rows() != phantom.cols() || phantom.rows() == 0) {
    throw InputError("make_pair: phantom must be square and non-empty");
  }
  const int side = static_cast<int>(phantom.rows());
  PairedSample pair;
  pair.sparse = filtered_backprojection(
      forward_project(phantom, Geometry::for_image(side, sparse_views)), filter, side);
  pair.dense = filtered_backprojection(
      forward_project(phantom, Geometry::for_image(side, dense_views)), filter, side);
  return pair;
}

std::vector<PatchPair> crop_patches(const PairedSample& pair, int patch_size, int count,
                                    std::uint64_t seed) {
  if (pair.sparse.rows() != pair.dense.rows() || pair.sparse.cols() != pair.dense.cols()) {
    throw InputError("crop_patches: sparse and dense images differ in shape");
  }
  if (patch_size <= 0 || patch_size % 8 != 0) {
    throw ConfigError("crop_patches: patch_size " + std::to_string(patch_size) +
                      " must be a positive multiple of 8 (the discriminator pyramid has stride 8)");
  }
  const int rows = static_cast<int>(pair.dense.rows()), cols = static_cast<int>(pair.dense.cols());
  if (patch_size > rows || patch_size > cols) {
    throw ConfigError("crop_patches: patch_size " + std::to_string(patch_size) +
                      " exceeds image size " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (count < 0) throw ConfigError("crop_patches: count must be non-negative");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> row_dist(0, rows - patch_size), col_dist(0, cols - patch_size);
  std::vector<PatchPair> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int r = row_dist(rng), c = col_dist(rng);
    PatchPair p;
    p.window = {r, c, patch_size, patch_size};
    p.pair.sparse = pair.sparse.block(r, c, patch_size, patch_size);
    p.pair.dense = pair.dense.block(r, c, patch_size, patch_size);
    p.pair.phantom_id = pair.phantom_id;
    p.pair.slice_id = pair.slice_id;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace streakfix
