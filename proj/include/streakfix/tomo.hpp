#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "streakfix/image.hpp"

namespace streakfix {

/// Random ellipse phantom parameters. The first ellipse is a large soft-tissue
/// body, the second a high-intensity "bone", the rest small inserts.
struct PhantomSpec {
  int num_ellipses = 6;
  double intensity_lo = 0.1;
  double intensity_hi = 0.9;
  int size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Axis-aligned bounding box, in pixels.
struct Window {
  int row = 0, col = 0, height = 0, width = 0;
  friend bool operator==(const Window&, const Window&) = default;
};

struct Phantom {
  Image image;
  /// Bounding box of the bone-like ellipse (empty when num_ellipses < 2).
  Window bone;
};

/// Renders the phantom slice at normalized depth `z` ∈ [-1, 1]; z = 0 is the
/// central slice. Each ellipse is the cross-section of an ellipsoid, so
/// neighbouring slices of one phantom are anatomically consistent.
Phantom make_phantom_slice(const PhantomSpec& spec, double z);
inline Image make_phantom(const PhantomSpec& spec) { return make_phantom_slice(spec, 0.0).image; }

/// Parallel-beam acquisition geometry. View v sits at angle v·angular_range/num_views.
struct Geometry {
  int num_views = 200;
  int num_detector_bins = 128;
  double angular_range = std::numbers::pi;
  double detector_spacing = 1.0;

  void validate() const;
  double angle(int view) const { return angular_range * view / num_views; }
  /// Signed offset of bin b from the detector centre, in pixels.
  double bin_offset(int bin) const { return (bin - 0.5 * (num_detector_bins - 1)) * detector_spacing; }
  static Geometry for_image(int side, int views) { return {views, side, std::numbers::pi, 1.0}; }
};

struct Sinogram {
  Eigen::MatrixXd data;  // num_views x num_detector_bins
  Geometry geometry;
};

/// Line integrals along parallel rays, bilinear sampling at half-pixel steps.
Sinogram forward_project(const Eigen::Ref<const Image>& image, const Geometry& geometry);

enum class FilterKind { kRamLak, kSheppLogan };
FilterKind filter_from_string(const std::string& name);
std::string to_string(FilterKind kind);

/// Filtered backprojection onto a square grid of side `side` (defaults to the
/// detector width). Output is clipped to [0,1].
Image filtered_backprojection(const Sinogram& sino, FilterKind filter = FilterKind::kRamLak,
                              int side = 0);

/// Aligned sparse/dense reconstructions of one phantom slice.
struct PairedSample {
  Image sparse;
  Image dense;
  std::string phantom_id;
  std::string slice_id;
  Window roi;
};

PairedSample make_pair(const Image& phantom, int sparse_views = 67, int dense_views = 200,
                       FilterKind filter = FilterKind::kRamLak);

struct PatchPair {
  PairedSample pair;
  Window window;
};

/// `count` aligned crops of side `patch_size` (a multiple of 8), deterministic in seed.
std::vector<PatchPair> crop_patches(const PairedSample& pair, int patch_size, int count,
                                    std::uint64_t seed);

}  // namespace streakfix
