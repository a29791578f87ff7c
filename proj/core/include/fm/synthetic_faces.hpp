#pragma once

#include <cstdint>

#include "fm/image.hpp"

namespace fm {

// Procedural stand-in for the face corpus. Real faces are left-right
// mirror symmetric inside the face ellipse with a crisp blend seam.
// `fake_strength` in [0,1] adds generator-style imperfections in proportion:
// eye misalignment, a soft blend seam, a warm tint and a brighter face.
struct FaceParams {
  std::uint64_t seed = 0;
  int height = 224;
  int width = 224;
  double fake_strength = 0.0;
};

Image synthesize_face(const FaceParams& params);

}  // namespace fm
