#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fm/image.hpp"

namespace fm {

// Sublayer tags of one transformer block.
enum class Sublayer { attn, attn_proj, mlp };

inline constexpr Sublayer kSublayers[] = {Sublayer::attn_proj, Sublayer::attn,
                                          Sublayer::mlp};

std::string_view to_string(Sublayer s);
Sublayer parse_sublayer(std::string_view s);

struct InterventionHook {
  enum class Mode { zero_ablate, add_vector, replace };

  int layer = 0;
  Sublayer sublayer = Sublayer::mlp;
  Mode mode = Mode::zero_ablate;
  Eigen::VectorXd vector;  // direction for add_vector, value for replace
  double alpha = 0.0;

  static InterventionHook zero(int layer, Sublayer sub) {
    return {layer, sub, Mode::zero_ablate, {}, 0.0};
  }
  static InterventionHook add(int layer, Sublayer sub, Eigen::VectorXd v, double alpha) {
    return {layer, sub, Mode::add_vector, std::move(v), alpha};
  }
  static InterventionHook replace_with(int layer, Sublayer sub, Eigen::VectorXd v) {
    return {layer, sub, Mode::replace, std::move(v), 0.0};
  }
};

struct EncodeResult {
  std::vector<Eigen::VectorXd> layers;
  double logit = 0.0;
};

// A model whose block sublayers can be hooked. Hooks are applied in order
// to the sublayer output they target.
class InterventionEncoder {
 public:
  virtual ~InterventionEncoder() = default;

  virtual int n_layers() const = 0;
  virtual int width(int layer) const = 0;
  virtual std::string layer_id(int layer) const { return "L" + std::to_string(layer + 1); }

  virtual EncodeResult encode(const Image& img,
                              const std::vector<InterventionHook>& hooks) const = 0;
  // Output of one sublayer on a clean pass.
  virtual Eigen::VectorXd sublayer_output(const Image& img, int layer,
                                          Sublayer sub) const = 0;
};

}  // namespace fm
