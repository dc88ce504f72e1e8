// Copyright 2026 The Doorlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOORLAB_ADAPT_HPP_
#define DOORLAB_ADAPT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doorlab/data.hpp"
#include "doorlab/image.hpp"
#include "doorlab/render.hpp"
#include "doorlab/rng.hpp"
#include "doorlab/scene.hpp"

namespace doorlab {

// ---------------------------------------------------------------------------
// Augmentation (the D(.) operator).
//
// RGB gets random crop, brightness, saturation, hue, contrast, cutout and
// additive Gaussian noise. Depth gets only the crop and the cutout: it must
// pass a no-photometric-shift histogram check, so cropping resamples with
// nearest-neighbor and cut regions are set to 0.

struct AugmentConfig {
  double crop_fraction = 0.85;  // smallest crop size, fraction of H and W
  double brightness_lo = 0.85, brightness_hi = 1.15;
  double saturation_lo = 0.80, saturation_hi = 1.20;
  double hue_delta = 0.03;  // max |hue shift| in turns of the color wheel
  double contrast_lo = 0.85, contrast_hi = 1.15;
  int cutout_count = 1;
  int cutout_max = 10;          // largest square side, pixels
  double gaussian_sigma = 2.0;  // RGB only, 0..255 units
};

namespace detail {

struct CutRect {
  int r = 0, c = 0, size = 0;
};

struct AugGeometry {
  int r0 = 0, c0 = 0;  // crop origin
  int ch = 0, cw = 0;  // crop size
  std::vector<CutRect> cuts;
};

// Both modalities of one variant share a seed, and the geometric draws come
// first in the stream, so crop and cutout stay registered across RGB and
// depth while the photometric draws remain RGB-only.
inline AugGeometry draw_geometry(const AugmentConfig& cfg, int height,
                                 int width, Rng& rng) {
  AugGeometry g;
  double f = rng.uniform(std::clamp(cfg.crop_fraction, 0.05, 1.0), 1.0);
  g.ch = std::max(1, static_cast<int>(std::lround(f * height)));
  g.cw = std::max(1, static_cast<int>(std::lround(f * width)));
  g.r0 = static_cast<int>(rng.uniform_index(height - g.ch + 1));
  g.c0 = static_cast<int>(rng.uniform_index(width - g.cw + 1));
  for (int k = 0; k < cfg.cutout_count; ++k) {
    if (cfg.cutout_max <= 0) break;
    CutRect cut;
    cut.size = 1 + static_cast<int>(rng.uniform_index(
                       std::min(cfg.cutout_max, std::min(height, width))));
    cut.r = static_cast<int>(rng.uniform_index(height - cut.size + 1));
    cut.c = static_cast<int>(rng.uniform_index(width - cut.size + 1));
    g.cuts.push_back(cut);
  }
  return g;
}

inline bool in_cut(const AugGeometry& g, int r, int c) {
  for (const CutRect& cut : g.cuts) {
    if (r >= cut.r && r < cut.r + cut.size && c >= cut.c &&
        c < cut.c + cut.size) {
      return true;
    }
  }
  return false;
}

// RGB <-> HSV with hue in turns [0,1), all channels in [0,1].
inline void rgb_to_hsv(double r, double g, double b, double& h, double& s,
                       double& v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
  } else if (mx == r) {
    h = std::fmod((g - b) / d + 6.0, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
}

inline void hsv_to_rgb(double h, double s, double v, double& r, double& g,
                       double& b) {
  double hh = std::fmod(std::fmod(h, 1.0) + 1.0, 1.0) * 6.0;
  int sector = static_cast<int>(hh);
  double frac = hh - sector;
  double p = v * (1.0 - s);
  double q = v * (1.0 - s * frac);
  double t = v * (1.0 - s * (1.0 - frac));
  switch (sector % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace detail

inline RgbImage augment(const RgbImage& in, std::uint64_t seed,
                        const AugmentConfig& cfg = AugmentConfig{}) {
  Rng rng(seed_mix(seed, 0xA06));
  detail::AugGeometry geo =
      detail::draw_geometry(cfg, in.height, in.width, rng);
  double brightness = rng.uniform(cfg.brightness_lo, cfg.brightness_hi);
  double saturation = rng.uniform(cfg.saturation_lo, cfg.saturation_hi);
  double hue_shift = rng.uniform(-cfg.hue_delta, cfg.hue_delta);
  double contrast = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);

  // Crop, resampled back to the input size, then brightness and saturation.
  std::vector<double> buf(static_cast<std::size_t>(in.height) * in.width * 3);
  double mean_luma = 0.0;
  for (int r = 0; r < in.height; ++r) {
    double ir = geo.r0 + (r + 0.5) * geo.ch / in.height - 0.5;
    for (int c = 0; c < in.width; ++c) {
      double ic = geo.c0 + (c + 0.5) * geo.cw / in.width - 0.5;
      double px[3];
      for (int k = 0; k < 3; ++k) px[k] = bilinear(in, ir, ic, k);
      double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
      std::size_t base = (static_cast<std::size_t>(r) * in.width + c) * 3;
      for (int k = 0; k < 3; ++k) {
        double v = px[k] * brightness;
        v = luma * brightness + saturation * (v - luma * brightness);
        buf[base + k] = v;
        mean_luma += v * (k == 0 ? 0.299 : k == 1 ? 0.587 : 0.114);
      }
    }
  }
  mean_luma /= static_cast<double>(in.height) * in.width;

  RgbImage out(in.height, in.width, 3);
  for (int r = 0; r < in.height; ++r) {
    for (int c = 0; c < in.width; ++c) {
      std::size_t pix = static_cast<std::size_t>(r) * in.width + c;
      if (detail::in_cut(geo, r, c)) {
        for (int k = 0; k < 3; ++k) out.at(r, c, k) = 0;
        continue;
      }
      double px[3];
      for (int k = 0; k < 3; ++k) {
        px[k] = mean_luma + contrast * (buf[pix * 3 + k] - mean_luma);
        px[k] = std::clamp(px[k] / 255.0, 0.0, 1.0);
      }
      if (hue_shift != 0.0) {
        double h, s, v;
        detail::rgb_to_hsv(px[0], px[1], px[2], h, s, v);
        detail::hsv_to_rgb(h + hue_shift, s, v, px[0], px[1], px[2]);
      }
      for (int k = 0; k < 3; ++k) {
        double v = px[k] * 255.0;
        if (cfg.gaussian_sigma > 0.0) {
          v += cfg.gaussian_sigma * hash_normal(seed_mix(seed, pix, 300 + k));
        }
        out.at(r, c, k) = clamp_u8(v);
      }
    }
  }
  return out;
}

inline DepthImage augment(const DepthImage& in, std::uint64_t seed,
                          const AugmentConfig& cfg = AugmentConfig{}) {
  Rng rng(seed_mix(seed, 0xA06));
  detail::AugGeometry geo =
      detail::draw_geometry(cfg, in.height, in.width, rng);
  DepthImage out(in.height, in.width, 1);
  for (int r = 0; r < in.height; ++r) {
    // Nearest-neighbor: every surviving value is an exact input value, so
    // the histogram is unchanged outside cut and crop effects.
    int ir = geo.r0 +
             std::clamp(static_cast<int>((r + 0.5) * geo.ch / in.height), 0,
                        geo.ch - 1);
    for (int c = 0; c < in.width; ++c) {
      if (detail::in_cut(geo, r, c)) {
        out.at(r, c, 0) = 0.0f;
        continue;
      }
      int ic = geo.c0 +
               std::clamp(static_cast<int>((c + 0.5) * geo.cw / in.width), 0,
                          geo.cw - 1);
      out.at(r, c, 0) = in.at(ir, ic, 0);
    }
  }
  return out;
}

inline Frame augment(const Frame& in, std::uint64_t seed,
                     const AugmentConfig& cfg = AugmentConfig{}) {
  return Frame{augment(in.rgb, seed, cfg), augment(in.depth, seed, cfg)};
}

// ---------------------------------------------------------------------------
// Oracle adapter (the G(.) operator).
//
// The recorded world state is re-rendered in the other domain with the same
// sensor noise stream. This is exact by construction: adapting a sim-origin
// frame yields bit-for-bit the frame a real-domain recording of the same
// episode would contain, and a round trip returns the original.

enum class AdaptDirection { kSim2Real, kReal2Sim };

inline Domain source_domain(AdaptDirection d) {
  return d == AdaptDirection::kSim2Real ? Domain::kSim : Domain::kReal;
}

inline Domain target_domain(AdaptDirection d) {
  return d == AdaptDirection::kSim2Real ? Domain::kReal : Domain::kSim;
}

inline AdaptDirection direction_for(Domain source) {
  return source == Domain::kSim ? AdaptDirection::kSim2Real
                                : AdaptDirection::kReal2Sim;
}

inline Frame oracle_adapt(const FrameRecord& rec, const SceneSpec& scene,
                          Domain target,
                          const RenderConfig& rcfg = RenderConfig{},
                          const WorldConfig& wcfg = WorldConfig{}) {
  return render(rec.state, scene, target, rec.noise_seed, rcfg, wcfg);
}

inline Observation adapt_oracle(const Observation& obs, AdaptDirection dir,
                                const SceneRegistry& registry,
                                const RenderConfig& rcfg = RenderConfig{},
                                const WorldConfig& wcfg = WorldConfig{}) {
  if (obs.domain != source_domain(dir)) {
    throw ContractViolation(
        "adapt_oracle: observation domain does not match direction source");
  }
  if (!registry.contains(obs.scene_id)) {
    throw ProvenanceError("adapt_oracle: cannot resolve frame provenance, "
                          "unknown scene '" +
                          obs.scene_id + "'");
  }
  const SceneSpec& scene = registry.get(obs.scene_id);
  Observation out = obs;
  out.domain = target_domain(dir);
  out.frame = render(obs.state, scene, out.domain, obs.noise_seed, rcfg, wcfg);
  return out;
}

// ---------------------------------------------------------------------------
// TCL variant construction.
//
// Variant index 0 is the anchor D(original). Index 1 is a second independent
// distortion of the original, and indices >= 2 distort the domain-adapted
// image. Callers supply the adapted frame so they can route through either
// the oracle or a learned generator.

inline std::vector<Frame> make_variants_from(
    const Frame& original, const Frame* adapted, int n_variants,
    std::uint64_t base_seed, const AugmentConfig& acfg = AugmentConfig{}) {
  if (n_variants < 1) {
    throw ContractViolation("make_variants_from: n_variants < 1");
  }
  if (n_variants >= 3 && adapted == nullptr) {
    throw ContractViolation(
        "make_variants_from: adapted frame required for n_variants >= 3");
  }
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(n_variants));
  for (int i = 0; i < n_variants; ++i) {
    std::uint64_t vseed =
        seed_mix(base_seed, static_cast<std::uint64_t>(i), 0x7A);
    out.push_back(augment(i < 2 ? original : *adapted, vseed, acfg));
  }
  return out;
}

// Convenience wrapper routing the adaptation through the oracle. Sim-origin
// frames adapt sim->real, real-origin frames real->sim.
inline std::vector<Frame> make_tcl_variants(
    const FrameRecord& rec, const SceneSpec& scene, Domain source,
    int n_variants, std::uint64_t base_seed,
    const AugmentConfig& acfg = AugmentConfig{},
    const RenderConfig& rcfg = RenderConfig{},
    const WorldConfig& wcfg = WorldConfig{}) {
  if (n_variants >= 3) {
    Frame adapted = oracle_adapt(rec, scene, other_domain(source), rcfg, wcfg);
    return make_variants_from(rec.frame, &adapted, n_variants, base_seed,
                              acfg);
  }
  return make_variants_from(rec.frame, nullptr, n_variants, base_seed, acfg);
}

}  // namespace doorlab

#endif  // DOORLAB_ADAPT_HPP_
