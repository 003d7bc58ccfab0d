#pragma once

// Polarization channels for exact backscattering and the detection filter.

#include <array>
#include <cstdlib>
#include <string>

#include "cbs/frame.hpp"

namespace cbs {

enum class Helicity { kPlus = +1, kMinus = -1 };

inline int index_of(Helicity h) { return h == Helicity::kPlus ? +1 : -1; }

/// Output helicity measured against each beam's own propagation direction
/// (kPerBeam) or as the lab-frame circular component of the incident beam (kLab).
enum class HelicityConvention { kPerBeam, kLab };

inline const char* to_string(HelicityConvention c) {
  return c == HelicityConvention::kPerBeam ? "per_beam" : "lab";
}

struct PolarizationChannel {
  Helicity input_helicity = Helicity::kPlus;
  Helicity output_helicity = Helicity::kPlus;

  bool preserving() const { return input_helicity == output_helicity; }
  std::string name() const {
    auto s = [](Helicity h) { return h == Helicity::kPlus ? std::string("H+") : std::string("H-"); };
    return s(input_helicity) + "->" + s(output_helicity);
  }
  /// File-name safe label such as "hp_hm".
  std::string tag() const {
    auto s = [](Helicity h) { return h == Helicity::kPlus ? std::string("hp") : std::string("hm"); };
    return s(input_helicity) + "_" + s(output_helicity);
  }
  bool operator==(const PolarizationChannel&) const = default;
};

/// The four schemes in a fixed order: ++, +-, -+, --.
inline std::array<PolarizationChannel, 4> all_channels() {
  return {{{Helicity::kPlus, Helicity::kPlus},
           {Helicity::kPlus, Helicity::kMinus},
           {Helicity::kMinus, Helicity::kPlus},
           {Helicity::kMinus, Helicity::kMinus}}};
}

inline int channel_index(const PolarizationChannel& c) {
  return (c.input_helicity == Helicity::kPlus ? 0 : 2) +
         (c.output_helicity == Helicity::kPlus ? 0 : 1);
}

/// Transverse circular basis attached to a propagation direction.
struct HelicityBasis {
  Vec3 direction = Vec3::UnitZ();
  Vec3c e_plus;
  Vec3c e_minus;

  explicit HelicityBasis(const Vec3& k) {
    const RayFrame f = RayFrame::along(k);
    direction = f.z;
    e_plus = f.circular(+1);
    e_minus = f.circular(-1);
  }

  const Vec3c& operator()(Helicity h) const { return h == Helicity::kPlus ? e_plus : e_minus; }
};

struct ChannelVectors {
  Vec3c input;   // e
  Vec3c output;  // e'; the detected amplitude is e'^* . E
};

/// Polarization vectors of a channel for incidence along k_in and detection at
/// k' = -k_in.
inline ChannelVectors channel_vectors(const PolarizationChannel& channel, const Vec3& k_in,
                                      HelicityConvention convention = HelicityConvention::kPerBeam) {
  const HelicityBasis in(k_in);
  ChannelVectors v;
  v.input = in(channel.input_helicity);
  if (convention == HelicityConvention::kPerBeam) {
    v.output = HelicityBasis(-in.direction)(channel.output_helicity);
  } else {
    v.output = in(channel.output_helicity);
  }
  return v;
}

/// Detection accepts only the elastic F=1 final states; the F=2 Raman line is
/// 6.8 GHz away and not registered.
inline bool raman_filter(int final_F, int final_m) {
  if (std::abs(final_m) > final_F) throw DomainError("|m''| exceeds F");
  return final_F == 1;
}

}  // namespace cbs
