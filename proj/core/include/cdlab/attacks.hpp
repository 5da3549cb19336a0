#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "cdlab/image.hpp"
#include "cdlab/model.hpp"

namespace cdlab {

enum class AttackKind { fgsm, bim };

std::string_view attack_name(AttackKind k);
AttackKind parse_attack(std::string_view name);  // "fgsm" or "bim"

struct AttackConfig {
  AttackKind kind = AttackKind::fgsm;
  double epsilon = 0.0;  // pixel units on the 0..255 scale
  double alpha = 1.0;    // BIM step
  int iterations = 0;    // BIM; 0 = bim_default_iterations(epsilon)
  std::uint64_t seed = 0;  // unused; both attacks are deterministic

  void validate() const;
  int resolved_iterations() const;
  std::string label() const;  // e.g. "fgsm_eps10"
};

// min(eps + 4, round(1.25 * eps)), at least 1.
int bim_default_iterations(double epsilon);

Image fgsm(const Model& m, const Image& img, int label, double epsilon);

// Called with the iterate after each projection, before integer quantization.
using BimObserver = std::function<void(int iteration, const Image& x)>;
Image bim(const Model& m, const Image& img, int label, double epsilon, double alpha, int iterations,
          const BimObserver& observer = {});

Image run_attack(const Model& m, const Image& img, int label, const AttackConfig& cfg);

}  // namespace cdlab
