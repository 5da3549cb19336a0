#include "cdlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cdlab {

std::string_view attack_name(AttackKind k) { return k == AttackKind::fgsm ? "fgsm" : "bim"; }

AttackKind parse_attack(std::string_view name) {
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "bim") return AttackKind::bim;
  throw ParameterError("unknown attack '" + std::string(name) + "' (expected fgsm or bim)");
}

int bim_default_iterations(double epsilon) {
  const double n = std::min(epsilon + 4.0, std::round(1.25 * epsilon));
  return std::max(1, static_cast<int>(n));
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ParameterError("attack: epsilon must be >= 0");
  if (kind == AttackKind::bim) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("attack: alpha must be > 0");
    if (iterations < 0) throw ParameterError("attack: iterations must be >= 1");
  }
}

int AttackConfig::resolved_iterations() const {
  return iterations > 0 ? iterations : bim_default_iterations(epsilon);
}

std::string AttackConfig::label() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_eps%g", std::string(attack_name(kind)).c_str(), epsilon);
  return buf;
}

namespace {

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

// Rounds to integers while staying inside the eps-ball and [0, 255].
Image finalize(const Image& x, const Image& adv, double epsilon) {
  Image out = adv;
  auto o = out.samples_mut();
  const auto s = x.samples();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double v = std::round(o[i]);
    v = std::clamp(v, s[i] - epsilon, s[i] + epsilon);
    o[i] = std::clamp(v, 0.0, 255.0);
  }
  return out;
}

void check(const Model& m, const Image& img, int label, double epsilon) {
  m.check_input(img);
  if (label < 0 || label >= m.classes()) throw ParameterError("attack: label out of range");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ParameterError("attack: epsilon must be >= 0");
}

}  // namespace

Image fgsm(const Model& m, const Image& img, int label, double epsilon) {
  check(m, img, label, epsilon);
  if (epsilon == 0.0) return img;
  const LossGrad lg = loss_and_input_grad(m, img, label);
  Image adv = img;
  auto a = adv.samples_mut();
  const auto g = lg.grad.samples();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i] + epsilon * sign(g[i]), 0.0, 255.0);
  return finalize(img, adv, epsilon);
}

Image bim(const Model& m, const Image& img, int label, double epsilon, double alpha, int iterations,
          const BimObserver& observer) {
  check(m, img, label, epsilon);
  if (!(alpha > 0.0) || iterations < 1) throw ParameterError("attack: BIM needs alpha > 0 and iterations >= 1");
  const auto x0 = img.samples();
  Image x = img;
  for (int n = 0; n < iterations; ++n) {
    const LossGrad lg = loss_and_input_grad(m, x, label);
    auto a = x.samples_mut();
    const auto g = lg.grad.samples();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double v = std::clamp(a[i] + alpha * sign(g[i]), 0.0, 255.0);
      a[i] = std::clamp(v, x0[i] - epsilon, x0[i] + epsilon);
    }
    if (observer) observer(n + 1, x);
  }
  return finalize(img, x, epsilon);
}

Image run_attack(const Model& m, const Image& img, int label, const AttackConfig& cfg) {
  cfg.validate();
  if (cfg.kind == AttackKind::fgsm) return fgsm(m, img, label, cfg.epsilon);
  return bim(m, img, label, cfg.epsilon, cfg.alpha, cfg.resolved_iterations());
}

}  // namespace cdlab
