#include "fs3d/rdp/objective.hpp"

#include <cmath>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/ops.hpp"

namespace fs3d::rdp {

std::string to_string(Setup setup) { return setup == Setup::A ? "A" : "B"; }

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Ours: return "ours";
    case Mode::Dftm: return "dftm";
    case Mode::FreezeT: return "freezet";
  }
  return "ours";
}

Setup parse_setup(const std::string& text) {
  if (text == "A") return Setup::A;
  if (text == "B") return Setup::B;
  throw ConfigError("setup must be A or B, got '" + text + "'");
}

Mode parse_mode(const std::string& text) {
  if (text == "ours") return Mode::Ours;
  if (text == "dftm") return Mode::Dftm;
  if (text == "freezet") return Mode::FreezeT;
  throw ConfigError("mode must be ours, dftm or freezet, got '" + text + "'");
}

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {{"mu", reg}, {"mu1", geo}, {"mu2", mask}, {"mu3", tex}, {"mu4", rgb}};
  for (const auto& [name, value] : all) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ConfigError(std::string("loss weight ") + name + " must be finite and non-negative");
    }
  }
}

ActiveTerms active_terms(Setup setup, Mode mode) {
  ActiveTerms a;
  a.adv_rgb = setup == Setup::B;
  const bool rdp = mode == Mode::Ours;
  a.geo = rdp;
  a.mask = rdp;
  a.tex = rdp && setup == Setup::A;
  a.rgb = rdp && setup == Setup::A;
  return a;
}

Objective total_adaptation_loss(const LossWeights& weights, Setup setup, Mode mode, const LossTerms& terms) {
  weights.validate();
  if (!terms.adv_mask.valid()) throw ContractError("objective needs the mask adversarial term");
  const ActiveTerms active = active_terms(setup, mode);
  Objective out;
  out.total = terms.adv_mask;
  out.breakdown.adv_mask = terms.adv_mask.value().item();

  auto include = [&](bool on, Var term, double weight, double& slot, const char* name) {
    if (!on) return;
    if (!term.valid()) throw ContractError(std::string("objective is missing the active term ") + name);
    const Var weighted = numerics::scale(term, weight);
    slot = weighted.value().item();
    out.total = numerics::add(out.total, weighted);
  };
  include(active.adv_rgb, terms.adv_rgb, 1.0, out.breakdown.adv_rgb, "adv_rgb");
  include(terms.reg.valid(), terms.reg, weights.reg, out.breakdown.reg, "reg");
  include(active.geo, terms.geo, weights.geo, out.breakdown.geo, "geo");
  include(active.mask, terms.mask, weights.mask, out.breakdown.mask, "mask");
  include(active.tex, terms.tex, weights.tex, out.breakdown.tex, "tex");
  include(active.rgb, terms.rgb, weights.rgb, out.breakdown.rgb, "rgb");
  return out;
}

}  // namespace fs3d::rdp
