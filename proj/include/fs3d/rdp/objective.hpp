#pragma once

#include <string>

#include "fs3d/numerics/graph.hpp"

namespace fs3d::rdp {

using numerics::Var;

/// Setup A adapts geometry and keeps source textures; Setup B adapts both
/// from target RGB views.
enum class Setup { A, B };
enum class Mode { Ours, Dftm, FreezeT };

std::string to_string(Setup setup);
std::string to_string(Mode mode);
Setup parse_setup(const std::string& text);
Mode parse_mode(const std::string& text);

struct LossWeights {
  double reg = 0.01;
  double geo = 2e4;
  double mask = 5e3;
  double tex = 5e3;
  double rgb = 1e4;

  /// Throws ConfigError on a negative weight.
  void validate() const;
};

/// Unweighted loss terms of one generator step; invalid handles are absent terms.
struct LossTerms {
  Var adv_mask;
  Var adv_rgb;
  Var reg;
  Var geo;
  Var mask;
  Var tex;
  Var rgb;
};

/// Weighted values of the terms that enter the total; inactive terms are 0.
struct TermBreakdown {
  double adv_mask = 0.0;
  double adv_rgb = 0.0;
  double reg = 0.0;
  double geo = 0.0;
  double mask = 0.0;
  double tex = 0.0;
  double rgb = 0.0;

  double sum() const { return adv_mask + adv_rgb + reg + geo + mask + tex + rgb; }
};

/// Which terms a (setup, mode) pair uses.
struct ActiveTerms {
  bool adv_rgb = false;
  bool geo = false;
  bool mask = false;
  bool tex = false;
  bool rgb = false;
};

ActiveTerms active_terms(Setup setup, Mode mode);

struct Objective {
  Var total;
  TermBreakdown breakdown;
};

/// Setup A: adv_mask + reg + geo + mask + tex + rgb. Setup B: adv_mask + adv_rgb
/// + reg + geo + mask. Baseline modes drop the relative-distance terms.
/// `terms.adv_mask` is required; every active term must be present.
Objective total_adaptation_loss(const LossWeights& weights, Setup setup, Mode mode, const LossTerms& terms);

}  // namespace fs3d::rdp
