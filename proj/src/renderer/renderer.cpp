#include "fs3d/renderer/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "fs3d/errors.hpp"
#include "fs3d/numerics/ops.hpp"

namespace fs3d::renderer {

using numerics::Graph;
using numerics::Shape;

std::vector<Camera> camera_ring(std::size_t count, double elevation) {
  if (count < 1) throw ContractError("camera_ring needs at least one camera");
  std::vector<Camera> ring;
  ring.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Camera cam;
    cam.azimuth = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(count);
    cam.elevation = elevation;
    ring.push_back(cam);
  }
  return ring;
}

namespace {

struct Corners {
  std::size_t index[8];
  double weight[8];
  double frac[3];
};

struct Sample {
  bool inside = false;
  bool clamped[3] = {false, false, false};
  Corners at_x;
  Corners at_q;
  double occupancy = 0.0;
};

class RayCaster {
 public:
  RayCaster(std::size_t grid, const Camera& camera, const RenderSettings& settings)
      : grid_(grid), h_(2.0 / static_cast<double>(grid - 1)), settings_(settings) {
    const double ce = std::cos(camera.elevation), se = std::sin(camera.elevation);
    const double ca = std::cos(camera.azimuth), sa = std::sin(camera.azimuth);
    const double toward[3] = {ce * sa, se, ce * ca};
    const double right[3] = {ca, 0.0, -sa};
    const double up[3] = {-se * sa, ce, -se * ca};
    std::copy(toward, toward + 3, toward_);
    std::copy(right, right + 3, right_);
    std::copy(up, up + 3, up_);
    half_width_ = camera.half_width;
    extent_ = std::sqrt(3.0);
  }

  std::size_t pixels() const { return settings_.resolution * settings_.resolution; }

  /// Fills one Sample per ray step; `sdf` and `deform` are lattice arrays.
  void cast(std::size_t pixel, const double* sdf, const double* deform, std::vector<Sample>& samples) const {
    const std::size_t res = settings_.resolution;
    const double px = static_cast<double>(pixel % res);
    const double py = static_cast<double>(pixel / res);
    const double sx = half_width_ * (-1.0 + (2.0 * px + 1.0) / static_cast<double>(res));
    const double sy = half_width_ * (1.0 - (2.0 * py + 1.0) / static_cast<double>(res));
    const std::size_t k_count = settings_.samples;
    samples.assign(k_count, Sample{});
    for (std::size_t k = 0; k < k_count; ++k) {
      const double t =
          extent_ - 2.0 * extent_ * (static_cast<double>(k) + 0.5) / static_cast<double>(k_count);
      double x[3];
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        x[a] = sx * right_[a] + sy * up_[a] + t * toward_[a];
        inside = inside && x[a] >= -1.0 && x[a] <= 1.0;
      }
      Sample& s = samples[k];
      if (!inside) continue;
      s.inside = true;
      locate(x, s.at_x);
      double q[3];
      for (int a = 0; a < 3; ++a) {
        double d = 0.0;
        for (int c = 0; c < 8; ++c) d += s.at_x.weight[c] * deform[s.at_x.index[c] * 3 + a];
        const double moved = x[a] + d;
        s.clamped[a] = moved < -1.0 || moved > 1.0;
        q[a] = std::clamp(moved, -1.0, 1.0);
      }
      locate(q, s.at_q);
      double value = 0.0;
      for (int c = 0; c < 8; ++c) value += s.at_q.weight[c] * sdf[s.at_q.index[c]];
      s.occupancy = 1.0 / (1.0 + std::exp(value / settings_.temperature));
    }
  }

  /// d(interpolated sdf)/d(position) at the corners of `c`.
  void position_gradient(const double* sdf, const Corners& c, double out[3]) const {
    out[0] = out[1] = out[2] = 0.0;
    for (int k = 0; k < 8; ++k) {
      const int bit[3] = {k & 1, (k >> 1) & 1, (k >> 2) & 1};
      double f[3];
      for (int a = 0; a < 3; ++a) f[a] = bit[a] ? c.frac[a] : 1.0 - c.frac[a];
      const double value = sdf[c.index[k]];
      for (int a = 0; a < 3; ++a) {
        const double sign = bit[a] ? 1.0 : -1.0;
        out[a] += sign * f[(a + 1) % 3] * f[(a + 2) % 3] * value;
      }
    }
    for (int a = 0; a < 3; ++a) out[a] /= h_;
  }

  double temperature() const { return settings_.temperature; }

 private:
  void locate(const double p[3], Corners& c) const {
    std::size_t base[3];
    for (int a = 0; a < 3; ++a) {
      const double g = std::max(0.0, (p[a] + 1.0) / h_);
      base[a] = std::min(static_cast<std::size_t>(g), grid_ - 2);
      c.frac[a] = g - static_cast<double>(base[a]);
    }
    for (int k = 0; k < 8; ++k) {
      const std::size_t dx = k & 1, dy = (k >> 1) & 1, dz = (k >> 2) & 1;
      c.index[k] = ((base[2] + dz) * grid_ + base[1] + dy) * grid_ + base[0] + dx;
      c.weight[k] = (dx ? c.frac[0] : 1.0 - c.frac[0]) * (dy ? c.frac[1] : 1.0 - c.frac[1]) *
                    (dz ? c.frac[2] : 1.0 - c.frac[2]);
    }
  }

  std::size_t grid_;
  double h_;
  RenderSettings settings_;
  double toward_[3], right_[3], up_[3];
  double half_width_;
  double extent_;
};

Array composite(const RayCaster& caster, const Array& sdf, const Array& deform, const Array* attrs,
                std::size_t channels) {
  const std::size_t width = 1 + channels;
  Array out(Shape{caster.pixels(), width});
  std::vector<Sample> samples;
  std::vector<double> acc(channels);
  for (std::size_t p = 0; p < caster.pixels(); ++p) {
    caster.cast(p, sdf.data(), deform.data(), samples);
    double transmittance = 1.0;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const Sample& s : samples) {
      if (!s.inside) continue;
      const double w = transmittance * s.occupancy;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double a = 0.0;
        for (int c = 0; c < 8; ++c) a += s.at_x.weight[c] * (*attrs)[s.at_x.index[c] * channels + ch];
        acc[ch] += w * a;
      }
      transmittance *= 1.0 - s.occupancy;
    }
    out[p * width] = 1.0 - transmittance;
    for (std::size_t ch = 0; ch < channels; ++ch) out[p * width + 1 + ch] = acc[ch];
  }
  return out;
}

class RenderOp final : public numerics::Op {
 public:
  RenderOp(RayCaster caster, std::size_t channels) : caster_(caster), channels_(channels) {}

  std::string_view name() const override { return "render"; }

  void backward(const Graph& graph, std::span<const std::size_t> inputs, const Array&, const Array& grad,
                std::span<Array* const> grad_inputs) const override {
    const Array& sdf = graph.value(inputs[0]);
    const Array& deform = graph.value(inputs[1]);
    const Array* attrs = channels_ > 0 ? &graph.value(inputs[2]) : nullptr;
    Array* g_sdf = grad_inputs[0];
    Array* g_deform = grad_inputs[1];
    Array* g_attrs = channels_ > 0 ? grad_inputs[2] : nullptr;
    const bool need_geometry = g_sdf || g_deform;
    const std::size_t width = 1 + channels_;

    std::vector<Sample> samples;
    std::vector<double> transmittance;
    std::vector<double> values;     // K x C interpolated attributes
    std::vector<double> remaining;  // composite of the samples behind the current one
    remaining.resize(width);
    for (std::size_t p = 0; p < caster_.pixels(); ++p) {
      const double* g = grad.data() + p * width;
      bool any = false;
      for (std::size_t ch = 0; ch < width; ++ch) any = any || g[ch] != 0.0;
      if (!any) continue;
      caster_.cast(p, sdf.data(), deform.data(), samples);
      const std::size_t k_total = samples.size();
      transmittance.resize(k_total);
      values.assign(k_total * channels_, 0.0);
      double t = 1.0;
      for (std::size_t k = 0; k < k_total; ++k) {
        transmittance[k] = t;
        const Sample& s = samples[k];
        if (!s.inside) continue;
        for (std::size_t ch = 0; ch < channels_; ++ch) {
          double a = 0.0;
          for (int c = 0; c < 8; ++c) a += s.at_x.weight[c] * (*attrs)[s.at_x.index[c] * channels_ + ch];
          values[k * channels_ + ch] = a;
        }
        t *= 1.0 - s.occupancy;
      }
      std::fill(remaining.begin(), remaining.end(), 0.0);
      for (std::size_t k = k_total; k-- > 0;) {
        const Sample& s = samples[k];
        if (!s.inside) continue;
        const double o = s.occupancy;
        const double tk = transmittance[k];
        const double* a = values.data() + k * channels_;
        if (g_attrs) {
          const double w = tk * o;
          for (int c = 0; c < 8; ++c) {
            double* dst = g_attrs->data() + s.at_x.index[c] * channels_;
            const double cw = s.at_x.weight[c] * w;
            for (std::size_t ch = 0; ch < channels_; ++ch) dst[ch] += cw * g[1 + ch];
          }
        }
        if (need_geometry) {
          double g_o = g[0] * tk * (1.0 - remaining[0]);
          for (std::size_t ch = 0; ch < channels_; ++ch) g_o += g[1 + ch] * tk * (a[ch] - remaining[1 + ch]);
          const double g_s = -g_o * o * (1.0 - o) / caster_.temperature();
          if (g_sdf) {
            for (int c = 0; c < 8; ++c) (*g_sdf)[s.at_q.index[c]] += g_s * s.at_q.weight[c];
          }
          if (g_deform) {
            double dq[3];
            caster_.position_gradient(sdf.data(), s.at_q, dq);
            for (int ax = 0; ax < 3; ++ax) {
              if (s.clamped[ax]) continue;
              const double step = g_s * dq[ax];
              for (int c = 0; c < 8; ++c) (*g_deform)[s.at_x.index[c] * 3 + ax] += step * s.at_x.weight[c];
            }
          }
        }
        remaining[0] = o + (1.0 - o) * remaining[0];
        for (std::size_t ch = 0; ch < channels_; ++ch) {
          remaining[1 + ch] = o * a[ch] + (1.0 - o) * remaining[1 + ch];
        }
      }
    }
  }

 private:
  RayCaster caster_;
  std::size_t channels_;
};

}  // namespace

Var render_fields(Var sdf, Var deform, Var attrs, std::size_t grid_resolution, const Camera& camera,
                  const RenderSettings& settings) {
  if (grid_resolution < 2) throw ContractError("render grid resolution must be at least 2");
  if (settings.resolution < 1 || settings.samples < 1 || !(settings.temperature > 0.0)) {
    throw ContractError("render settings need positive resolution, samples and temperature");
  }
  const std::size_t v = grid_resolution * grid_resolution * grid_resolution;
  if (sdf.shape() != Shape{v}) {
    throw StructuralError("render: sdf shape " + numerics::format_shape(sdf.shape()) + " does not match a " +
                          std::to_string(grid_resolution) + "^3 lattice");
  }
  if (deform.shape() != Shape{v, 3}) {
    throw StructuralError("render: deformation shape " + numerics::format_shape(deform.shape()));
  }
  std::size_t channels = 0;
  if (attrs.valid()) {
    if (attrs.shape().size() != 2 || attrs.shape()[0] != v) {
      throw StructuralError("render: attribute shape " + numerics::format_shape(attrs.shape()));
    }
    channels = attrs.shape()[1];
  }
  RayCaster caster(grid_resolution, camera, settings);
  Array out =
      composite(caster, sdf.value(), deform.value(), attrs.valid() ? &attrs.value() : nullptr, channels);
  std::vector<Var> inputs{sdf, deform};
  if (attrs.valid()) inputs.push_back(attrs);
  return sdf.graph().apply(std::make_unique<RenderOp>(caster, channels), std::move(inputs), std::move(out));
}

ViewVars render(Var sdf, Var deform, Var colors, Var features, std::size_t grid_resolution,
                const Camera& camera, const RenderSettings& settings) {
  using namespace numerics;
  std::vector<Var> parts;
  if (colors.valid()) parts.push_back(colors);
  if (features.valid()) parts.push_back(features);
  Var attrs;
  if (parts.size() == 1) attrs = parts[0];
  if (parts.size() == 2) attrs = concat(parts, 1);
  const Var out = render_fields(sdf, deform, attrs, grid_resolution, camera, settings);
  const std::size_t pixels = settings.resolution * settings.resolution;
  ViewVars view;
  view.mask = reshape(slice_cols(out, 0, 1), {pixels});
  std::size_t col = 1;
  if (colors.valid()) {
    view.rgb = slice_cols(out, col, col + 3);
    col += 3;
  }
  if (features.valid()) view.features = slice_cols(out, col, col + features.shape()[1]);
  return view;
}

RenderedView render_view(const Array& sdf, const Array& deform, const Array& colors, const Array& features,
                         std::size_t grid_resolution, const Camera& camera, const RenderSettings& settings) {
  Graph graph;
  const Var c = colors.empty() ? Var() : graph.constant(colors);
  const Var f = features.empty() ? Var() : graph.constant(features);
  const ViewVars vars =
      render(graph.constant(sdf), graph.constant(deform), c, f, grid_resolution, camera, settings);
  const std::size_t r = settings.resolution;
  RenderedView view;
  view.camera = camera;
  view.mask = vars.mask.value().reshaped({r, r});
  if (c.valid()) view.rgb = vars.rgb.value().reshaped({r, r, 3});
  if (f.valid()) view.features = vars.features.value().reshaped({r, r, features.dim(1)});
  return view;
}

}  // namespace fs3d::renderer
