#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/splat/metrics.hpp"
#include "rigrecon/splat/render.hpp"

namespace rigrecon::splat {

/// Posed RGB image used for training or evaluation.
struct View {
  Camera camera;
  imaging::Image image;
};

struct LearningRates {
  double mu = 1e-5;  // 1e-4 oscillates on the pixel-summed objective
  double log_scale = 5e-3;
  double rotation = 1e-3;
  double color = 2e-3;
  double alpha_logit = 5e-2;
};

struct OptimizeOptions {
  int iterations = 1000;
  double ssim_weight = 0.2;
  LearningRates lr;
  RenderOptions render;
  int heldout_every = 10;          // iterations between held-out evaluations
  double heldout_tolerance = 1.10;  // stop once held-out loss exceeds its minimum by 10%
  double divergence_factor = 2.0;
  int divergence_patience = 50;
  bool throw_on_divergence = true;
};

struct OptimizeReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  bool stopped_early = false;
  double best_heldout_loss = std::numeric_limits<double>::infinity();
  int best_heldout_iteration = -1;
  std::vector<double> loss_history;  // training loss before each step
};

/// Training loss averaged over views, with per-Gaussian gradients when
/// `grads` is given.
inline double training_loss(const GaussianCloud& cloud, const std::vector<View>& views, double ssim_weight,
                            const RenderOptions& ropts, std::vector<GaussianGrad>* grads = nullptr) {
  double loss = 0.0;
  if (grads) grads->assign(cloud.size(), {});
  for (const View& v : views) {
    RenderState st;
    const RenderTarget r = render(cloud, v.camera, ropts, grads ? &st : nullptr);
    imaging::Image g;
    loss += photometric_loss(r.color, v.image, ssim_weight, grads ? &g : nullptr);
    if (!grads) continue;
    const auto vg = render_backward(cloud, v.camera, st, g);
    for (std::size_t i = 0; i < vg.size(); ++i) (*grads)[i] += vg[i];
  }
  const double inv = 1.0 / static_cast<double>(views.size());
  if (grads)
    for (auto& g : *grads) {
      g.mu *= inv;
      g.log_scale *= inv;
      g.rotation *= inv;
      g.color *= inv;
      g.alpha_logit *= inv;
    }
  return loss * inv;
}

/// One fixed-step descent update. The loss is a per-pixel mean, so each
/// gradient is scaled by the pixel count of a view to make the steps act on
/// the image-summed loss.
inline void apply_step(GaussianCloud& cloud, const std::vector<GaussianGrad>& grads, const LearningRates& lr,
                       double pixels) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Gaussian& g = cloud.gaussians[i];
    const GaussianGrad& d = grads[i];
    g.mu -= lr.mu * pixels * d.mu;
    for (int c = 0; c < 3; ++c) g.scale(c) = std::exp(std::log(g.scale(c)) - lr.log_scale * pixels * d.log_scale(c));
    Eigen::Vector4d q(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
    q -= lr.rotation * pixels * d.rotation;
    g.rotation = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).normalized();
    g.color = (g.color - lr.color * pixels * d.color).cwiseMax(0.0).cwiseMin(1.0);
    const double logit = std::log(g.alpha / (1.0 - g.alpha)) - lr.alpha_logit * pixels * d.alpha_logit;
    g.alpha = std::clamp(1.0 / (1.0 + std::exp(-logit)), 1e-6, 1.0 - 1e-6);
  }
}

/// Plain gradient descent on (1 - l) L1 + l (1 - SSIM) over all training
/// views per iteration. No densification or pruning. The held-out view, if
/// any, guards against overfitting: once its loss exceeds its minimum by the
/// tolerance, the iterate at that minimum is returned. Training loss above
/// twice the initial loss for `divergence_patience` consecutive iterations
/// raises DivergenceDetected.
inline GaussianCloud optimize(GaussianCloud cloud, const std::vector<View>& train, const std::vector<View>& heldout,
                              const OptimizeOptions& opts, OptimizeReport* report = nullptr) {
  require(train.size() >= 2, ErrorCode::InvalidArgument, "splat optimization needs two or more training views");
  require(!cloud.empty(), ErrorCode::EmptyModel, "cannot optimize an empty Gaussian cloud");
  OptimizeReport rep;
  const double pixels = static_cast<double>(train.front().camera.intr.width) * train.front().camera.intr.height;
  GaussianCloud best = cloud;
  int above = 0;
  std::vector<GaussianGrad> grads;
  for (int it = 0; it < opts.iterations; ++it) {
    if (!heldout.empty() && it % opts.heldout_every == 0) {
      const double h = training_loss(cloud, heldout, opts.ssim_weight, opts.render);
      if (h < rep.best_heldout_loss) {
        rep.best_heldout_loss = h;
        rep.best_heldout_iteration = it;
        best = cloud;
      } else if (h > opts.heldout_tolerance * rep.best_heldout_loss) {
        rep.stopped_early = true;
        cloud = best;
        break;
      }
    }
    const double loss = training_loss(cloud, train, opts.ssim_weight, opts.render, &grads);
    if (it == 0) rep.initial_loss = loss;
    rep.loss_history.push_back(loss);
    rep.iterations = it + 1;
    // Rounding-level losses never count, so an exact optimum is not flagged.
    const bool high = loss > opts.divergence_factor * rep.initial_loss && loss > 1e-9;
    above = high || !std::isfinite(loss) ? above + 1 : 0;
    if (above >= opts.divergence_patience) {
      if (opts.throw_on_divergence)
        fail(ErrorCode::DivergenceDetected, "training loss above " + std::to_string(opts.divergence_factor) +
                                                "x its initial value for " + std::to_string(above) + " iterations");
      cloud = best;
      break;
    }
    apply_step(cloud, grads, opts.lr, pixels);
  }
  if (!heldout.empty() && !rep.stopped_early) {
    const double h = training_loss(cloud, heldout, opts.ssim_weight, opts.render);
    if (h > rep.best_heldout_loss) cloud = best;
  }
  rep.final_loss = training_loss(cloud, train, opts.ssim_weight, opts.render);
  if (report) *report = rep;
  return cloud;
}

}  // namespace rigrecon::splat
