// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ichor/errors.hpp"
#include "ichor/model.hpp"

namespace ichor {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// lr = base*(s+1)/S_w during warmup, then cosine decay to 0 over the
/// remaining steps. The schedule advances per optimizer step.
inline double lr_at(std::int64_t step, double base_lr, int warmup_epochs, int epochs,
                    std::int64_t steps_per_epoch) {
  const std::int64_t s_w = static_cast<std::int64_t>(warmup_epochs) * steps_per_epoch;
  const std::int64_t total = static_cast<std::int64_t>(epochs) * steps_per_epoch;
  if (step < 0 || step >= total)
    throw ConfigError("schedule step " + std::to_string(step) + " out of range [0, " +
                      std::to_string(total) + ")");
  if (step < s_w) return base_lr * (static_cast<double>(step + 1) / static_cast<double>(s_w));
  const double t = static_cast<double>(step - s_w) / static_cast<double>(total - s_w);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * t));
}

/// Scales all gradients by max_norm/||g|| when the global L2 norm exceeds
/// max_norm. No-op when max_norm <= 0.
template <class T>
double clip_grad_norm(std::vector<ParamRef<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (auto& g : grads) sq += static_cast<double>(g.tensor->template cast<double>().squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& g : grads) *g.tensor *= s;
  }
  return norm;
}

/// AdamW with decoupled weight decay:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
template <class T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  void init(const std::vector<ParamRef<T>>& params) {
    m_.clear();
    v_.clear();
    for (const auto& p : params) {
      m_.emplace_back(Mat<T>::Zero(p.tensor->rows(), p.tensor->cols()));
      v_.emplace_back(Mat<T>::Zero(p.tensor->rows(), p.tensor->cols()));
    }
    t_ = 0;
  }

  void step(std::vector<ParamRef<T>>& params, const std::vector<ParamRef<T>>& grads, double lr) {
    if (params.size() != grads.size() || params.size() != m_.size())
      throw InternalError("optimizer state does not match the parameter list");
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_))));
    const T eps = static_cast<T>(cfg_.eps);
    const T wd = static_cast<T>(cfg_.weight_decay);
    const T lr_t = static_cast<T>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Mat<T>& g = *grads[i].tensor;
      if (!g.allFinite())
        throw NumericError("non-finite gradient for tensor " + grads[i].name);
      Mat<T>& p = *params[i].tensor;
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw InternalError("gradient shape mismatch for tensor " + grads[i].name);
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (T(1) - b2) * g.array().square();
      p.array() -=
          lr_t * ((c1 * m_[i].array()) / ((c2 * v_[i].array()).sqrt() + eps) + wd * p.array());
    }
  }

  std::int64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::vector<Mat<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace ichor
