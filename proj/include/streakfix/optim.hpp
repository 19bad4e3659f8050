#pragma once

#include <cmath>
#include <vector>

#include "streakfix/networks.hpp"

namespace streakfix {

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction, holding one moment pair per parameter tensor.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<nn::Parameter<Scalar>*> params, AdamOptions opts)
      : params_(std::move(params)), opts_(opts) {
    for (auto* p : params_) {
      m_.push_back(Vector<Scalar>::Zero(p->size()));
      v_.push_back(Vector<Scalar>::Zero(p->size()));
    }
  }

  Adam(Network<Scalar>& net, AdamOptions opts) : Adam(collect(net), opts) {}

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    const Scalar b1 = Scalar(opts_.beta1), b2 = Scalar(opts_.beta2);
    const Scalar step = Scalar(opts_.lr / c1);
    const Scalar inv_c2 = Scalar(1.0 / c2);
    const Scalar eps = Scalar(opts_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= step * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    }
  }

  long steps() const { return t_; }
  const AdamOptions& options() const { return opts_; }

 private:
  static std::vector<nn::Parameter<Scalar>*> collect(Network<Scalar>& net) {
    std::vector<nn::Parameter<Scalar>*> out;
    net.visit([&](const std::string&, nn::Parameter<Scalar>& p) { out.push_back(&p); });
    return out;
  }

  std::vector<nn::Parameter<Scalar>*> params_;
  AdamOptions opts_;
  std::vector<Vector<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace streakfix
