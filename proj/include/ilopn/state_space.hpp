#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace ilopn {

// Autonomous ODE  x' = f(x)  driven by unit-intensity white noise through B(x).
// The hot path (eval) takes spans and writes into caller storage, so stepping
// loops never allocate.
class StateSpaceModel {
 public:
  using Field = std::function<void(std::span<const double>, std::span<double>)>;
  using MatrixFn = std::function<void(std::span<const double>, Eigen::Ref<Eigen::MatrixXd>)>;

  StateSpaceModel() = default;

  StateSpaceModel(std::vector<std::string> state_labels, std::vector<std::string> noise_labels,
                  Field f, MatrixFn jac, MatrixFn noise, bool constant_noise = true)
      : impl_(std::make_shared<Impl>()) {
    impl_->state_labels = std::move(state_labels);
    impl_->noise_labels = std::move(noise_labels);
    impl_->f = std::move(f);
    impl_->jac = std::move(jac);
    impl_->noise = std::move(noise);
    impl_->constant_noise = constant_noise;
    impl_->node_capacitance.assign(impl_->state_labels.size(), 0.0);
    impl_->start = Eigen::VectorXd::Zero(dim());
  }

  std::size_t dim() const { return impl_ ? impl_->state_labels.size() : 0; }
  std::size_t noise_count() const { return impl_ ? impl_->noise_labels.size() : 0; }
  const std::vector<std::string>& state_labels() const { return impl_->state_labels; }
  const std::vector<std::string>& noise_labels() const { return impl_->noise_labels; }
  bool constant_noise() const { return impl_->constant_noise; }

  std::size_t state_index(const std::string& label) const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (impl_->state_labels[i] == label) return i;
    throw IndexError("unknown state '" + label + "'");
  }

  // Unchecked evaluation, used inside integrators.
  void eval(std::span<const double> x, std::span<double> dx) const { impl_->f(x, dx); }

  Eigen::VectorXd eval_vector_field(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != dim())
      throw IndexError("state vector has length " + std::to_string(x.size()) + ", model expects " +
                       std::to_string(dim()));
    for (std::size_t i = 0; i < dim(); ++i)
      if (!std::isfinite(x[i])) throw NonFiniteState(i, impl_->state_labels[i]);
    Eigen::VectorXd dx(dim());
    eval(std::span<const double>(x.data(), dim()), std::span<double>(dx.data(), dim()));
    for (std::size_t i = 0; i < dim(); ++i)
      if (!std::isfinite(dx[i])) throw NonFiniteState(i, impl_->state_labels[i]);
    return dx;
  }

  // J must already be dim() x dim().
  void jacobian(std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> J) const { impl_->jac(x, J); }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd J(dim(), dim());
    impl_->jac(std::span<const double>(x.data(), dim()), J);
    return J;
  }

  void noise_matrix(std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> B) const { impl_->noise(x, B); }

  Eigen::MatrixXd noise_matrix(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd B(dim(), noise_count());
    impl_->noise(std::span<const double>(x.data(), dim()), B);
    return B;
  }

  // Capacitance seen by a voltage state (F); zero for states that are not node voltages.
  double node_capacitance(std::size_t i) const { return impl_->node_capacitance.at(i); }
  const std::vector<double>& node_capacitances() const { return impl_->node_capacitance; }

  // Ring-up hints: a point near the unstable equilibrium and a rough period.
  const Eigen::VectorXd& start_state() const { return impl_->start; }
  double period_hint() const { return impl_->period_hint; }

  StateSpaceModel& set_node_capacitance(std::size_t i, double c) {
    mutate().node_capacitance.at(i) = c;
    return *this;
  }
  StateSpaceModel& set_start_state(Eigen::VectorXd x) {
    mutate().start = std::move(x);
    return *this;
  }
  StateSpaceModel& set_period_hint(double T) {
    mutate().period_hint = T;
    return *this;
  }

  // Same dynamics, every noise column multiplied by k.
  StateSpaceModel with_noise_scaled(double k) const {
    StateSpaceModel out = *this;
    auto base = impl_->noise;
    out.mutate().noise = [base, k](std::span<const double> x, Eigen::Ref<Eigen::MatrixXd> B) {
      base(x, B);
      B *= k;
    };
    return out;
  }

  const Field& field() const { return impl_->f; }
  const MatrixFn& jacobian_fn() const { return impl_->jac; }
  const MatrixFn& noise_fn() const { return impl_->noise; }

 private:
  struct Impl {
    std::vector<std::string> state_labels;
    std::vector<std::string> noise_labels;
    Field f;
    MatrixFn jac;
    MatrixFn noise;
    bool constant_noise = true;
    std::vector<double> node_capacitance;
    Eigen::VectorXd start;
    double period_hint = 0.0;
  };

  Impl& mutate() {
    if (impl_.use_count() > 1) impl_ = std::make_shared<Impl>(*impl_);
    return *impl_;
  }

  std::shared_ptr<Impl> impl_;
};

// Central differences, step 1e-6*(1+|x_i|).
inline Eigen::MatrixXd finite_difference_jacobian(const StateSpaceModel& m, const Eigen::VectorXd& x) {
  const std::size_t n = m.dim();
  Eigen::MatrixXd J(n, n);
  Eigen::VectorXd xp = x, xm = x, fp(n), fm(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    m.eval({xp.data(), n}, {fp.data(), n});
    m.eval({xm.data(), n}, {fm.data(), n});
    J.col(j) = (fp - fm) / (2 * h);
    xp[j] = xm[j] = x[j];
  }
  return J;
}

}  // namespace ilopn
