#pragma once

#include "becfocus/errors.hpp"

#include <Eigen/Core>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

#include <cmath>
#include <string>

namespace becfocus::ode {

template <int Dim, typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Dim, 1>;

/// Adaptive Dormand-Prince 5(4) with continuous (dense) output.
///
/// Thin wrapper over odeint that adds step-size underflow detection and
/// exposes the last accepted step interval for dense sampling.
template <int Dim>
class DenseIntegrator {
public:
  using State = Vector<Dim>;

  DenseIntegrator(double abs_tol, double rel_tol, double min_step = 0.0)
      : stepper_(boost::numeric::odeint::make_dense_output(abs_tol, rel_tol, Base())),
        min_step_(min_step) {}

  void initialize(const State& x0, double t0, double dt0) { stepper_.initialize(x0, t0, dt0); }

  /// Performs one accepted step. The step may overshoot any target time;
  /// use `state_at` for values inside [previous_time(), time()].
  template <class Rhs>
  void step(Rhs&& rhs) {
    auto sys = [&rhs](const State& x, State& dxdt, double t) { dxdt = rhs(t, x); };
    stepper_.do_step(sys);
    const State& x = stepper_.current_state();
    if (!x.allFinite()) {
      throw StepSizeUnderflow(time(), "integration produced non-finite state at t=" + std::to_string(time()));
    }
    if (stepper_.current_time_step() < min_step_) {
      throw StepSizeUnderflow(time(), "step size underflow at t=" + std::to_string(time()));
    }
  }

  double time() const { return stepper_.current_time(); }
  double previous_time() const { return stepper_.previous_time(); }
  double step_size() const { return stepper_.current_time_step(); }
  const State& state() const { return stepper_.current_state(); }

  State state_at(double t) {
    State x;
    stepper_.calc_state(t, x);
    return x;
  }

private:
  using Base = boost::numeric::odeint::runge_kutta_dopri5<State, double, State, double,
                                                          boost::numeric::odeint::vector_space_algebra>;
  using Stepper = boost::numeric::odeint::dense_output_runge_kutta<
      boost::numeric::odeint::controlled_runge_kutta<Base>>;
  Stepper stepper_;
  double min_step_;
};

} // namespace becfocus::ode
