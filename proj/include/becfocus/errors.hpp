#pragma once

#include <stdexcept>
#include <string>

namespace becfocus {

/// Invalid or inconsistent user configuration. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A numerical input that violates an operation's precondition.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A width dropped below the collapse floor during variational integration.
class CollapseDetected : public std::runtime_error {
public:
  CollapseDetected(double t, double width, const std::string& what)
      : std::runtime_error(what), time(t), min_width(width) {}
  double time;
  double min_width;
};

class StepSizeUnderflow : public std::runtime_error {
public:
  StepSizeUnderflow(double t, const std::string& what) : std::runtime_error(what), time(t) {}
  double time;
};

/// A real-time step whose embedded error estimate exceeds the tolerance.
class StepRejected : public std::runtime_error {
public:
  StepRejected(double err, double suggested, const std::string& what)
      : std::runtime_error(what), error(err), suggested_dt(suggested) {}
  double error;
  double suggested_dt;
};

class NonConvergence : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Profile is truncated above half maximum at a boundary.
class NoHalfCrossing : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace becfocus
