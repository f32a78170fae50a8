#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ilopn {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class NonFiniteState : public Error {
 public:
  NonFiniteState(std::size_t index, const std::string& label)
      : Error("non-finite value in state equation " + std::to_string(index) + " (" + label + ")"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Solver family: anything that means "no usable steady state".
class SolverError : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public SolverError {
 public:
  NoConvergence(int iterations, double residual)
      : SolverError("shooting did not converge after " + std::to_string(iterations) +
                    " iterations (scaled residual " + std::to_string(residual) +
                    "); lock not detected"),
        iterations_(iterations),
        residual_(residual) {}
  int iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  int iterations_;
  double residual_;
};

class LockNotDetected : public SolverError {
 public:
  using SolverError::SolverError;
};

class UnderResolved : public SolverError {
 public:
  using SolverError::SolverError;
};

class UnstablePSS : public SolverError {
 public:
  using SolverError::SolverError;
};

class NearDegenerate : public SolverError {
 public:
  using SolverError::SolverError;
};

class BiorthogonalityLoss : public SolverError {
 public:
  BiorthogonalityLoss(double err)
      : SolverError("dual/direct Floquet vectors lost biorthogonality (max error " +
                    std::to_string(err) + ")"),
        error_(err) {}
  double error() const { return error_; }

 private:
  double error_;
};

class UncoupledSingularity : public SolverError {
 public:
  using SolverError::SolverError;
};

class ZeroCarrier : public SolverError {
 public:
  using SolverError::SolverError;
};

class InsufficientRecord : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace ilopn
