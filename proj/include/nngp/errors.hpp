#pragma once

#include <stdexcept>
#include <string>

namespace nngp {

/// Base of every error raised by the library. `exit_code()` is the process
/// status the command-line tool reports for this error category.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

/// Shapes or lengths that do not line up.
class dimension_error : public error {
 public:
  using error::error;
};

/// Argument outside the mathematical domain of an operation.
class domain_error : public error {
 public:
  using error::error;
};

/// Input data or an externally supplied structure is inconsistent.
class validation_error : public error {
 public:
  using error::error;
};

/// Missingness layout that is not in K-pattern (row-grouped) form.
class structure_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 3; }
};

/// A method was asked to run on data it cannot handle.
class unsupported_input_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 4; }
};

/// Binary column holding values outside {0, 1}.
class encoding_error : public error {
 public:
  using error::error;
};

/// Cholesky factorization failed even at the largest jitter.
class singular_kernel_error : public error {
 public:
  singular_kernel_error(const std::string& what, double condition_estimate)
      : error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_estimate_; }
  int exit_code() const noexcept override { return 5; }

 private:
  double condition_estimate_;
};

/// Covariance handed to the sampler is indefinite beyond tolerance.
class sampling_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 5; }
};

/// Design matrix without full column rank.
class singular_design_error : public error {
 public:
  using error::error;
  int exit_code() const noexcept override { return 5; }
};

}  // namespace nngp
