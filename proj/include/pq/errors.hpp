#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pq {

// Root of every error raised by the library. The CLI maps each subclass to
// its own exit code (see tools/pqtail.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An mgf was evaluated outside its region of convergence.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PreconditionFailed : public Error {
 public:
  using Error::Error;
};

// Mean arrivals do not stay below both mean service capacities.
class UnstableModel : public Error {
 public:
  UnstableModel(const std::string& what, double ea, double es1, double es2)
      : Error(what), ea_(ea), es1_(es1), es2_(es2) {}
  double arrival_mean() const { return ea_; }
  double service1_mean() const { return es1_; }
  double service2_mean() const { return es2_; }

 private:
  double ea_, es1_, es2_;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, std::uint64_t iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}
  std::uint64_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::uint64_t iterations_;
  double residual_;
};

// Mass lost past the truncation boundary exceeded the configured budget.
class TruncationError : public Error {
 public:
  using Error::Error;
};

class NoLundbergRoot : public Error {
 public:
  using Error::Error;
};

enum class CramerFailure { kDomainExhausted, kNoConvergence, kTrivialRootOnly };

inline const char* to_string(CramerFailure f) {
  switch (f) {
    case CramerFailure::kDomainExhausted: return "domain-exhausted";
    case CramerFailure::kNoConvergence: return "no-convergence";
    case CramerFailure::kTrivialRootOnly: return "trivial-root-only";
  }
  return "unknown";
}

class NoCramerRoot : public Error {
 public:
  NoCramerRoot(CramerFailure reason, const std::string& detail)
      : Error(std::string("no Cramer root (") + to_string(reason) + "): " + detail),
        reason_(reason) {}
  CramerFailure reason() const { return reason_; }

 private:
  CramerFailure reason_;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Walk coordinates left the representable range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

}  // namespace pq
