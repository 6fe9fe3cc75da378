#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blockspike {

/// Failure categories shared by every module.
enum class Errc {
  // model
  BadK,
  NonSymmetricS,
  NonPositiveEntry,
  RhoNotSimplex,
  IndexOutOfRange,
  EmptySubset,
  FullSubset,
  // linalg
  NonFinite,
  Singular,
  // qve
  NoConvergence,
  InsideSupport,
  CertificateRejected,
  SingularSystem,
  SingularJacobian,
  BracketFailure,
  // theory
  NotSupercritical,
  CriticalPhase,
  SignAnomaly,
  // sim
  NTooSmall,
  GridTooCoarse,
  // io / cli
  BadConfig,
};

std::string_view to_string(Errc code);

/// True for errors caused by user input rather than by a numerical failure.
bool is_config_error(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string module, std::string operation, const std::string& detail)
      : std::runtime_error(module + "::" + operation + ": " + std::string(to_string(code)) +
                           (detail.empty() ? "" : " (" + detail + ")")),
        code_(code),
        module_(std::move(module)),
        operation_(std::move(operation)) {}

  Errc code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& operation() const noexcept { return operation_; }

 private:
  Errc code_;
  std::string module_;
  std::string operation_;
};

}  // namespace blockspike
