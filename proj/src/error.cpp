#include "blockspike/error.hpp"

namespace blockspike {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::BadK: return "BadK";
    case Errc::NonSymmetricS: return "NonSymmetricS";
    case Errc::NonPositiveEntry: return "NonPositiveEntry";
    case Errc::RhoNotSimplex: return "RhoNotSimplex";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::EmptySubset: return "EmptySubset";
    case Errc::FullSubset: return "FullSubset";
    case Errc::NonFinite: return "NonFinite";
    case Errc::Singular: return "Singular";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::InsideSupport: return "InsideSupport";
    case Errc::CertificateRejected: return "CertificateRejected";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::SingularJacobian: return "SingularJacobian";
    case Errc::BracketFailure: return "BracketFailure";
    case Errc::NotSupercritical: return "NotSupercritical";
    case Errc::CriticalPhase: return "CriticalPhase";
    case Errc::SignAnomaly: return "SignAnomaly";
    case Errc::NTooSmall: return "NTooSmall";
    case Errc::GridTooCoarse: return "GridTooCoarse";
    case Errc::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

bool is_config_error(Errc code) {
  switch (code) {
    case Errc::BadK:
    case Errc::NonSymmetricS:
    case Errc::NonPositiveEntry:
    case Errc::RhoNotSimplex:
    case Errc::IndexOutOfRange:
    case Errc::EmptySubset:
    case Errc::FullSubset:
    case Errc::NTooSmall:
    case Errc::BadConfig:
      return true;
    default:
      return false;
  }
}

}  // namespace blockspike
