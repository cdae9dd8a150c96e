#include "provlab/error.hpp"

namespace provlab {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::DuplicateSsid: return "DuplicateSsid";
    case Errc::DuplicateEndpoint: return "DuplicateEndpoint";
    case Errc::InvalidLength: return "InvalidLength";
    case Errc::UnknownSsid: return "UnknownSsid";
    case Errc::UnknownEndpoint: return "UnknownEndpoint";
    case Errc::WrongPassphrase: return "WrongPassphrase";
    case Errc::NotJoined: return "NotJoined";
    case Errc::PeerUnreachable: return "PeerUnreachable";
    case Errc::FieldTooLong: return "FieldTooLong";
    case Errc::BadTokenLength: return "BadTokenLength";
    case Errc::BadVersion: return "BadVersion";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::PayloadTooLong: return "PayloadTooLong";
    case Errc::InvalidRounds: return "InvalidRounds";
    case Errc::EmptyKeyPart: return "EmptyKeyPart";
    case Errc::MissingSign: return "MissingSign";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::BadEncoding: return "BadEncoding";
    case Errc::InsufficientCapacity: return "InsufficientCapacity";
    case Errc::NotUncompressed24Bit: return "NotUncompressed24Bit";
    case Errc::MagicMismatch: return "MagicMismatch";
    case Errc::BadSignature: return "BadSignature";
    case Errc::UnknownBundle: return "UnknownBundle";
    case Errc::UnknownAction: return "UnknownAction";
    case Errc::BadRequest: return "BadRequest";
    case Errc::MalformedFrame: return "MalformedFrame";
    case Errc::CorruptSnapshot: return "CorruptSnapshot";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::NotRegistered: return "NotRegistered";
    case Errc::UnknownCommand: return "UnknownCommand";
    case Errc::WifiJoinFailed: return "WifiJoinFailed";
    case Errc::CloudUnreachable: return "CloudUnreachable";
    case Errc::UnknownRegion: return "UnknownRegion";
    case Errc::CloudRejected: return "CloudRejected";
    case Errc::Unreachable: return "Unreachable";
    case Errc::Timeout: return "Timeout";
    case Errc::DeviceOffline: return "DeviceOffline";
    case Errc::AlreadyAssigned: return "AlreadyAssigned";
    case Errc::BindRejected: return "BindRejected";
    case Errc::PolicyDenied: return "PolicyDenied";
    case Errc::UpstreamRejected: return "UpstreamRejected";
    case Errc::UnknownScenario: return "UnknownScenario";
    case Errc::NoProvisioningTraffic: return "NoProvisioningTraffic";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

namespace {
std::string format_message(Errc code, const std::string& detail) {
  std::string msg(to_string(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}
}  // namespace

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(format_message(code, detail)), code_(code), detail_(detail) {}

}  // namespace provlab
