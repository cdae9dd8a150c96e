#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace provlab {

enum class Errc {
  // netsim
  DuplicateSsid,
  DuplicateEndpoint,
  InvalidLength,
  UnknownSsid,
  UnknownEndpoint,
  WrongPassphrase,
  NotJoined,
  PeerUnreachable,
  // dpl
  FieldTooLong,
  BadTokenLength,
  BadVersion,
  TruncatedPayload,
  PayloadTooLong,
  InvalidRounds,
  // secrets
  EmptyKeyPart,
  MissingSign,
  AuthFailure,
  BadEncoding,
  InsufficientCapacity,
  NotUncompressed24Bit,
  MagicMismatch,
  // protocol / cloud
  BadSignature,
  UnknownBundle,
  UnknownAction,
  BadRequest,
  MalformedFrame,
  CorruptSnapshot,
  UnknownDevice,
  // device
  NotRegistered,
  UnknownCommand,
  WifiJoinFailed,
  CloudUnreachable,
  // provisioner
  UnknownRegion,
  CloudRejected,
  Unreachable,
  Timeout,
  DeviceOffline,
  // proxy
  AlreadyAssigned,
  BindRejected,
  PolicyDenied,
  UpstreamRejected,
  // cli
  UnknownScenario,
  NoProvisioningTraffic,
  Io,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  explicit Error(Errc code, const std::string& detail = {});

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace provlab
