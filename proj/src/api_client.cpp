#include "provlab/api_client.hpp"

#include <cctype>
#include <fstream>

#include "provlab/envelope.hpp"
#include "provlab/error.hpp"
#include "provlab/frame.hpp"
#include "provlab/http_lite.hpp"
#include "provlab/stego.hpp"

namespace provlab::app {

using nlohmann::json;

AppConfig load_app_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
    AppConfig c;
    j.at("bundleId").get_to(c.bundle_id);
    j.at("clientId").get_to(c.client_id);
    j.at("region").get_to(c.region);
    if (j.contains("userId")) j["userId"].get_to(c.user_id);
    const auto& k = j.at("keys");
    k.at("certHash").get_to(c.keys.cert_hash);
    k.at("secret1").get_to(c.keys.secret1);
    std::filesystem::path bmp_path = k.at("secret2-bmp-path").get<std::string>();
    if (bmp_path.is_relative()) bmp_path = path.parent_path() / bmp_path;
    const auto found = stego::extract(bmp::Image::read(bmp_path), k.at("seed").get<std::string>());
    c.keys.secret2 = found.record.keys.at(0);
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::BadRequest, "app config: " + std::string(e.what()));
  }
}

ApiClient::ApiClient(Simulation& sim, netsim::EndpointId self, AppConfig config, std::uint64_t seed)
    : sim_(sim), self_(std::move(self)), config_(std::move(config)),
      key_(secrets::derive_signing_key(config_.keys)), rng_(seed) {}

json ApiClient::make_fields(std::string_view action, const json& post) {
  json body = post;
  if (!body.contains("uid")) body["uid"] = config_.user_id;
  const auto id = rng_.hex(32);
  // request ids look like the app's uppercase UUIDs
  std::string request_id = id.substr(0, 8) + "-" + id.substr(8, 4) + "-" + id.substr(12, 4) + "-" +
                           id.substr(16, 4) + "-" + id.substr(20, 12);
  for (auto& ch : request_id) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));

  return json{{"time", sim_.clock().now()},
              {"lang", "en"},
              {"deviceId", config_.phone_id},
              {"et", "0.0.1"},
              {"osSystem", config_.os_system},
              {"bundleId", config_.bundle_id},
              {"lon", config_.lon},
              {"channel", "oem"},
              {"appVersion", config_.app_version},
              {"ttid", "appstore_ros"},
              {"v", "1.0"},
              {"sid", "az" + rng_.alnum(30)},
              {"platform", config_.platform},
              {"postData", secrets::seal_postdata(crypto::as_bytes(body.dump()), key_, rng_)},
              {"requestId", request_id},
              {"sdVersion", config_.sd_version},
              {"timeZoneId", "Europe/Berlin"},
              {"lat", config_.lat},
              {"clientId", config_.client_id},
              {"a", std::string(action)},
              {"appRnVersion", "5.29"}};
}

void ApiClient::sign(json& envelope) const { envelope["sign"] = secrets::sign_envelope(envelope, key_); }

json ApiClient::envelope(std::string_view action, const json& post) {
  auto e = make_fields(action, post);
  sign(e);
  return e;
}

json ApiClient::send(const netsim::EndpointId& cloud, const json& envelope) {
  auto& broker = sim_.broker();
  netsim::StreamId stream = 0;
  try {
    stream = broker.open_stream(self_, cloud, protocol::kAppPort);
  } catch (const Error& e) {
    throw Error(Errc::Unreachable, cloud.id + ": " + e.what());
  }
  http::Request req;
  req.headers["Host"] = cloud.id;
  req.headers["Content-Type"] = "application/json";
  req.body = envelope.dump();
  broker.write(stream, self_, http::serialize(req));
  sent_.push_back(envelope);

  http::ResponseParser parser;
  std::optional<http::Response> resp;
  bool closed = false;
  auto take = [&] {
    for (auto& ev : broker.drain(self_)) {
      auto* se = std::get_if<netsim::StreamEvent>(&ev);
      if (!se || se->stream != stream) continue;
      if (se->kind == netsim::StreamEvent::Kind::closed) closed = true;
      if (se->kind == netsim::StreamEvent::Kind::data) parser.feed(se->bytes);
    }
    if (!resp) resp = parser.next();
    return resp.has_value() || closed;
  };
  sim_.run_until(take);
  if (broker.stream_open(stream)) broker.close(stream, self_);
  if (!resp) throw Error(Errc::Unreachable, cloud.id + " did not answer");
  if (resp->status != 200) throw Error(Errc::Unreachable, cloud.id + " answered HTTP " + std::to_string(resp->status));
  try {
    return json::parse(resp->body);
  } catch (const json::exception& e) {
    throw Error(Errc::Unreachable, std::string("bad response body: ") + e.what());
  }
}

json ApiClient::call_envelope(const netsim::EndpointId& cloud, const json& envelope) {
  const auto r = send(cloud, envelope);
  if (!r.is_object() || !r.contains("success")) throw Error(Errc::CloudRejected, "BadResponse");
  bool verified = false;
  try {
    verified = secrets::verify_envelope(r, key_);
  } catch (const Error&) {
  }
  if (!r["success"].get<bool>()) {
    // unsigned refusals are still reported, they just cannot be trusted
    throw Error(Errc::CloudRejected, r.value("errorCode", std::string("Unknown")));
  }
  if (!verified) throw Error(Errc::CloudRejected, "BadResponseSignature");
  try {
    const auto plain = secrets::open_postdata(r.at("result").get<std::string>(), key_);
    return json::parse(plain.begin(), plain.end());
  } catch (const std::exception&) {
    throw Error(Errc::CloudRejected, "BadResponse");
  }
}

json ApiClient::call(const netsim::EndpointId& cloud, std::string_view action, const json& post) {
  return call_envelope(cloud, envelope(action, post));
}

std::string rejection_code(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->detail();
  return e.what();
}

}  // namespace provlab::app
