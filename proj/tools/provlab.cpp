#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "provlab/bmp.hpp"
#include "provlab/error.hpp"
#include "provlab/scenarios.hpp"
#include "provlab/stego.hpp"

using namespace provlab;

namespace {

std::string mask(const std::string& s) {
  if (s.size() <= 2) return std::string(s.size(), '*');
  return s.substr(0, 1) + std::string(s.size() - 2, '*') + s.substr(s.size() - 1);
}

int cmd_scenario(const std::string& name, std::uint64_t seed, const std::string& report_path,
                 const std::string& capture_path, double drop, double dup) {
  if (const char* env = std::getenv("PROVLAB_SEED")) seed = std::stoull(env);
  const auto report = scenario::run(name, seed, {drop, dup, seed});
  const auto text = report.to_json().dump(2) + "\n";
  if (report_path.empty() || report_path == "-") {
    std::cout << text;
  } else {
    std::ofstream(report_path) << text;
    for (const auto& s : report.steps)
      std::cout << (s.pass ? "  ok   " : "  FAIL ") << s.expect << " -> " << s.observe << "\n";
    std::cout << name << ": " << (report.pass() ? "pass" : "FAIL") << "\n";
  }
  if (!capture_path.empty()) std::ofstream(capture_path) << report.capture;
  return report.pass() ? 0 : 1;
}

int cmd_decode(const std::string& path, bool unmask) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  const auto log = netsim::CaptureLog::read_jsonl(in);
  const auto attempts = scenario::decode_capture(log.snapshot());
  if (attempts.empty()) {
    std::cout << "provisioning traffic found but nothing decoded\n";
    return 1;
  }
  for (const auto& a : attempts) {
    std::cout << "[" << a.ssid << "] " << a.sender << (a.listener.empty() ? "" : " -> " + a.listener) << "\n"
              << "  ssid:       " << a.fields.ssid << "\n"
              << "  passphrase: " << (unmask ? a.fields.passphrase : mask(a.fields.passphrase)) << "\n"
              << "  token:      " << a.fields.token << " (" << a.fields.token.size() << " chars)\n";
  }
  return 0;
}

int cmd_r_keys(const std::string& seed, const std::string& path) {
  const auto image = bmp::Image::read(path);
  try {
    const auto result = stego::extract(image, seed);
    std::cout << stego::format_report(path, image.bytes().size(), result);
  } catch (const Error& e) {
    if (e.code() != Errc::MagicMismatch) throw;
    std::cerr << "opening: " << path << "\nread " << image.bytes().size() << " bytes\nno key record for this seed\n";
    return 2;
  }
  return 0;
}

int cmd_embed(const std::string& seed, const std::string& key, const std::string& in, const std::string& out) {
  stego::embed(bmp::Image::read(in), seed, stego::Record{{key}}).write(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"provlab: smart-home provisioning lab"};
  cli.require_subcommand(1);

  std::string name, report, capture;
  std::uint64_t seed = 1;
  double drop = 0.0, dup = 0.0;
  auto* sc = cli.add_subcommand("scenario", "run a named scenario");
  sc->add_option("name", name)->required();
  sc->add_option("--seed", seed, "simulation seed (PROVLAB_SEED overrides)");
  sc->add_option("--report", report, "write the JSON report here (stdout if omitted)");
  sc->add_option("--capture", capture, "write the capture log (JSONL) here");
  sc->add_option("--drop", drop, "broadcast drop probability")->check(CLI::Range(0.0, 1.0));
  sc->add_option("--dup", dup, "broadcast duplication probability")->check(CLI::Range(0.0, 1.0));

  auto* ls = cli.add_subcommand("list", "list scenarios");

  std::string capture_in;
  bool unmask = false;
  auto* dec = cli.add_subcommand("decode", "recover credentials from a capture log");
  dec->add_option("capture", capture_in)->required();
  dec->add_flag("--unmask", unmask, "print the passphrase in clear");

  std::string kseed, bmp_path;
  auto* rk = cli.add_subcommand("r-keys", "extract hidden keys from a BMP");
  rk->add_option("seed", kseed)->required();
  rk->add_option("file", bmp_path)->required();

  std::string eseed, ekey, ein, eout;
  auto* em = cli.add_subcommand("embed-secret", "hide a key in a BMP");
  em->add_option("seed", eseed)->required();
  em->add_option("key", ekey)->required();
  em->add_option("in", ein)->required();
  em->add_option("out", eout)->required();

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*sc) return cmd_scenario(name, seed, report, capture, drop, dup);
    if (*ls) {
      for (const auto& n : scenario::names()) std::cout << n << "\n";
      return 0;
    }
    if (*dec) return cmd_decode(capture_in, unmask);
    if (*rk) return cmd_r_keys(kseed, bmp_path);
    if (*em) return cmd_embed(eseed, ekey, ein, eout);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << (e.detail().empty() ? "" : ": " + e.detail()) << "\n";
    return e.code() == Errc::MagicMismatch ? 2 : 1;
  }
  return 0;
}
