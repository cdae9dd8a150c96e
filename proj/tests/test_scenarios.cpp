#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "catch_amalgamated.hpp"
#include "provlab/error.hpp"
#include "provlab/scenarios.hpp"

using namespace provlab;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run cli(const std::string& args) {
  Run r;
  const std::string cmd = std::string(PROVLAB_CLI) + " " + args + " 2>/dev/null";
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
  const int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("provlab-" + std::to_string(::getpid()) + "-" + name);
}

}  // namespace

TEST_CASE("every scenario passes", "[scenarios]") {
  for (const auto& name : scenario::names()) {
    const auto r = scenario::run(name, 7);
    INFO(name << "\n" << r.to_json().dump(2));
    CHECK(r.pass());
    CHECK_FALSE(r.steps.empty());
    CHECK(r.to_json().at("scenario") == name);
    CHECK(r.to_json().at("pass") == true);
  }
}

TEST_CASE("same seed, same bytes", "[scenarios]") {
  for (const auto* name : {"token-case-1", "isolation-two-devices", "proxy-transparency"}) {
    const auto a = scenario::run(name, 11);
    const auto b = scenario::run(name, 11);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.capture == b.capture);
  }
  CHECK(scenario::run("token-case-1", 11).capture != scenario::run("token-case-1", 12).capture);
}

TEST_CASE("unknown scenario", "[scenarios]") {
  try {
    scenario::run("token-case-9", 1);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownScenario);
  }
}

TEST_CASE("captured traffic decodes to what the phone sent", "[scenarios]") {
  for (const auto& [name, len] : {std::pair{"token-case-1", 16}, {"token-case-3", 32}}) {
    const auto r = scenario::run(name, 3);
    std::istringstream in(r.capture);
    const auto log = netsim::CaptureLog::read_jsonl(in);
    const auto attempts = scenario::decode_capture(log.snapshot());
    REQUIRE_FALSE(attempts.empty());
    for (const auto& a : attempts) CHECK(a.fields.token.size() == std::size_t(len));
  }
  CHECK_THROWS_AS(scenario::decode_capture({}), Error);
}

TEST_CASE("command line tool", "[scenarios][cli]") {
  auto ls = cli("list");
  CHECK(ls.status == 0);
  CHECK(lines(ls.out) == scenario::names());

  const auto report = scenario::run("token-case-1", 5).to_json();
  auto sc = cli("scenario token-case-1 --seed 5");
  CHECK(sc.status == 0);
  CHECK(json::parse(sc.out) == report);

  const auto cap = scratch("cap.jsonl");
  const auto rep = scratch("rep.json");
  sc = cli("scenario token-case-3 --seed 5 --report " + rep.string() + " --capture " + cap.string());
  CHECK(sc.status == 0);
  CHECK(lines(sc.out).back() == "token-case-3: pass");
  std::ifstream rf(rep);
  CHECK(json::parse(rf).at("pass") == true);

  const auto dec = cli("decode " + cap.string());
  CHECK(dec.status == 0);
  CHECK(dec.out.find("token:") != std::string::npos);
  CHECK(dec.out.find("(32 chars)") != std::string::npos);
  std::filesystem::remove(cap);
  std::filesystem::remove(rep);

  CHECK(cli("scenario no-such-thing").status == 1);
  CHECK(cli("decode /nonexistent/cap.jsonl").status == 1);

  const auto bmp = std::string(PROVLAB_FIXTURES) + "/secret2.bmp";
  const auto rk = cli("r-keys 8c4wxjarqdtnuju4wut5 " + bmp);
  CHECK(rk.status == 0);
  CHECK(lines(rk.out) == std::vector<std::string>{
                             "opening: " + bmp,
                             "read 22554 bytes",
                             "str hash: 0x97508b70",
                             "keys_cnt: 1",
                             "[0] offs = 0x0000265e",
                             "[KEY] [0] str: 4j8vqy4egph3thd7fdchk435hjudwsey",
                         });
  CHECK(cli("r-keys not-the-seed " + bmp).status == 2);

  const auto out = scratch("embedded.bmp");
  CHECK(cli("embed-secret s33d abcdef0123 " + bmp + " " + out.string()).status == 0);
  const auto back = cli("r-keys s33d " + out.string());
  CHECK(back.status == 0);
  CHECK(lines(back.out).back() == "[KEY] [0] str: abcdef0123");
  std::filesystem::remove(out);
}
