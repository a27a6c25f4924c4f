#include <doctest.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "e2loop/e2loop.h"
#include "support.hpp"

namespace {

struct Config {
  e2l_config* p = e2l_config_new();
  ~Config() { e2l_config_free(p); }
  e2l_status set(const char* k, const std::string& v) { return e2l_config_set(p, k, v.c_str()); }
};

std::string report_json(const e2l_report* r) {
  size_t len = 0;
  REQUIRE(e2l_report_json(r, nullptr, 0, &len) == E2L_ERR_BUFFER);
  std::string s(len + 1, '\0');
  REQUIRE(e2l_report_json(r, s.data(), s.size(), &len) == E2L_OK);
  s.resize(len);
  return s;
}

uint16_t closed_port() {
  // Bind through a throwaway RIC, then stop it.
  Config c;
  c.set("listen-addr", "127.0.0.1:0");
  c.set("xapp", "none");
  e2l_ric* ric = nullptr;
  REQUIRE(e2l_ric_start(c.p, &ric) == E2L_OK);
  uint16_t port = e2l_ric_port(ric);
  e2l_ric_stop(ric);
  return port;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strcmp(e2l_version(), "0.1.0") == 0);
  CHECK(std::strcmp(e2l_status_name(E2L_OK), "OK") == 0);
  CHECK(std::strcmp(e2l_status_name(E2L_ERR_CONNECT), "CONNECT") == 0);
}

TEST_CASE("configuration errors") {
  Config c;
  CHECK(c.set("no-such-key", "1") == E2L_ERR_CONFIG);
  CHECK(std::string(e2l_last_error()).find("no-such-key") != std::string::npos);
  CHECK(c.set("ues", "abc") == E2L_ERR_CONFIG);
  CHECK(c.set("xapp", "other") == E2L_ERR_CONFIG);
  CHECK(c.set("ues", "3") == E2L_OK);
  CHECK(e2l_config_set(nullptr, "ues", "3") == E2L_ERR_ARGUMENT);

  CHECK(c.set("period-ms", "15") == E2L_OK);
  e2l_report* r = nullptr;
  CHECK(e2l_run(c.p, &r) == E2L_ERR_CONFIG);
  CHECK(r == nullptr);
}

TEST_CASE("config files") {
  e2test::ScratchDir dir("capi-cfg");
  auto path = (dir.path() / "run.cfg").string();
  {
    std::ofstream f(path);
    f << "# comment\nmode = offline\n\nsim-time-ms = 1000  # trailing\n";
  }
  Config c;
  CHECK(e2l_config_load_file(c.p, path.c_str()) == E2L_OK);
  {
    std::ofstream f(path);
    f << "mode offline\n";
  }
  CHECK(e2l_config_load_file(c.p, path.c_str()) == E2L_ERR_CONFIG);
  CHECK(e2l_config_load_file(c.p, (dir.path() / "missing.cfg").string().c_str()) == E2L_ERR_IO);
}

TEST_CASE("offline run through the C interface") {
  e2test::ScratchDir dir("capi-offline");
  Config c;
  c.set("mode", "offline");
  c.set("out", dir.path().string());
  e2l_report* r = nullptr;
  REQUIRE(e2l_run(c.p, &r) == E2L_OK);
  CHECK(e2l_report_exit_status(r) == 0);
  CHECK(e2l_report_node_count(r) == 0);

  auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["mode"] == "offline");
  CHECK(j["simulation"]["reports"] == 280);

  size_t len = 0;
  char small[4];
  CHECK(e2l_report_table(r, small, sizeof small, &len) == E2L_ERR_BUFFER);
  CHECK(len > sizeof small);
  std::string table(len + 1, '\0');
  CHECK(e2l_report_table(r, table.data(), table.size(), &len) == E2L_OK);
  CHECK(table.find("Number of Packets") != std::string::npos);
  e2l_report_free(r);
}

TEST_CASE("a refused RIC connection maps to CONNECT") {
  Config c;
  c.set("e2-term-ip", "127.0.0.1");
  c.set("e2-term-port", std::to_string(closed_port()));
  c.set("e2-local-port-base", "0");
  c.set("write-report", "false");
  e2l_report* r = nullptr;
  CHECK(e2l_run(c.p, &r) == E2L_ERR_CONNECT);
  CHECK(std::string(e2l_last_error()).find("ConnectRefused") != std::string::npos);
}

TEST_CASE("frame description") {
  const uint8_t resp[] = {0xE2, 0xAF, 0x01, 0x02, 0x00, 0x00, 0x00, 0x04, 0x00, 0x01, 0x00, 0xC8};
  size_t len = 0;
  CHECK(e2l_frame_describe(resp, sizeof resp, nullptr, 0, &len) == E2L_ERR_BUFFER);
  std::string out(len + 1, '\0');
  REQUIRE(e2l_frame_describe(resp, sizeof resp, out.data(), out.size(), &len) == E2L_OK);
  out.resize(len);
  auto j = nlohmann::json::parse(out);
  CHECK(j["accepted"] == nlohmann::json::array({200}));

  const uint8_t bad[] = {0xE2, 0xAE, 0x01, 0x02, 0x00, 0x00, 0x00, 0x00};
  char buf[256];
  CHECK(e2l_frame_describe(bad, sizeof bad, buf, sizeof buf, &len) == E2L_ERR_DECODE);
  CHECK(std::string(e2l_last_error()).find("BadMagic") != std::string::npos);
}

TEST_CASE("remote run against a standalone RIC") {
  Config rc;
  rc.set("listen-addr", "127.0.0.1:0");
  rc.set("xapp", "none");
  e2l_ric* ric = nullptr;
  REQUIRE(e2l_ric_start(rc.p, &ric) == E2L_OK);

  e2test::ScratchDir dir("capi-remote");
  Config c;
  c.set("e2-term-ip", "127.0.0.1");
  c.set("e2-term-port", std::to_string(e2l_ric_port(ric)));
  c.set("e2-local-port-base", "0");
  c.set("realtime-factor", "0");
  c.set("sim-time-ms", "500");
  c.set("out", dir.path().string());
  e2l_report* r = nullptr;
  REQUIRE(e2l_run(c.p, &r) == E2L_OK);
  CHECK(e2l_report_node_count(r) == 5);
  auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["mode"] == "remote");
  // Five report periods: two units on the eNB, three on each gNB.
  CHECK(j["message_histogram"]["RicIndication"] == 5 * 2 + 4 * 5 * 3);
  e2l_report_free(r);

  for (int i = 0; i < 3000 && e2l_ric_indications(ric) < 70; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  CHECK(e2l_ric_indications(ric) == 70);
  CHECK(e2l_ric_controls(ric) == 0);
  e2l_ric_stop(ric);
}
