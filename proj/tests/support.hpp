#pragma once

// Test-only helpers: random E2 messages and scratch directories.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "e2loop/wire.hpp"

namespace e2test {

using Rng = std::mt19937_64;

inline std::string random_string(Rng& rng, std::size_t max_len = 40) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> byte(0, 255);
  std::string s(len(rng), '\0');
  for (auto& c : s) c = static_cast<char>(byte(rng));
  return s;
}

// Any bit pattern except NaN, so that structural equality is meaningful.
inline double random_double(Rng& rng) {
  for (;;) {
    double d = std::bit_cast<double>(rng());
    if (!std::isnan(d)) return d;
  }
}

inline std::vector<e2loop::wire::Measurement> random_measurements(Rng& rng, std::size_t max_n) {
  std::uniform_int_distribution<std::size_t> n(0, max_n);
  std::vector<e2loop::wire::Measurement> out(n(rng));
  for (auto& m : out) m = {random_string(rng, 24), random_double(rng)};
  return out;
}

inline e2loop::wire::E2Message random_message(Rng& rng) {
  using namespace e2loop::wire;
  std::uniform_int_distribution<int> pick(0, 6);
  auto u16 = [&] { return static_cast<uint16_t>(rng()); };
  auto u32 = [&] { return static_cast<uint32_t>(rng()); };
  auto coin = [&] { return (rng() & 1) != 0; };
  switch (pick(rng)) {
    case 0: {
      E2SetupRequest m;
      m.node = {random_string(rng, 12), coin() ? NodeKind::Enb : NodeKind::Gnb, u32()};
      std::uniform_int_distribution<int> n(0, 4);
      for (int i = n(rng); i > 0; --i) {
        m.functions.push_back({u16(), static_cast<uint8_t>(rng()), random_string(rng)});
      }
      return m;
    }
    case 1: {
      E2SetupResponse m;
      std::uniform_int_distribution<int> n(0, 6);
      for (int i = n(rng); i > 0; --i) m.accepted_function_ids.push_back(u16());
      return m;
    }
    case 2: return SubscriptionRequest{u32(), u16(), u32()};
    case 3: return SubscriptionResponse{u32(), coin()};
    case 4: {
      RicIndication m;
      m.request_id = u32();
      m.function_id = u16();
      m.sequence_number = u32();
      m.header = {rng(), random_string(rng, 30)};
      m.body.unit = static_cast<UnitType>(std::uniform_int_distribution<int>(0, 2)(rng));
      m.body.cell_measurements = random_measurements(rng, 4);
      std::uniform_int_distribution<int> n(0, 5);
      for (int i = n(rng); i > 0; --i) m.body.ue_measurements.push_back({rng(), random_measurements(rng, 6)});
      return m;
    }
    case 5: return RicControlRequest{u16(), ControlAction{ControlKind::Handover, rng(), u32(), u32()}};
    default: return RicControlAcknowledge{coin() ? AckStatus::Success : AckStatus::Rejected, random_string(rng)};
  }
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("e2loop-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

}  // namespace e2test
