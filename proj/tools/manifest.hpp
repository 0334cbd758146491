#pragma once

// Run manifests: a JSON record of what produced an output file. The run id
// hashes the command, its arguments minus output destinations and verbosity,
// and the input digests, so repeated identical runs share an id and their CSV
// output stays byte-identical.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace gujiseg::cli {

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> args, std::string version)
      : command_(std::move(command)), args_(std::move(args)), version_(std::move(version)),
        started_(utc_now()) {}

  void add_input(const std::string& path, const std::string& contents) {
    inputs_.push_back({{"path", path}, {"sha256", sha256_hex(contents)}});
  }

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  std::string run_id() const {
    nlohmann::json key = {{"command", command_}, {"args", identity_args()}, {"inputs", inputs_}};
    return sha256_hex(key.dump()).substr(0, 16);
  }

  nlohmann::json finish(const std::vector<std::string>& outputs) const {
    return {{"tool", "gujiseg"},
            {"version", version_},
            {"run_id", run_id()},
            {"command", command_},
            {"args", args_},
            {"config", config_},
            {"seed", seed_},
            {"inputs", inputs_},
            {"outputs", outputs},
            {"started_at", started_},
            {"finished_at", utc_now()}};
  }

 private:
  std::vector<std::string> identity_args() const {
    static const std::vector<std::string> valued{"-o", "--out", "--manifest", "--stats"};
    static const std::vector<std::string> flags{"-q", "--quiet"};
    const auto has = [](const std::vector<std::string>& v, const std::string& a) {
      return std::find(v.begin(), v.end(), a) != v.end();
    };
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args_.size(); ++i) {
      const std::string& a = args_[i];
      if (has(flags, a)) continue;
      if (has(valued, a)) {
        ++i;
        continue;
      }
      const auto eq = a.find('=');
      if (eq != std::string::npos && has(valued, a.substr(0, eq))) continue;
      kept.push_back(a);
    }
    return kept;
  }

  std::string command_;
  std::vector<std::string> args_;
  std::string version_;
  std::string started_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json inputs_ = nlohmann::json::array();
  std::uint64_t seed_ = 0;
};

}  // namespace gujiseg::cli
