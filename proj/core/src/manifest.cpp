#include "pamlab/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "pamlab/errors.hpp"

#ifndef PAMLAB_BUILD_ID
#define PAMLAB_BUILD_ID "unknown"
#endif

namespace pamlab {

namespace {

std::string utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

struct RunManifest::Impl {
  nlohmann::ordered_json j;

  nlohmann::ordered_json& at_path(const std::string& path) {
    nlohmann::ordered_json* cur = &j;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = path.find('.', start);
      const std::string part = path.substr(
          start, dot == std::string::npos ? std::string::npos : dot - start);
      if (part.empty()) throw ConfigError("empty manifest path segment");
      if (dot == std::string::npos) return (*cur)[part];
      cur = &(*cur)[part];
      start = dot + 1;
    }
  }
};

RunManifest::RunManifest(const std::string& experiment,
                         const std::string& subcommand)
    : impl_(std::make_unique<Impl>()) {
  impl_->j["experiment"] = experiment;
  impl_->j["subcommand"] = subcommand;
  impl_->j["build"] = PAMLAB_BUILD_ID;
  impl_->j["created_utc"] = utc_now();
  impl_->j["seed_derivation"] =
      "streams are split as substream(parent, index) with the splitmix64 "
      "increment; listed values are the roots actually handed to each module";
  impl_->j["master_seed"] = nullptr;
  impl_->j["config"] = nlohmann::ordered_json::object();
  impl_->j["derived_seeds"] = nlohmann::ordered_json::object();
  impl_->j["results"] = nlohmann::ordered_json::object();
  impl_->j["warnings"] = nlohmann::ordered_json::array();
  impl_->j["wall_clock_seconds"] = nullptr;
  impl_->j["status"] = "running";
}

RunManifest::~RunManifest() = default;
RunManifest::RunManifest(RunManifest&&) noexcept = default;
RunManifest& RunManifest::operator=(RunManifest&&) noexcept = default;

void RunManifest::set_string(const std::string& path,
                             const std::string& value) {
  impl_->at_path(path) = value;
}

void RunManifest::set_u64(const std::string& path, std::uint64_t value) {
  impl_->at_path(path) = value;
}

void RunManifest::set_int(const std::string& path, long long value) {
  impl_->at_path(path) = value;
}

void RunManifest::set_double(const std::string& path, double value) {
  impl_->at_path(path) = value;
}

void RunManifest::set_bool(const std::string& path, bool value) {
  impl_->at_path(path) = value;
}

void RunManifest::master_seed(std::uint64_t seed) {
  impl_->j["master_seed"] = seed;
}

void RunManifest::derived_seed(const std::string& name, std::uint64_t value) {
  impl_->j["derived_seeds"][name] = value;
}

void RunManifest::add_warning(const std::string& text) {
  impl_->j["warnings"].push_back(text);
}

void RunManifest::finalize(double wall_seconds, const std::string& status) {
  impl_->j["wall_clock_seconds"] = wall_seconds;
  impl_->j["status"] = status;
}

std::string RunManifest::to_json() const { return impl_->j.dump(2) + "\n"; }

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  out << to_json();
  if (!out) throw IoError("failed writing manifest: " + path);
}

}  // namespace pamlab
