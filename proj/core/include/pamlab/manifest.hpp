#pragma once

// Run manifest: everything needed to reproduce a run's numbers bitwise.
// Written before any result table, then rewritten at the end with timing,
// warnings, and summary figures.  Key order is insertion order, so files
// diff cleanly across runs.

#include <cstdint>
#include <memory>
#include <string>

namespace pamlab {

class RunManifest {
 public:
  // Stamps experiment, subcommand, build identifier, creation time, and the
  // seed-derivation rule used throughout (documented once here rather than
  // repeated per entry).
  RunManifest(const std::string& experiment, const std::string& subcommand);
  ~RunManifest();
  RunManifest(RunManifest&&) noexcept;
  RunManifest& operator=(RunManifest&&) noexcept;
  RunManifest(const RunManifest&) = delete;
  RunManifest& operator=(const RunManifest&) = delete;

  // Dotted paths create nested objects: set_u64("config.rates.M", 100).
  void set_string(const std::string& path, const std::string& value);
  void set_u64(const std::string& path, std::uint64_t value);
  void set_int(const std::string& path, long long value);
  void set_double(const std::string& path, double value);
  void set_bool(const std::string& path, bool value);

  void master_seed(std::uint64_t seed);
  // Records under derived_seeds; every stream root handed to a module.
  void derived_seed(const std::string& name, std::uint64_t value);
  void add_warning(const std::string& text);

  void finalize(double wall_seconds, const std::string& status);

  std::string to_json() const;                  // pretty-printed, stable order
  void write(const std::string& path) const;    // IoError on failure

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pamlab
