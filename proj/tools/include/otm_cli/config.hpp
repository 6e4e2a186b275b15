#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace otm::cli {

/// Typed access to a JSON config object. Every key read is recorded so that
/// finish() can reject the ones nobody asked for.
class ConfigReader {
 public:
  explicit ConfigReader(const nlohmann::json& j, std::string context = "config");

  bool has(const std::string& key) const;

  std::string string(const std::string& key, const std::optional<std::string>& fallback = {});
  std::size_t count(const std::string& key, const std::optional<std::size_t>& fallback = {});
  std::uint64_t seed(const std::string& key, const std::optional<std::uint64_t>& fallback = {});
  double real(const std::string& key, const std::optional<double>& fallback = {});
  bool boolean(const std::string& key, const std::optional<bool>& fallback = {});
  std::vector<std::size_t> counts(const std::string& key,
                                  const std::optional<std::vector<std::size_t>>& fallback = {});
  std::vector<std::string> strings(const std::string& key,
                                   const std::optional<std::vector<std::string>>& fallback = {});
  /// The raw value; throws ConfigError when the key is absent.
  const nlohmann::json& raw(const std::string& key);

  /// Throws ConfigError naming the first key that was never read.
  void finish() const;

 private:
  const nlohmann::json* find(const std::string& key);
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  const nlohmann::json& j_;
  std::string context_;
  std::set<std::string> used_;
};

/// Parses a config file; an absent path yields an empty object.
nlohmann::json load_config(const std::optional<std::filesystem::path>& path);

}  // namespace otm::cli
