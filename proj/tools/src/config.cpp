#include "otm_cli/config.hpp"

#include <cmath>
#include <fstream>

#include "otm/error.hpp"

namespace otm::cli {

namespace {

bool is_count(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace

ConfigReader::ConfigReader(const nlohmann::json& j, std::string context)
    : j_(j), context_(std::move(context)) {
  if (!j_.is_object()) throw ConfigError(context_ + " must be a JSON object");
}

bool ConfigReader::has(const std::string& key) const { return j_.contains(key); }

const nlohmann::json* ConfigReader::find(const std::string& key) {
  used_.insert(key);
  const auto it = j_.find(key);
  return it == j_.end() ? nullptr : &*it;
}

void ConfigReader::fail(const std::string& key, const std::string& what) const {
  throw ConfigError(context_ + ": '" + key + "' " + what);
}

std::string ConfigReader::string(const std::string& key, const std::optional<std::string>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!v->is_string()) fail(key, "must be a string");
  return v->get<std::string>();
}

std::size_t ConfigReader::count(const std::string& key, const std::optional<std::size_t>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!is_count(*v)) fail(key, "must be a non-negative integer");
  return v->get<std::size_t>();
}

std::uint64_t ConfigReader::seed(const std::string& key, const std::optional<std::uint64_t>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!is_count(*v)) fail(key, "must be a non-negative integer");
  return v->get<std::uint64_t>();
}

double ConfigReader::real(const std::string& key, const std::optional<double>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!v->is_number()) fail(key, "must be a number");
  const double d = v->get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

bool ConfigReader::boolean(const std::string& key, const std::optional<bool>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!v->is_boolean()) fail(key, "must be true or false");
  return v->get<bool>();
}

std::vector<std::size_t> ConfigReader::counts(const std::string& key,
                                              const std::optional<std::vector<std::size_t>>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!v->is_array()) fail(key, "must be an array of non-negative integers");
  std::vector<std::size_t> out;
  for (const auto& e : *v) {
    if (!is_count(e)) fail(key, "must be an array of non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::vector<std::string> ConfigReader::strings(const std::string& key,
                                               const std::optional<std::vector<std::string>>& fallback) {
  const auto* v = find(key);
  if (!v) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (!v->is_array()) fail(key, "must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : *v) {
    if (!e.is_string()) fail(key, "must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

const nlohmann::json& ConfigReader::raw(const std::string& key) {
  const auto* v = find(key);
  if (!v) fail(key, "is required");
  return *v;
}

void ConfigReader::finish() const {
  for (const auto& [key, value] : j_.items()) {
    if (!used_.count(key)) throw ConfigError(context_ + ": unknown key '" + key + "'");
  }
}

nlohmann::json load_config(const std::optional<std::filesystem::path>& path) {
  if (!path) return nlohmann::json::object();
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot open config file " + path->string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path->string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace otm::cli
