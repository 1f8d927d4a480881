#pragma once
// Flat key-value configuration with INI-style sections. All stages of the
// pipeline read from one Config; CLI flags override individual keys.

#include <cstdint>
#include <map>
#include <string>

namespace rocbf {

class Config {
  public:
    // Built-in defaults for the lane-keeping instance.
    static Config defaults();
    // Defaults overlaid with the file contents.
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    void set(const std::string& dotted_key, const std::string& value);
    bool has(const std::string& dotted_key) const;

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Canonical text form (sorted keys) and an FNV-1a hash of it.
    std::string dump() const;
    std::uint64_t hash() const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace rocbf
