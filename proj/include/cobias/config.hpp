#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace cobias {

// Flat key = value configuration with [section] headers and '#' comments.
// A key under [train] named lr is addressed as "train.lr"; keys before any
// header keep their bare name. parse(serialize()) is the identity on the
// key/value map.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text);
    static Config load(const std::string& path);
    std::string serialize() const;
    void save(const std::string& path) const;

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key) const;  // throws if missing
    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);
    const std::map<std::string, std::string>& items() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace cobias
