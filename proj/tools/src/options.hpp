#pragma once

// Options that can come from the command line or a JSON config file.
// Precedence is flag, then file, then the compiled-in default.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "latver/error.hpp"

namespace latver::cli {

using json = nlohmann::ordered_json;

class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file of option values (flags override it)")
        ->check(CLI::ExistingFile);
  }

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    bindings_.push_back({name, opt, [&var](const json& j) { var = j.get<T>(); },
                         [&var](json& out, const std::string& key) { out[key] = var; }});
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    CLI::Option* opt = app_->add_flag("--" + name + ",!--no-" + name, var, help);
    bindings_.push_back({name, opt, [&var](const json& j) { var = j.get<bool>(); },
                         [&var](json& out, const std::string& key) { out[key] = var; }});
    return opt;
  }

  // Fills every option not given on the command line from the config file.
  // Keys may use '-' or '_'; unknown keys are rejected.
  void apply_config_file() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidArgument, "config file " + config_path_ + ": " + e.what());
    }
    if (!file.is_object()) throw Error(ErrorKind::InvalidArgument, "config file must hold a JSON object");
    for (const auto& [raw, value] : file.items()) {
      std::string key = raw;
      std::replace(key.begin(), key.end(), '_', '-');
      auto it = std::find_if(bindings_.begin(), bindings_.end(),
                             [&](const Binding& b) { return b.name == key; });
      if (it == bindings_.end()) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + raw + "'");
      if (it->option->count() > 0) continue;
      try {
        it->load(value);
      } catch (const json::exception&) {
        throw Error(ErrorKind::InvalidArgument, "config key '" + raw + "' has the wrong type");
      }
    }
  }

  json resolved() const {
    json out = json::object();
    for (const auto& b : bindings_) {
      std::string key = b.name;
      std::replace(key.begin(), key.end(), '-', '_');
      b.store(out, key);
    }
    return out;
  }

 private:
  struct Binding {
    std::string name;
    CLI::Option* option;
    std::function<void(const json&)> load;
    std::function<void(json&, const std::string&)> store;
  };

  CLI::App* app_;
  std::string config_path_;
  std::vector<Binding> bindings_;
};

}  // namespace latver::cli
