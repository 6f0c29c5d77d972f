#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <istream>
#include <string>
#include <vector>

namespace bi::cli {

/// Flat JSON object whose keys are long option names, e.g.
/// {"C0": 2.0, "orders": [1, 2, 4]}, applied to the subcommand given on the
/// command line. Nested objects address subcommands explicitly.
class JsonConfig : public CLI::Config
{
public:
  explicit JsonConfig(const CLI::App* root = nullptr) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override
  {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) {
        continue;
      }
      const std::string name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->results().size() == 1 ? nlohmann::json(opt->results().front()) : nlohmann::json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override
  {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
      throw CLI::ConversionError("config must be a JSON object");
    }
    std::vector<std::string> parents;
    if (root_ != nullptr && !root_->get_subcommands().empty()) {
      parents.push_back(root_->get_subcommands().front()->get_name());
    }
    std::vector<CLI::ConfigItem> items;
    for (auto it = j.begin(); it != j.end(); ++it) {
      collect(*it, it.key(), it->is_object() ? std::vector<std::string>{} : parents, items);
    }
    return items;
  }

private:
  const CLI::App* root_;

  static std::string scalar(const nlohmann::json& v, const std::string& name)
  {
    if (v.is_string()) {
      return v.get<std::string>();
    }
    if (v.is_boolean()) {
      return v.get<bool>() ? "true" : "false";
    }
    if (v.is_number()) {
      return v.dump();
    }
    throw CLI::ConversionError("unsupported value for '" + name + "'");
  }

  static void collect(const nlohmann::json& j, const std::string& name, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& items)
  {
    if (j.is_object()) {
      if (!name.empty()) {
        parents.push_back(name);
      }
      for (auto it = j.begin(); it != j.end(); ++it) {
        collect(*it, it.key(), parents, items);
      }
      return;
    }
    CLI::ConfigItem item;
    item.name = name;
    item.parents = parents;
    if (j.is_array()) {
      for (const auto& v : j) {
        item.inputs.push_back(scalar(v, name));
      }
    } else {
      item.inputs.push_back(scalar(j, name));
    }
    items.push_back(std::move(item));
  }
};

} // namespace bi::cli
