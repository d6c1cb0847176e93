#pragma once

#include <map>
#include <string>
#include <vector>

#include "coopdelay/config.hpp"

namespace coopdelay {

struct PresetParam {
  std::string name;
  std::string default_value;
  std::string meaning;
};

struct Preset {
  std::string name;
  std::string summary;
  std::vector<PresetParam> params;
};

using PresetParams = std::map<std::string, std::string>;

const std::vector<Preset>& preset_catalog();

/// Config text for a preset in the normalized form. Unknown names, unknown
/// parameters and out-of-range values throw ValidationError keyed by the
/// parameter.
ConfigDocument preset_document(const std::string& name, const PresetParams& params = {});

/// The preset's system after the same validation as a hand-written config.
SystemSpec instantiate_preset(const std::string& name, const PresetParams& params = {});

}  // namespace coopdelay
