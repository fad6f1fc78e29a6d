#pragma once

#include <string>

#include "nfg/model.hpp"

namespace nfg {

// Self-describing binary checkpoint, magic "NFG1", little-endian 64-bit
// floats. Round trips are bit-exact.
void checkpoint_save(const NfgModel& model, const std::string& path);
NfgModel checkpoint_load(const std::string& path);

}  // namespace nfg
