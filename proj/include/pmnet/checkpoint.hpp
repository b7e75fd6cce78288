#ifndef PMNET_CHECKPOINT_HPP_
#define PMNET_CHECKPOINT_HPP_

#include <iosfwd>
#include <string>

#include "pmnet/kvconfig.hpp"
#include "pmnet/model.hpp"

namespace pmnet {

// File layout:
//   PMNET1
//   config <count>
//   key=value             (count lines; model, vocabulary and run settings)
//   params <count>
//   <name> <rank> <dims...>
//   <raw little-endian doubles>
struct Checkpoint {
  ModelConfig model;
  Vocabulary vocab;
  ParamStore params;
  // Every key=value pair in the header, including the model and vocabulary keys.
  KeyValues config;
};

// `extra` is merged into the header; keys owned by the model or vocabulary win.
void save_checkpoint(std::ostream& out, const Tagger& tagger, const KeyValues& extra = {});
void save_checkpoint(const std::string& path, const Tagger& tagger, const KeyValues& extra = {});

// Throws LoadError on malformed input or parameters inconsistent with the config.
Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::string& path);
Tagger load_tagger(const std::string& path);

}  // namespace pmnet

#endif  // PMNET_CHECKPOINT_HPP_
