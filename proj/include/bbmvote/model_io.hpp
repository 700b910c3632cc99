#pragma once

#include <string>

#include "bbmvote/models.hpp"

namespace bbmvote {

// Hierarchical key-value model document, e.g.
//
//   kind = outcome
//   rate = 1
//   offspring = { 3: 1 }
//   alpha.3 = [0, 0, 1, 1]
//
// Numbers are printed with "%.17g", so write -> read -> write is
// byte-stable.
std::string write_model(const Model& m);
Model read_model(const std::string& text);

Model read_model_file(const std::string& path);
void write_model_file(const Model& m, const std::string& path);

// Short stable identifier ("kind:hexhash") used in CSV records.
std::string model_id(const Model& m);

}  // namespace bbmvote
