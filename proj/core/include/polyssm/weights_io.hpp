#pragma once

// JSON encoding of layer weights:
//   {"layer_type": ..., "shapes": {name: [rows, cols]}, "entries": {name: [...]},
//    "variant": {...}, "flags": {...}}
// Doubles are written in shortest round-trip form, so decode(encode(w)) == w
// bit for bit.

#include <string>

#include "json.hpp"
#include "polyssm/layers.hpp"

namespace polyssm {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json variant_to_json(const S6Variant& v);
S6Variant variant_from_json(const Json& j);

Json to_json(const S6Weights& w, const S6Variant& v);
// layer_type is "linear_attention" or "softmax_attention".
Json to_json(const AttentionWeights& w, const std::string& layer_type);
Json to_json(const MambaBlockWeights& w);

S6Weights s6_from_json(const Json& j, S6Variant* variant = nullptr);
AttentionWeights attention_from_json(const Json& j);
MambaBlockWeights mamba_block_from_json(const Json& j);

std::string layer_type_of(const Json& j);

}  // namespace polyssm
