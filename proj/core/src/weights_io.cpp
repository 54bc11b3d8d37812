#include "polyssm/weights_io.hpp"

#include <map>

namespace polyssm {

namespace {

struct Packed {
  Json shapes = Json::object();
  Json entries = Json::object();

  void put(const std::string& name, const Matrix& m) {
    shapes[name] = {m.rows(), m.cols()};
    entries[name] = std::vector<double>(m.entries().begin(), m.entries().end());
  }
};

Matrix unpack(const Json& j, const std::string& name) {
  try {
    const auto& shape = j.at("shapes").at(name);
    const auto rows = shape.at(0).get<std::size_t>();
    const auto cols = shape.at(1).get<std::size_t>();
    return Matrix(rows, cols, j.at("entries").at(name).get<std::vector<double>>());
  } catch (const Json::exception& e) {
    throw ParseError("weights: tensor '" + name + "': " + e.what());
  } catch (const DimensionError& e) {
    throw ParseError("weights: tensor '" + name + "': " + e.what());
  }
}

void expect_type(const Json& j, const std::string& want) {
  const std::string got = layer_type_of(j);
  if (got != want) throw ParseError("weights: expected layer_type '" + want + "', got '" + got + "'");
}

}  // namespace

std::string layer_type_of(const Json& j) {
  if (!j.is_object() || !j.contains("layer_type") || !j["layer_type"].is_string()) {
    throw ParseError("weights: missing layer_type");
  }
  return j["layer_type"].get<std::string>();
}

Json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"entries", std::vector<double>(m.entries().begin(), m.entries().end())}};
}

Matrix matrix_from_json(const Json& j) {
  try {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("entries").get<std::vector<double>>());
  } catch (const Json::exception& e) {
    throw ParseError(std::string("matrix: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("matrix: ") + e.what());
  }
}

Json variant_to_json(const S6Variant& v) {
  return {{"kind", v.tag()}, {"p1_degree", v.p1_degree}, {"p2_degree", v.p2_degree}, {"linear_pA", v.linear_pA}};
}

S6Variant variant_from_json(const Json& j) {
  try {
    S6Variant v;
    v.kind = S6Variant::parse_kind(j.at("kind").get<std::string>());
    v.p1_degree = j.value("p1_degree", 3);
    v.p2_degree = j.value("p2_degree", 3);
    v.linear_pA = j.value("linear_pA", false);
    v.validate();
    return v;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("variant: ") + e.what());
  }
}

Json to_json(const S6Weights& w, const S6Variant& v) {
  Packed p;
  p.put("s_b", w.s_b);
  p.put("s_c", w.s_c);
  p.put("s_delta", w.s_delta);
  p.put("a", w.a);
  return {{"layer_type", "s6"}, {"shapes", p.shapes}, {"entries", p.entries}, {"variant", variant_to_json(v)},
          {"flags", Json::object()}};
}

Json to_json(const AttentionWeights& w, const std::string& layer_type) {
  if (layer_type != "linear_attention" && layer_type != "softmax_attention") {
    throw InputError("weights: unknown attention type '" + layer_type + "'");
  }
  Packed p;
  p.put("w_q", w.w_q);
  p.put("w_k", w.w_k);
  p.put("w_v", w.w_v);
  return {{"layer_type", layer_type}, {"shapes", p.shapes}, {"entries", p.entries},
          {"flags", {{"scale", w.scale}}}};
}

Json to_json(const MambaBlockWeights& w) {
  Packed p;
  p.put("in_w", w.in_w);
  p.put("in_b", w.in_b);
  p.put("conv", w.conv);
  p.put("gate_w", w.gate_w);
  p.put("gate_b", w.gate_b);
  p.put("out_w", w.out_w);
  p.put("out_b", w.out_b);
  p.put("s_b", w.s6.s_b);
  p.put("s_c", w.s6.s_c);
  p.put("s_delta", w.s6.s_delta);
  p.put("a", w.s6.a);
  return {{"layer_type", "mamba_block"},
          {"shapes", p.shapes},
          {"entries", p.entries},
          {"variant", variant_to_json(w.variant)},
          {"flags",
           {{"use_silu", w.flags.use_silu}, {"use_conv", w.flags.use_conv}, {"use_residual", w.flags.use_residual}}}};
}

S6Weights s6_from_json(const Json& j, S6Variant* variant) {
  expect_type(j, "s6");
  S6Weights w{unpack(j, "s_b"), unpack(j, "s_c"), unpack(j, "s_delta"), unpack(j, "a")};
  w.validate();
  if (variant) *variant = j.contains("variant") ? variant_from_json(j["variant"]) : S6Variant{};
  return w;
}

AttentionWeights attention_from_json(const Json& j) {
  const std::string type = layer_type_of(j);
  if (type != "linear_attention" && type != "softmax_attention") {
    throw ParseError("weights: expected an attention layer, got '" + type + "'");
  }
  AttentionWeights w{unpack(j, "w_q"), unpack(j, "w_k"), unpack(j, "w_v"), 1.0};
  if (j.contains("flags") && j["flags"].contains("scale")) w.scale = j["flags"]["scale"].get<double>();
  w.validate();
  return w;
}

MambaBlockWeights mamba_block_from_json(const Json& j) {
  expect_type(j, "mamba_block");
  MambaBlockWeights w;
  w.in_w = unpack(j, "in_w");
  w.in_b = unpack(j, "in_b");
  w.conv = unpack(j, "conv");
  w.gate_w = unpack(j, "gate_w");
  w.gate_b = unpack(j, "gate_b");
  w.out_w = unpack(j, "out_w");
  w.out_b = unpack(j, "out_b");
  w.s6 = {unpack(j, "s_b"), unpack(j, "s_c"), unpack(j, "s_delta"), unpack(j, "a")};
  w.variant = j.contains("variant") ? variant_from_json(j["variant"]) : S6Variant{};
  if (j.contains("flags")) {
    const auto& f = j["flags"];
    w.flags.use_silu = f.value("use_silu", true);
    w.flags.use_conv = f.value("use_conv", true);
    w.flags.use_residual = f.value("use_residual", false);
  }
  w.validate();
  return w;
}

}  // namespace polyssm
