#include "engrave/encoder.h"

#include <string>

#include "engrave/error.h"

namespace engrave {

using ad::Matrix;
using ad::Value;

void EncoderConfig::validate() const {
  if (num_layers < 1) throw Error(ErrorCode::kBadConfig, "layers must be >= 1");
  if (hidden_size < 1) throw Error(ErrorCode::kBadConfig, "hidden size must be >= 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw Error(ErrorCode::kBadConfig, "dropout must lie in [0, 1)");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"num_layers", num_layers},
          {"hidden_size", hidden_size},
          {"dropout_p", dropout_p},
          {"aggregation", aggregation == Aggregation::kSum ? "sum" : "mean"},
          {"gru_input", gru_input == GruInput::kConvOutput ? "conv" : "initial"},
          {"use_gru", use_gru}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.aggregation = j.at("aggregation").get<std::string>() == "mean" ? Aggregation::kMean
                                                                    : Aggregation::kSum;
  c.gru_input = j.at("gru_input").get<std::string>() == "initial" ? GruInput::kInitialFeatures
                                                                   : GruInput::kConvOutput;
  c.use_gru = j.at("use_gru").get<bool>();
  c.validate();
  return c;
}

EncoderParams EncoderParams::init(const EncoderConfig& config, ad::Rng& rng) {
  config.validate();
  const int h = config.hidden_size;
  EncoderParams p;
  p.input_weight = Value::parameter(ad::glorot(kNumFeatures, h, rng));
  p.input_bias = Value::parameter(Matrix(1, h));
  for (int l = 0; l < config.num_layers; ++l) {
    EncoderLayer layer;
    layer.self_weight = Value::parameter(ad::glorot(h, h, rng));
    for (auto& w : layer.relation_weights) w = Value::parameter(ad::glorot(h, h, rng));
    layer.gru.w_input = Value::parameter(ad::glorot(h, 3 * h, rng));
    layer.gru.b_input = Value::parameter(Matrix(1, 3 * h));
    layer.gru.w_hidden = Value::parameter(ad::glorot(h, 3 * h, rng));
    layer.gru.ln_gain = Value::parameter(Matrix(1, 3 * h, 1.0));
    layer.gru.ln_bias = Value::parameter(Matrix(1, 3 * h));
    layer.norm_gain = Value::parameter(Matrix(1, h, 1.0));
    layer.norm_bias = Value::parameter(Matrix(1, h));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void EncoderParams::collect(ad::ParameterList& out) const {
  out.push_back({"encoder.input.weight", input_weight});
  out.push_back({"encoder.input.bias", input_bias});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "encoder.layer" + std::to_string(l) + ".";
    const EncoderLayer& layer = layers[l];
    out.push_back({prefix + "self", layer.self_weight});
    for (int r = 0; r < kNumRelations; ++r) {
      out.push_back({prefix + "rel." + std::string(relation_name(static_cast<Relation>(r))),
                     layer.relation_weights[r]});
    }
    out.push_back({prefix + "gru.w_input", layer.gru.w_input});
    out.push_back({prefix + "gru.b_input", layer.gru.b_input});
    out.push_back({prefix + "gru.w_hidden", layer.gru.w_hidden});
    out.push_back({prefix + "gru.ln_gain", layer.gru.ln_gain});
    out.push_back({prefix + "gru.ln_bias", layer.gru.ln_bias});
    out.push_back({prefix + "norm.gain", layer.norm_gain});
    out.push_back({prefix + "norm.bias", layer.norm_bias});
  }
}

Value feature_matrix(const ScoreGraph& graph) {
  Matrix m(graph.node_count, kNumFeatures);
  for (int i = 0; i < graph.node_count; ++i) {
    std::copy(graph.features[i].begin(), graph.features[i].end(), m.row(i).begin());
  }
  return Value::constant(std::move(m));
}

Value hetero_sage_conv(const Value& h, const ScoreGraph& graph, const EncoderLayer& layer,
                       Aggregation aggregation) {
  if (h.rows() != graph.node_count) {
    throw Error(ErrorCode::kShapeMismatch, "conv: embedding rows differ from node count");
  }
  Value acc = ad::matmul(h, layer.self_weight);
  for (int r = 0; r < kNumRelations; ++r) {
    const auto& edges = graph.edges[r];
    if (edges.empty()) continue;
    std::vector<int> src, dst;
    src.reserve(edges.size());
    dst.reserve(edges.size());
    for (const auto& e : edges) {
      src.push_back(e.src);
      dst.push_back(e.dst);
    }
    Value agg = ad::scatter_sum(ad::row_gather(h, src), dst, graph.node_count);
    if (aggregation == Aggregation::kMean) {
      std::vector<int> degree(graph.node_count, 0);
      for (int d : dst) ++degree[d];
      Matrix inv(graph.node_count, h.cols());
      for (int i = 0; i < graph.node_count; ++i) {
        const double s = degree[i] ? 1.0 / degree[i] : 0.0;
        for (double& v : inv.row(i)) v = s;
      }
      agg = ad::mul(agg, Value::constant(std::move(inv)));
    }
    acc = ad::add(acc, ad::matmul(agg, layer.relation_weights[r]));
  }
  return ad::relu(acc);
}

Value gru_sweep(const Value& x, const std::vector<int>& order, const GruParams& gru) {
  const int n = x.rows();
  const int h = gru.w_hidden.rows();
  if (static_cast<int>(order.size()) != n) {
    throw Error(ErrorCode::kShapeMismatch, "gru: order length differs from row count");
  }
  const Value projected = ad::add(ad::matmul(x, gru.w_input), gru.b_input);
  Value state = Value::constant(Matrix(1, h));
  std::vector<Value> outputs;
  outputs.reserve(n);
  std::vector<int> rank(n);
  for (int t = 0; t < n; ++t) {
    const int id = order[t];
    rank[id] = t;
    const Value xg = ad::row_gather(projected, std::span<const int>(&id, 1));
    const Value hg = ad::layer_norm(ad::matmul(state, gru.w_hidden), gru.ln_gain, gru.ln_bias);
    const Value gates =
        ad::sigmoid(ad::add(ad::slice_cols(xg, 0, 2 * h), ad::slice_cols(hg, 0, 2 * h)));
    const Value reset = ad::slice_cols(gates, 0, h);
    const Value update = ad::slice_cols(gates, h, 2 * h);
    const Value candidate = ad::tanh(ad::add(
        ad::slice_cols(xg, 2 * h, 3 * h), ad::mul(reset, ad::slice_cols(hg, 2 * h, 3 * h))));
    // (1 - z) * n + z * h_prev
    state = ad::add(candidate, ad::mul(update, ad::sub(state, candidate)));
    outputs.push_back(state);
  }
  return ad::row_gather(ad::concat_rows(outputs), rank);
}

Value encode(const ScoreGraph& graph, const EncoderParams& params, const EncoderConfig& config,
             ad::Rng& rng, bool train) {
  if (static_cast<int>(params.layers.size()) != config.num_layers) {
    throw Error(ErrorCode::kShapeMismatch, "encoder: layer count differs from config");
  }
  for (const auto& layer : params.layers) {
    for (const auto& w : layer.relation_weights) {
      if (!w.valid()) throw Error(ErrorCode::kRelationMismatch, "encoder: missing relation weight");
    }
  }
  const Value initial =
      ad::add(ad::matmul(feature_matrix(graph), params.input_weight), params.input_bias);
  Value h = initial;
  for (const auto& layer : params.layers) {
    const Value conv = hetero_sage_conv(h, graph, layer, config.aggregation);
    Value block = ad::dropout(conv, config.dropout_p, rng, train);
    if (config.use_gru) {
      if (config.gru_input == GruInput::kConvOutput) {
        block = gru_sweep(block, graph.note_order, layer.gru);
      } else {
        block = ad::add(block, gru_sweep(initial, graph.note_order, layer.gru));
      }
    }
    h = ad::layer_norm(block, layer.norm_gain, layer.norm_bias);
  }
  return h;
}

}  // namespace engrave
