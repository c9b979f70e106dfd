#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "c2st/c2st.hpp"
#include "c2st/causal.hpp"
#include "c2st/experiments.hpp"
#include "c2st/outcome.hpp"
#include "c2st/sample.hpp"

namespace c2st {

using Json = nlohmann::json;

inline Json to_json(const TestOutcome& t) {
  Json diag = Json::object();
  for (const auto& [k, v] : t.diagnostics) diag[k] = v;
  return {{"test", t.test},           {"statistic", t.statistic}, {"p_value", t.p_value},
          {"reject", t.reject},       {"alpha", t.alpha},         {"diagnostics", diag}};
}

inline Json to_json(const ExampleRecord& r) {
  return {{"source", r.source},
          {"row", r.row},
          {"label", r.label},
          {"probability", r.probability}};
}

inline ExampleRecord example_from_json(const Json& j) {
  ExampleRecord r;
  r.source = j.at("source").get<int>();
  r.row = j.at("row").get<std::size_t>();
  r.label = j.at("label").get<std::uint8_t>();
  r.probability = j.at("probability").get<double>();
  return r;
}

inline Json to_json(const Sample& s) {
  return {{"rows", s.rows()}, {"cols", s.cols()}, {"values", s.values()}};
}

inline Sample sample_from_json(const Json& j) {
  return Sample(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

inline Json to_json(const MlpHyperparams& hp) {
  return {{"hidden", hp.hidden},         {"epochs", hp.epochs},
          {"batch_size", hp.batch_size}, {"step", hp.adam.step},
          {"beta1", hp.adam.beta1},      {"beta2", hp.adam.beta2},
          {"epsilon", hp.adam.epsilon}};
}

inline MlpHyperparams mlp_hyperparams_from_json(const Json& j) {
  MlpHyperparams hp;
  hp.hidden = j.at("hidden").get<std::size_t>();
  hp.epochs = j.at("epochs").get<std::size_t>();
  hp.batch_size = j.at("batch_size").get<std::size_t>();
  hp.adam.step = j.at("step").get<double>();
  hp.adam.beta1 = j.at("beta1").get<double>();
  hp.adam.beta2 = j.at("beta2").get<double>();
  hp.adam.epsilon = j.at("epsilon").get<double>();
  return hp;
}

/// Flat network record. `params` follows the DenseNet layout
/// [W1 (hidden x inputs, row-major) | b1 | w2 | b2].
inline Json to_json(const DenseNet& net) {
  return {{"inputs", net.inputs()},
          {"hidden", net.hidden()},
          {"layout", "W1(hidden x inputs, row-major), b1, w2, b2"},
          {"params", std::vector<double>(net.params().begin(), net.params().end())}};
}

inline DenseNet dense_net_from_json(const Json& j) {
  DenseNet net(j.at("inputs").get<std::size_t>(), j.at("hidden").get<std::size_t>());
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.size()) throw std::invalid_argument("network record: wrong parameter count");
  std::copy(params.begin(), params.end(), net.params().begin());
  return net;
}

/// Everything interpretation needs from one C2ST run: the held-out records,
/// their features and, for the network, its weights.
inline Json interpretation_bundle(const C2stOutcome& o) {
  Json j = {{"schema", "c2st.model/1"},
            {"classifier", std::string(to_string(o.classifier))},
            {"statistic", o.statistic},
            {"n_te", o.n_te},
            {"examples", Json::array()},
            {"test_features", to_json(o.test_features)}};
  for (const auto& r : o.examples) j["examples"].push_back(to_json(r));
  if (const auto* mlp = std::get_if<MlpClassifier>(&o.model)) {
    j["network"] = to_json(mlp->net());
  } else if (const auto* knn = std::get_if<KnnClassifier>(&o.model)) {
    j["knn"] = {{"k", knn->k()}, {"n_train", knn->training_set().size()}};
  }
  return j;
}

struct LoadedBundle {
  ClassifierKind classifier = ClassifierKind::NeuralNet;
  std::vector<ExampleRecord> examples;
  Sample test_features;
  std::optional<DenseNet> network;
};

inline LoadedBundle bundle_from_json(const Json& j) {
  if (j.value("schema", "") != "c2st.model/1") {
    throw std::invalid_argument("model file: not a saved C2ST classifier");
  }
  LoadedBundle b;
  const auto kind = j.at("classifier").get<std::string>();
  if (kind == "nn") {
    b.classifier = ClassifierKind::NeuralNet;
  } else if (kind == "knn") {
    b.classifier = ClassifierKind::NearestNeighbours;
  } else {
    throw std::invalid_argument("model file: unknown classifier '" + kind + "'");
  }
  for (const auto& r : j.at("examples")) b.examples.push_back(example_from_json(r));
  b.test_features = sample_from_json(j.at("test_features"));
  if (b.test_features.rows() != b.examples.size()) {
    throw std::invalid_argument("model file: feature rows do not match example records");
  }
  if (j.contains("network")) b.network = dense_net_from_json(j.at("network"));
  return b;
}

inline InterpretReport interpret_bundle(const LoadedBundle& b) {
  InterpretReport report;
  report.ranked = rank_by_confidence(b.examples);
  if (b.network) report.features = network_features(*b.network, b.test_features, b.examples);
  return report;
}

inline Json to_json(const ErrorTable& t) {
  Json rows = Json::array();
  const bool nu = experiment_uses_nu(t.experiment);
  const bool sin = experiment_uses_sinusoid(t.experiment);
  for (const auto& r : t.rows) {
    Json row = {{"test", r.test},
                {"experiment", std::string(to_string(r.experiment))},
                {"n", r.point.n},
                {"trials", r.trials},
                {"rejections", r.rejections},
                {"rate_kind", std::string(t.rate_kind())},
                {"rate", r.rate}};
    row["nu"] = nu ? Json(r.point.nu) : Json(nullptr);
    row["delta"] = sin ? Json(r.point.delta) : Json(nullptr);
    row["gamma"] = sin ? Json(r.point.gamma) : Json(nullptr);
    rows.push_back(std::move(row));
  }
  return {{"experiment", std::string(to_string(t.experiment))},
          {"rate_kind", std::string(t.rate_kind())},
          {"rows", rows}};
}

inline Json to_json(const CausalVerdict& v) {
  Json members = Json::array();
  for (const auto& r : v.ensemble) {
    members.push_back({{"member", r.member},
                       {"seed", r.seed},
                       {"direction_trained", std::string(to_string(r.direction))},
                       {"diverged", r.diverged},
                       {"statistic", r.diverged ? Json(nullptr) : Json(r.statistic)}});
  }
  return {{"direction", std::string(to_string(v.direction))},
          {"t_xy", v.t_xy},
          {"t_yx", v.t_yx},
          {"tie", v.tie},
          {"ensemble", members}};
}

}  // namespace c2st
