#include "ogaw/config.hpp"

#include <fstream>

#include "ogaw/error.hpp"

namespace ogaw {

namespace {

template <typename T>
void read_field(const Json& json, const char* key, T& out) {
  try {
    out = json.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: field '") + key + "' has the wrong type: " + e.what());
  }
}

void reject_unknown(const Json& json, std::initializer_list<const char*> known, const char* section) {
  if (!json.is_object()) throw ValidationError(std::string("config: section '") + section + "' must be an object");
  for (const auto& [key, _] : json.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError(std::string("config: unknown field '") + key + "' in section '" + section + "'");
  }
}

}  // namespace

Json to_json(const ModelConfig& c) {
  Json j;
  j["image_size"] = c.image_size;
  j["in_channels"] = c.in_channels;
  j["num_classes"] = c.num_classes;
  j["encoder_widths"] = c.encoder_widths;
  j["classifier_widths"] = c.classifier_widths;
  j["wavelet_bank"] = c.wavelet_bank;
  j["wavelet_levels"] = c.wavelet_levels();
  j["oga_kernel_size"] = c.oga_kernel_size;
  j["oga_num_kernels"] = c.oga_num_kernels;
  j["oga_reduction_ratio"] = c.oga_reduction_ratio;
  j["recon_loss_weight"] = c.recon_loss_weight;
  return j;
}

Json to_json(const TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["seed"] = c.seed;
  j["shuffle"] = c.shuffle;
  return j;
}

void merge_json(const Json& json, ModelConfig& c) {
  reject_unknown(json,
                 {"image_size", "in_channels", "num_classes", "encoder_widths", "classifier_widths", "wavelet_bank",
                  "wavelet_levels", "oga_kernel_size", "oga_num_kernels", "oga_reduction_ratio",
                  "recon_loss_weight"},
                 "model");
  if (json.contains("image_size")) read_field(json, "image_size", c.image_size);
  if (json.contains("in_channels")) read_field(json, "in_channels", c.in_channels);
  if (json.contains("num_classes")) read_field(json, "num_classes", c.num_classes);
  if (json.contains("encoder_widths")) read_field(json, "encoder_widths", c.encoder_widths);
  if (json.contains("classifier_widths")) read_field(json, "classifier_widths", c.classifier_widths);
  if (json.contains("wavelet_bank")) read_field(json, "wavelet_bank", c.wavelet_bank);
  if (json.contains("oga_kernel_size")) read_field(json, "oga_kernel_size", c.oga_kernel_size);
  if (json.contains("oga_num_kernels")) read_field(json, "oga_num_kernels", c.oga_num_kernels);
  if (json.contains("oga_reduction_ratio")) read_field(json, "oga_reduction_ratio", c.oga_reduction_ratio);
  if (json.contains("recon_loss_weight")) read_field(json, "recon_loss_weight", c.recon_loss_weight);
  // wavelet_levels is derived; a stated value must agree with the derivation.
  if (json.contains("wavelet_levels")) {
    std::size_t levels = 0;
    read_field(json, "wavelet_levels", levels);
    if (levels != c.wavelet_levels()) {
      throw ValidationError("config: wavelet_levels " + std::to_string(levels) + " disagrees with the derived " +
                            std::to_string(c.wavelet_levels()) + " (one level per encoder stage)");
    }
  }
}

void merge_json(const Json& json, TrainConfig& c) {
  reject_unknown(json,
                 {"epochs", "batch_size", "learning_rate", "weight_decay", "beta1", "beta2", "adam_eps", "seed",
                  "shuffle"},
                 "train");
  if (json.contains("epochs")) read_field(json, "epochs", c.epochs);
  if (json.contains("batch_size")) read_field(json, "batch_size", c.batch_size);
  if (json.contains("learning_rate")) read_field(json, "learning_rate", c.learning_rate);
  if (json.contains("weight_decay")) read_field(json, "weight_decay", c.weight_decay);
  if (json.contains("beta1")) read_field(json, "beta1", c.beta1);
  if (json.contains("beta2")) read_field(json, "beta2", c.beta2);
  if (json.contains("adam_eps")) read_field(json, "adam_eps", c.adam_eps);
  if (json.contains("seed")) read_field(json, "seed", c.seed);
  if (json.contains("shuffle")) read_field(json, "shuffle", c.shuffle);
}

RunConfig RunConfig::from_json(const Json& json) {
  reject_unknown(json, {"model", "train"}, "root");
  RunConfig rc;
  if (json.contains("model")) merge_json(json.at("model"), rc.model);
  if (json.contains("train")) merge_json(json.at("train"), rc.train);
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  Json json;
  try {
    json = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(json);
}

Json RunConfig::resolved() const {
  Json j;
  j["model"] = to_json(model);
  j["train"] = to_json(train);
  j["loss"] = model.recon_loss_weight > 0.0 ? "cross_entropy+mse" : "cross_entropy";
  j["optimizer"] = "adam_l2";
  j["preprocessing"] = {{"resize", model.image_size}, {"resample", "bilinear"}, {"normalize", "divide_by_255"}};
  return j;
}

}  // namespace ogaw
