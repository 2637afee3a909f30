#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "lanecast/models/cnn.hpp"
#include "lanecast/models/lstm.hpp"
#include "lanecast/models/transformer.hpp"

namespace lanecast {

template <typename T>
using AnyModel = std::variant<LstmNet<T>, CnnNet<T>, TransformerNet<T>>;

// Builds a freshly initialized model.  Weights depend only on (seed, arch),
// so rebuilding with the same arguments yields identical parameters.
template <typename T>
AnyModel<T> make_model(const std::string& arch, std::int64_t seq_len, std::int64_t input_dim,
                       std::uint64_t seed) {
    ModelConfig cfg = model_config(arch);
    Rng rng = keyed_rng(seed, {rng_tag("init"), rng_tag(arch)});
    if (auto* c = std::get_if<LstmConfig>(&cfg)) return LstmNet<T>(*c, seq_len, input_dim, rng);
    if (auto* c = std::get_if<CnnConfig>(&cfg)) return CnnNet<T>(*c, seq_len, input_dim, rng);
    return TransformerNet<T>(std::get<TransformerConfig>(cfg), seq_len, input_dim, rng);
}

template <typename T>
ForwardResult<T> model_forward(AnyModel<T>& m, nn::Graph<T>& g, const nn::Tensor<T>& x,
                               bool train_mode, Rng& rng) {
    return std::visit([&](auto& model) { return model.forward(g, x, train_mode, rng); }, m);
}

template <typename T>
std::vector<nn::Tensor<T>*> model_params(AnyModel<T>& m) {
    return std::visit([](auto& model) { return model.trainable_params(); }, m);
}

template <typename T>
std::vector<std::pair<std::string, nn::Tensor<T>*>> model_named_tensors(AnyModel<T>& m) {
    return std::visit([](auto& model) { return model.named_tensors(); }, m);
}

template <typename T>
std::string model_arch(AnyModel<T>& m) {
    return std::visit([](auto& model) { return model.config().name; }, m);
}

template <typename T>
std::int64_t model_seq_len(AnyModel<T>& m) {
    return std::visit([](auto& model) { return model.sequence_length(); }, m);
}

template <typename T>
std::int64_t model_input_dim(AnyModel<T>& m) {
    return std::visit([](auto& model) { return model.input_dim(); }, m);
}

template <typename T>
nn::AdamConfig model_opt(AnyModel<T>& m) {
    return std::visit([](auto& model) { return model.config().opt; }, m);
}

// Checkpoints are a JSON manifest next to a little-endian float32 blob
// holding every named tensor (trainable weights and running statistics) in
// declaration order.
template <typename T>
void save_checkpoint(const std::string& base_path, AnyModel<T>& m) {
    auto tensors = model_named_tensors(m);
    nlohmann::json manifest{
        {"architecture", model_arch(m)},
        {"sequence_length", model_seq_len(m)},
        {"input_dim", model_input_dim(m)},
        {"dtype", "f32le"},
    };
    nlohmann::json list = nlohmann::json::array();
    std::ofstream blob(base_path + ".bin", std::ios::binary);
    if (!blob) throw IoError("cannot write " + base_path + ".bin");
    for (auto& [name, tensor] : tensors) {
        list.push_back({{"name", name}, {"shape", tensor->shape}});
        std::vector<float> f32(tensor->data.begin(), tensor->data.end());
        blob.write(reinterpret_cast<const char*>(f32.data()),
                   static_cast<std::streamsize>(f32.size() * sizeof(float)));
    }
    manifest["tensors"] = std::move(list);
    std::ofstream out(base_path + ".json");
    if (!out) throw IoError("cannot write " + base_path + ".json");
    out << manifest.dump(2) << '\n';
}

template <typename T>
AnyModel<T> load_checkpoint(const std::string& base_path) {
    nlohmann::json manifest;
    {
        std::ifstream in(base_path + ".json");
        if (!in) throw IoError("cannot open " + base_path + ".json");
        in >> manifest;
    }
    AnyModel<T> m = make_model<T>(manifest.at("architecture").get<std::string>(),
                                  manifest.at("sequence_length").get<std::int64_t>(),
                                  manifest.at("input_dim").get<std::int64_t>(), 0);
    auto tensors = model_named_tensors(m);
    const auto& list = manifest.at("tensors");
    if (list.size() != tensors.size())
        throw ParseError(base_path + ": checkpoint has " + std::to_string(list.size()) +
                         " tensors, model expects " + std::to_string(tensors.size()));
    std::ifstream blob(base_path + ".bin", std::ios::binary);
    if (!blob) throw IoError("cannot open " + base_path + ".bin");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        auto& [name, tensor] = tensors[i];
        const auto shape = list[i].at("shape").get<std::vector<std::int64_t>>();
        if (list[i].at("name").get<std::string>() != name || shape != tensor->shape)
            throw ParseError(base_path + ": tensor " + std::to_string(i) +
                             " does not match the model layout");
        std::vector<float> f32(static_cast<std::size_t>(tensor->numel()));
        blob.read(reinterpret_cast<char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
        if (blob.gcount() != static_cast<std::streamsize>(f32.size() * sizeof(float)))
            throw ParseError(base_path + ".bin is shorter than its manifest");
        for (std::size_t j = 0; j < f32.size(); ++j) tensor->data[j] = static_cast<T>(f32[j]);
    }
    return m;
}

}  // namespace lanecast
