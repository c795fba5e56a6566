#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gmn/encoder.hpp"
#include "gmn/metric_net.hpp"

namespace gmn {

struct ModelParams {
    EncoderParams encoder;
    std::optional<MetricNetParams> mnet;
};

struct ModelGrads {
    EncoderGrads encoder;
    std::optional<MnetGrads> mnet;
};

// Canonical parameter order: encoder layers (weight then bias each), the
// classifier, then the metric net. Optimizer moments and checkpoints follow
// this order; ModelGrads mirrors it field for field.
template <class ModelLike>
std::vector<std::span<double>> param_spans(ModelLike& m) {
    std::vector<std::span<double>> out;
    auto add = [&out](auto& dense) {
        out.emplace_back(dense.weight.data);
        out.emplace_back(dense.bias);
    };
    for (auto& layer : m.encoder.layers) add(layer);
    add(m.encoder.classifier);
    if (m.mnet) {
        add(m.mnet->layer1);
        add(m.mnet->layer2);
    }
    return out;
}

template <class ModelLike>
std::size_t param_count(const ModelLike& m) {
    std::size_t n = 0;
    auto add = [&n](const auto& dense) { n += dense.weight.data.size() + dense.bias.size(); };
    for (const auto& layer : m.encoder.layers) add(layer);
    add(m.encoder.classifier);
    if (m.mnet) {
        add(m.mnet->layer1);
        add(m.mnet->layer2);
    }
    return n;
}

}  // namespace gmn
