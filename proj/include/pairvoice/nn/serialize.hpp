#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pairvoice/nn/aff_model.hpp"
#include "pairvoice/nn/dense.hpp"

namespace pairvoice::nn {

inline constexpr int kModelSchemaVersion = 1;

// JSON documents carry {"schema_version", "model", "config", "parameters"};
// parameters are row-major arrays printed with round-trip precision so a
// reload predicts bit-identically. SchemaError on malformed input.
std::string to_json(const DenseNet3& net);
std::string to_json(const AffModel& model);
DenseNet3 dense_from_json(std::string_view text);
AffModel aff_model_from_json(std::string_view text);

void save_text(const std::filesystem::path& path, const std::string& text);
std::string load_text(const std::filesystem::path& path);

}  // namespace pairvoice::nn
