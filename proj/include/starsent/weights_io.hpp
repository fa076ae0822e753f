#pragma once

#include <string>

#include <json.hpp>

#include "starsent/model.hpp"

namespace starsent::model {

enum class WeightDType { f32, f64 };

// Binary checkpoint: "STSF1" magic, u32 little-endian JSON header length, a
// JSON header listing name/shape/offset per array plus the payload dtype,
// the raw little-endian payload, and a trailing 64-bit FNV-1a payload
// checksum. f64 round-trips bit-exactly; f32 is the compact default.
// Callers may stash a config blob in the header via `metadata`.
void save_weights(const WeightBundle& w, const std::string& path,
                  WeightDType dtype = WeightDType::f32,
                  const nlohmann::json& metadata = nullptr);

// Header metadata blob, or null when the file carries none.
nlohmann::json load_metadata(const std::string& path);

WeightBundle load_weights(const std::string& path, const ModelConfig& cfg);

// Load without validating against a config (the CLI uses this for inspection).
WeightBundle load_weights_unchecked(const std::string& path);

}  // namespace starsent::model
