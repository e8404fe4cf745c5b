#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mascots/borf.hpp"
#include "mascots/models.hpp"

namespace mascots {

/// Everything a fitted pipeline needs to explain new instances: the symbolic
/// transform, the surrogate, the training vocabulary mask, the black-box,
/// and enough metadata to reproduce the fit.
struct ModelArtifact {
    BorfTransform transform;
    Surrogate surrogate;
    std::vector<std::uint8_t> vocab_presence;
    std::unique_ptr<BlackBox> blackbox;
    std::vector<std::string> class_names;
    bool normalized = false;  // whether fit z-normalized each channel first
    double fidelity = 0.0;    // surrogate/black-box agreement on the training set
    nlohmann::json run_config;  // effective settings the fit ran with

    void save(const std::string& path) const;
    static ModelArtifact load(const std::string& path);
};

/// Writes doc to a temporary sibling file and renames it into place, so a
/// crash can never leave a half-written document behind.
void write_json_atomic(const nlohmann::json& doc, const std::string& path, int indent = 2);

}  // namespace mascots
