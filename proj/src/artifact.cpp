#include "mascots/artifact.hpp"

#include <cstdio>
#include <fstream>

#include "mascots/errors.hpp"

namespace mascots {

using nlohmann::json;

void write_json_atomic(const json& doc, const std::string& path, int indent) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ParseError("cannot write '" + tmp + "'");
        out << doc.dump(indent) << '\n';
        out.flush();
        if (!out) throw ParseError("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw ParseError("cannot move '" + tmp + "' into place");
    }
}

void ModelArtifact::save(const std::string& path) const {
    json doc;
    doc["format_version"] = 1;
    doc["kind"] = "model";
    doc["class_names"] = class_names;
    doc["normalized"] = normalized;
    doc["fidelity"] = fidelity;
    doc["run_config"] = run_config;
    doc["transform"] = transform.to_json();
    doc["surrogate"] = surrogate.to_json();
    doc["vocab_presence"] = vocab_presence;
    doc["blackbox"] = blackbox->to_json();
    write_json_atomic(doc, path);
}

ModelArtifact ModelArtifact::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    if (!doc.contains("format_version") || doc["format_version"].get<int>() != 1) {
        throw SchemaError("'" + path + "': unsupported model format version");
    }
    if (doc.value("kind", "") != "model") {
        throw SchemaError("'" + path + "' is not a model artifact");
    }

    ModelArtifact artifact;
    try {
        artifact.class_names = doc.at("class_names").get<std::vector<std::string>>();
        artifact.normalized = doc.at("normalized").get<bool>();
        artifact.fidelity = doc.at("fidelity").get<double>();
        artifact.run_config = doc.value("run_config", json::object());
        artifact.transform = BorfTransform::from_json(doc.at("transform"));
        artifact.surrogate = Surrogate::from_json(doc.at("surrogate"));
        artifact.vocab_presence = doc.at("vocab_presence").get<std::vector<std::uint8_t>>();
        artifact.blackbox = blackbox_from_json(doc.at("blackbox"));
    } catch (const json::exception& e) {
        throw SchemaError("'" + path + "': " + e.what());
    }
    if (static_cast<long>(artifact.vocab_presence.size()) != artifact.transform.vocab_size ||
        artifact.surrogate.features != artifact.transform.vocab_size) {
        throw SchemaError("'" + path + "': vocabulary sizes disagree across the bundle");
    }
    return artifact;
}

}  // namespace mascots
