#include <fstream>
#include <set>

#include <fmt/core.h>

#include "spgnm/error.hpp"
#include "spgnm/harness.hpp"

namespace spgnm {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, std::string_view where) {
    if (!obj.is_object()) throw InvalidInput(fmt::format("{}: expected an object", where));
    for (const auto& [key, _] : obj.items())
        if (!allowed.contains(key)) throw InvalidInput(fmt::format("{}: unknown key '{}'", where, key));
}

template <typename T>
T as(const json& v, std::string_view key) {
    try {
        return v.get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput(fmt::format("config field '{}': {}", key, e.what()));
    }
}

json hyper_to_json(const Hyper& h) {
    json out = json::object();
    if (h.eta) out["eta"] = *h.eta;
    if (h.beta) out["beta"] = *h.beta;
    if (h.lambda) out["lambda"] = *h.lambda;
    if (h.beta1) out["beta1"] = *h.beta1;
    if (h.beta2) out["beta2"] = *h.beta2;
    if (h.epsilon) out["epsilon"] = *h.epsilon;
    if (h.overflow) out["overflow"] = std::string(to_string(*h.overflow));
    return out;
}

Hyper hyper_from_json(const json& doc) {
    reject_unknown(doc, {"eta", "beta", "lambda", "beta1", "beta2", "epsilon", "overflow"}, "hyper");
    Hyper h;
    if (doc.contains("eta")) h.eta = as<double>(doc["eta"], "hyper.eta");
    if (doc.contains("beta")) h.beta = as<double>(doc["beta"], "hyper.beta");
    if (doc.contains("lambda")) h.lambda = as<double>(doc["lambda"], "hyper.lambda");
    if (doc.contains("beta1")) h.beta1 = as<double>(doc["beta1"], "hyper.beta1");
    if (doc.contains("beta2")) h.beta2 = as<double>(doc["beta2"], "hyper.beta2");
    if (doc.contains("epsilon")) h.epsilon = as<double>(doc["epsilon"], "hyper.epsilon");
    if (doc.contains("overflow"))
        h.overflow = overflow_policy_from_string(as<std::string>(doc["overflow"], "hyper.overflow"));
    return h;
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
    json doc;
    doc["environment"] = c.environment;
    if (!c.init) {
        doc["init"] = nullptr;
    } else if (c.init->kind == InitKind::uniform) {
        doc["init"] = "uniform";
    } else if (c.init->kind == InitKind::hard) {
        doc["init"] = "hard";
    } else {
        doc["init"] = c.init->logits->to_rows();
    }
    doc["optimizer"] = c.optimizer;
    doc["hyper"] = hyper_to_json(c.hyper);
    doc["iterations"] = c.iterations ? json(*c.iterations) : json(nullptr);
    doc["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
    doc["record_every"] = c.record_every;
    doc["seed"] = c.seed;
    if (c.gradient.sampled)
        doc["gradient"] = {{"mode", "sampled"},
                           {"batch", c.gradient.batch},
                           {"horizon", c.gradient.horizon},
                           {"baseline", c.gradient.baseline}};
    else
        doc["gradient"] = "exact";
    doc["record_wall_time"] = c.record_wall_time;
    return doc;
}

ExperimentConfig config_from_json(const json& doc) {
    reject_unknown(doc,
                   {"environment", "init", "optimizer", "hyper", "iterations", "gamma", "record_every", "seed",
                    "gradient", "record_wall_time"},
                   "config");
    if (!doc.contains("environment")) throw InvalidInput("config: missing 'environment'");

    ExperimentConfig c;
    c.environment = as<std::string>(doc["environment"], "environment");
    if (doc.contains("init") && !doc["init"].is_null()) {
        const json& init = doc["init"];
        if (init.is_string()) {
            const auto kind = init.get<std::string>();
            if (kind == "uniform") c.init = InitSpec{InitKind::uniform, std::nullopt};
            else if (kind == "hard") c.init = InitSpec{InitKind::hard, std::nullopt};
            else throw InvalidInput(fmt::format("config: init must be uniform, hard or a logits table, got '{}'", kind));
        } else {
            c.init = InitSpec{InitKind::explicit_logits,
                              Table::from_rows(as<std::vector<numvec>>(init, "init"))};
        }
    }
    if (doc.contains("optimizer")) c.optimizer = as<std::string>(doc["optimizer"], "optimizer");
    if (doc.contains("hyper")) c.hyper = hyper_from_json(doc["hyper"]);
    if (doc.contains("iterations") && !doc["iterations"].is_null())
        c.iterations = as<long>(doc["iterations"], "iterations");
    if (doc.contains("gamma") && !doc["gamma"].is_null()) c.gamma = as<double>(doc["gamma"], "gamma");
    if (doc.contains("record_every")) c.record_every = as<long>(doc["record_every"], "record_every");
    if (doc.contains("seed")) c.seed = as<std::uint64_t>(doc["seed"], "seed");
    if (doc.contains("gradient")) {
        const json& g = doc["gradient"];
        if (g.is_string()) {
            if (g.get<std::string>() != "exact")
                throw InvalidInput("config: gradient must be \"exact\" or a sampled-mode object");
        } else {
            reject_unknown(g, {"mode", "batch", "horizon", "baseline"}, "gradient");
            if (as<std::string>(g.value("mode", json("sampled")), "gradient.mode") != "sampled")
                throw InvalidInput("config: gradient.mode must be \"sampled\"");
            c.gradient.sampled = true;
            if (g.contains("batch")) c.gradient.batch = as<std::size_t>(g["batch"], "gradient.batch");
            if (g.contains("horizon")) c.gradient.horizon = as<std::size_t>(g["horizon"], "gradient.horizon");
            if (g.contains("baseline")) c.gradient.baseline = as<bool>(g["baseline"], "gradient.baseline");
        }
    }
    if (doc.contains("record_wall_time")) c.record_wall_time = as<bool>(doc["record_wall_time"], "record_wall_time");
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open config '{}'", path.string()));
    try {
        return config_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw InvalidInput(fmt::format("config '{}': {}", path.string(), e.what()));
    }
}

}  // namespace spgnm
