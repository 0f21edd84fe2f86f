#include "gamepred/predictor.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace gamepred {

std::optional<double> normalize(const LabelMass& masses, const std::string& affirmative) {
    auto it = masses.per_label.find(affirmative);
    if (it == masses.per_label.end())
        throw ConfigError(fmt::format("affirmative label '{}' absent from mass map", affirmative));
    double total = 0.0;
    for (const auto& [label, p] : masses.per_label) total += p;
    if (total <= 0.0) return std::nullopt;
    return std::clamp(it->second / total, 0.0, 1.0);
}

PredictionRecord make_prediction(const DecisionPoint& dp, const RenderedPrompt& prompt,
                                 const std::string& model_id, const LabelMass& masses) {
    PredictionRecord rec;
    rec.decision_point_id = dp.id;
    rec.model_id = model_id;
    rec.variant = prompt.variant;
    rec.format = prompt.format;
    rec.label_masses = masses;
    rec.p_affirmative = normalize(masses, dp.affirmative_label);
    return rec;
}

double mean_decision_mass(std::span<const PredictionRecord> records) {
    if (records.empty()) throw Error("mean decision mass over an empty record list");
    double total = 0.0;
    for (const PredictionRecord& r : records) total += r.label_masses.total_mass;
    return total / static_cast<double>(records.size());
}

void save_predictions(const std::string& path, std::span<const PredictionRecord> records) {
    std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write predictions '{}'", path));
    for (const PredictionRecord& r : records) {
        json j{{"decision_point_id", r.decision_point_id},
               {"model_id", r.model_id},
               {"variant", r.variant},
               {"format", format_name(r.format)},
               {"per_label", r.label_masses.per_label},
               {"total_mass", r.label_masses.total_mass},
               {"p_affirmative", r.p_affirmative ? json(*r.p_affirmative) : json(nullptr)}};
        out << j.dump() << '\n';
    }
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open predictions");
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            PredictionRecord r;
            r.decision_point_id = j.at("decision_point_id").get<std::string>();
            r.model_id = j.at("model_id").get<std::string>();
            r.variant = j.at("variant").get<std::string>();
            r.format = parse_format(j.at("format").get<std::string>());
            r.label_masses.per_label = j.at("per_label").get<std::map<std::string, double>>();
            r.label_masses.total_mass = j.at("total_mass").get<double>();
            if (!j.at("p_affirmative").is_null())
                r.p_affirmative = j.at("p_affirmative").get<double>();
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw ParseError(path, lineno, e.what());
        }
    }
    return out;
}

} // namespace gamepred
