#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "gwinf/asymptotics.hpp"
#include "gwinf/gfiter.hpp"
#include "gwinf/meanmatrix.hpp"
#include "gwinf/model.hpp"
#include "gwinf/montecarlo.hpp"

namespace gwinf {

// Model documents use 1-based type labels; everything in memory is 0-based.
ModelSpec parse_model_spec(const nlohmann::json& doc);
ModelSpec load_model_spec(const std::string& path);  // throws std::ios_base::failure on I/O

nlohmann::json to_json(const ValidationReport& rep);
nlohmann::json to_json(const EigenSystem& es, bool include_vectors = false);
nlohmann::json to_json(const ClassReport& rep);
nlohmann::json to_json(const RadiusDiagnostic& rd);
nlohmann::json to_json(const AlphaFit& fit);
nlohmann::json to_json(const SurvivalPrediction& pred);
nlohmann::json to_json(const SurvivalEstimate& est);
nlohmann::json to_json(const LaplaceEstimate& est);
nlohmann::json to_json(const TheoremReport& rep);

void write_eigen_csv(const std::string& path, const EigenSystem& es);
void write_trace_csv(const std::string& path, const IterationTrace& trace);
void write_trials_csv(const std::string& path, const RunResult& run);
void write_phi_curve_csv(const std::string& path, const PhiCurve& curve);
void write_text_file(const std::string& path, const std::string& text);

std::uint64_t fnv1a64(const std::string& bytes);

} // namespace gwinf
